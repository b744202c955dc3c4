#ifndef RECDYN_EXPANDING_HPP
#define RECDYN_EXPANDING_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "recdyn/error.hpp"
#include "recdyn/modelset.hpp"
#include "recdyn/parallel.hpp"
#include "recdyn/rng.hpp"
#include "recdyn/smooth_map.hpp"

namespace recdyn {

/// Expanding map of the circle given by a monotone lift F with
/// F(x + 1) = F(x) + d and F' >= 1.
class ExpandingCircleMap {
public:
    using Fn = std::function<double(double)>;

    ExpandingCircleMap(std::string name, int degree, Fn lift, Fn derivative)
        : name_(std::move(name)), degree_(degree), lift_(std::move(lift)), derivative_(std::move(derivative)) {
        if (degree_ < 2) throw ValidationError("expanding map: degree must be >= 2");
        constexpr int kSamples = 1024;
        double prev = lift_(0.0);
        for (int i = 1; i <= kSamples; ++i) {
            double x = static_cast<double>(i) / kSamples;
            double fx = lift_(x);
            if (!(fx > prev)) throw ValidationError("expanding map '" + name_ + "': lift is not strictly increasing");
            if (!(derivative_(x) >= 1.0)) throw ValidationError("expanding map '" + name_ + "': derivative below 1");
            if (std::abs(lift_(x + 1.0) - fx - degree_) > 1e-9)
                throw ValidationError("expanding map '" + name_ + "': F(x+1) - F(x) differs from the degree");
            prev = fx;
        }
    }

    /// Expanding maps are only supported on the circle.
    static void require_circle(int dim) {
        if (dim != 1) throw ValidationError("expanding maps of T^n with n >= 2 are out of scope; use --dim 1");
    }

    const std::string& name() const { return name_; }
    int degree() const { return degree_; }
    double lift(double x) const { return lift_(x); }
    double derivative(double x) const { return derivative_(x); }
    double operator()(double x) const { return wrap_unit(lift_(x)); }

    SmoothMap as_smooth_map() const {
        auto f = lift_;
        auto df = derivative_;
        return SmoothMap(
            name_, 1, [f](std::span<const double> x, std::span<double> y) { y[0] = f(x[0]); },
            [df](std::span<const double> x) {
                Eigen::MatrixXd j(1, 1);
                j(0, 0) = df(x[0]);
                return j;
            },
            false);
    }

    /// The d solutions of f(x) = y in [0, 1), in increasing order of F(x).
    std::vector<double> level_preimages(double y) const {
        y = wrap_unit(y);
        const double base = lift_(0.0);
        const double first = y + std::ceil(base - y);
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(degree_));
        for (int j = 0; j < degree_; ++j) {
            double target = first + j;
            double lo = 0.0, hi = 1.0;
            if (!(lift_(lo) <= target && target <= lift_(hi)))
                throw ValidationError("expanding map '" + name_ + "': preimage not bracketed (non-monotone lift)");
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                (lift_(mid) < target ? lo : hi) = mid;
            }
            double x = std::abs(lift_(lo) - target) <= std::abs(lift_(hi) - target) ? lo : hi;
            if (std::abs(lift_(x) - target) > 1e-12)
                throw ValidationError("expanding map '" + name_ + "': bisection residual above 1e-12");
            out.push_back(wrap_unit(x));
        }
        return out;
    }

private:
    std::string name_;
    int degree_;
    Fn lift_;
    Fn derivative_;
};

namespace maps {

inline ExpandingCircleMap doubling() {
    return ExpandingCircleMap("doubling", 2, [](double x) { return 2.0 * x; }, [](double) { return 2.0; });
}

/// x -> d x on the circle.
inline ExpandingCircleMap times(int d) {
    return ExpandingCircleMap("times-" + std::to_string(d), d, [d](double x) { return d * x; },
                              [d](double) { return static_cast<double>(d); });
}

inline constexpr double kPaperEps1 = 0.12794356372;
inline constexpr double kPaperEps2 = 0.00824735961;

/// g(x) = 2x + eps1 cos(2 pi x) + eps2 sin(6 pi x).
inline ExpandingCircleMap paper_expanding(double eps1 = kPaperEps1, double eps2 = kPaperEps2) {
    return ExpandingCircleMap(
        "paper-expanding", 2,
        [eps1, eps2](double x) { return 2.0 * x + eps1 * std::cos(kTwoPi * x) + eps2 * std::sin(3.0 * kTwoPi * x); },
        [eps1, eps2](double x) {
            return 2.0 - kTwoPi * eps1 * std::sin(kTwoPi * x) + 3.0 * kTwoPi * eps2 * std::cos(3.0 * kTwoPi * x);
        });
}

}  // namespace maps

/// Iterated preimages f^-m(y), m = 0..depth. Level m holds d^m nodes; the
/// children of node p of level m-1 are p*d .. p*d + d-1. Each non-root node
/// carries its point x and the weight 1/f'(x).
struct PreimageTree {
    int degree = 2;
    std::vector<std::vector<double>> points;   // points[0] = {y}
    std::vector<std::vector<double>> weights;  // weights[0] = {1}

    std::size_t depth() const { return points.size() - 1; }
};

inline constexpr std::size_t kMaxTreeNodes = std::size_t{1} << 21;

namespace detail {
inline void check_tree_size(int degree, std::size_t depth) {
    long double nodes = 0, level = 1;
    for (std::size_t m = 0; m <= depth; ++m, level *= degree) nodes += level;
    if (nodes > static_cast<long double>(kMaxTreeNodes))
        throw ValidationError("tree too large: more than 2^21 nodes (lower the depth)");
}
}  // namespace detail

inline PreimageTree preimages(const ExpandingCircleMap& f, double y, std::size_t depth) {
    if (depth < 1) throw ValidationError("preimages: depth must be >= 1");
    detail::check_tree_size(f.degree(), depth);
    PreimageTree t;
    t.degree = f.degree();
    t.points.push_back({wrap_unit(y)});
    t.weights.push_back({1.0});
    for (std::size_t m = 1; m <= depth; ++m) {
        std::vector<double> pts, w;
        pts.reserve(t.points[m - 1].size() * static_cast<std::size_t>(f.degree()));
        for (double parent : t.points[m - 1])
            for (double x : f.level_preimages(parent)) {
                pts.push_back(x);
                w.push_back(1.0 / f.derivative(x));
            }
        t.points.push_back(std::move(pts));
        t.weights.push_back(std::move(w));
    }
    return t;
}

/// Complete d-ary tree of depth k whose edges carry retention probabilities.
/// Vertices other than the root are tuples (i_1..i_m) of {1..d}; the father of
/// a tuple drops its last entry and its length is m.
class DecoratedTree {
public:
    using Path = std::vector<int>;

    DecoratedTree(int arity, std::vector<std::vector<double>> levels) : arity_(arity), levels_(std::move(levels)) {
        if (arity_ < 1) throw ValidationError("DecoratedTree: arity must be positive");
        detail::check_tree_size(arity_, levels_.size());
        std::size_t width = 1;
        for (const auto& lv : levels_) {
            width *= static_cast<std::size_t>(arity_);
            if (lv.size() != width) throw ValidationError("DecoratedTree: level has wrong number of edges");
            for (double p : lv)
                if (!(p > 0.0 && p <= 1.0)) throw ValidationError("DecoratedTree: probabilities must lie in (0, 1]");
        }
    }

    static DecoratedTree constant(int arity, std::size_t depth, double p) {
        std::vector<std::vector<double>> lv;
        std::size_t width = 1;
        for (std::size_t m = 0; m < depth; ++m) lv.emplace_back(width *= static_cast<std::size_t>(arity), p);
        return DecoratedTree(arity, std::move(lv));
    }

    /// Decorations 1/f'(x) of a preimage tree.
    static DecoratedTree from_preimages(const PreimageTree& t) {
        return DecoratedTree(t.degree, std::vector<std::vector<double>>(t.weights.begin() + 1, t.weights.end()));
    }

    int arity() const { return arity_; }
    std::size_t depth() const { return levels_.size(); }
    const std::vector<double>& level(std::size_t m) const { return levels_[m - 1]; }

    static std::size_t length(const Path& i) { return i.size(); }
    static Path father(const Path& i) { return Path(i.begin(), i.end() - (i.empty() ? 0 : 1)); }

    /// Retention probability of the edge (father(i), i).
    double edge(const Path& i) const {
        if (i.empty() || i.size() > depth()) throw ValidationError("DecoratedTree: bad vertex");
        std::size_t idx = 0;
        for (int c : i) {
            if (c < 1 || c > arity_) throw ValidationError("DecoratedTree: tuple entry out of range");
            idx = idx * static_cast<std::size_t>(arity_) + static_cast<std::size_t>(c - 1);
        }
        return levels_[i.size() - 1][idx];
    }

private:
    int arity_;
    std::vector<std::vector<double>> levels_;
};

/// Probability that the randomly thinned tree keeps a root-to-leaf path:
/// leaves have value 1 and an internal vertex 1 - prod_c (1 - p_c value(c)).
inline double tree_density(const DecoratedTree& t) {
    const auto d = static_cast<std::size_t>(t.arity());
    std::vector<double> below(t.depth() == 0 ? 1 : t.level(t.depth()).size(), 1.0);
    for (std::size_t m = t.depth(); m >= 1; --m) {
        const auto& p = t.level(m);
        std::vector<double> up(p.size() / d);
        for (std::size_t v = 0; v < up.size(); ++v) {
            double miss = 1.0;
            for (std::size_t c = 0; c < d; ++c) miss *= 1.0 - p[v * d + c] * below[v * d + c];
            up[v] = 1.0 - miss;
        }
        below.swap(up);
    }
    return below[0];
}

/// Number Z_k of depth-k vertices still joined to the root after keeping each
/// edge independently with its probability.
inline std::uint64_t sample_survivors(const DecoratedTree& t, Rng& rng) {
    const auto d = static_cast<std::size_t>(t.arity());
    std::vector<std::size_t> alive{0}, next;
    for (std::size_t m = 1; m <= t.depth() && !alive.empty(); ++m) {
        const auto& p = t.level(m);
        next.clear();
        for (auto v : alive)
            for (std::size_t c = 0; c < d; ++c)
                if (rng.uniform() < p[v * d + c]) next.push_back(v * d + c);
        alive.swap(next);
    }
    return alive.size();
}

/// D-bar of the preimage tree of y decorated by 1/f'.
inline double mean_density_at(const ExpandingCircleMap& f, double y, std::size_t k) {
    return tree_density(DecoratedTree::from_preimages(preimages(f, y, k)));
}

/// Ruelle-Perron-Frobenius operator L phi(y) = sum_{f(x) = y} phi(x) / f'(x)
/// on the grid y_j = j / M, with phi interpolated linearly between nodes.
class TransferOperator {
public:
    TransferOperator(const ExpandingCircleMap& f, std::size_t grid) : grid_(grid), degree_(f.degree()) {
        if (grid_ < 16) throw ValidationError("transfer operator: need at least 16 grid points");
        pre_.resize(grid_ * static_cast<std::size_t>(degree_));
        wts_.resize(pre_.size());
        parallel_for(grid_, [&](std::size_t b, std::size_t e) {
            for (std::size_t j = b; j < e; ++j) {
                auto xs = f.level_preimages(static_cast<double>(j) / static_cast<double>(grid_));
                for (std::size_t c = 0; c < xs.size(); ++c) {
                    pre_[j * static_cast<std::size_t>(degree_) + c] = xs[c];
                    wts_[j * static_cast<std::size_t>(degree_) + c] = 1.0 / f.derivative(xs[c]);
                }
            }
        }, 256);
    }

    std::size_t grid() const { return grid_; }

    /// Periodic linear interpolation of grid values at x.
    double interpolate(const std::vector<double>& phi, double x) const {
        double s = wrap_unit(x) * static_cast<double>(grid_);
        auto i = static_cast<std::size_t>(s);
        if (i >= grid_) i = grid_ - 1;
        double t = s - static_cast<double>(i);
        return (1.0 - t) * phi[i] + t * phi[(i + 1) % grid_];
    }

    std::vector<double> apply(const std::vector<double>& phi) const {
        if (phi.size() != grid_) throw ValidationError("transfer operator: density has wrong length");
        for (double v : phi)
            if (!(v >= 0.0)) throw ValidationError("transfer operator: density must be nonnegative");
        std::vector<double> out(grid_, 0.0);
        const auto d = static_cast<std::size_t>(degree_);
        for (std::size_t j = 0; j < grid_; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += interpolate(phi, pre_[j * d + c]) * wts_[j * d + c];
            out[j] = s;
        }
        return out;
    }

    /// L^m 1.
    std::vector<double> power_of_one(std::size_t m) const {
        std::vector<double> phi(grid_, 1.0);
        for (std::size_t i = 0; i < m; ++i) phi = apply(phi);
        return phi;
    }

    /// Trapezoidal integral over the circle.
    static double integral(const std::vector<double>& phi) {
        double s = 0.0;
        for (double v : phi) s += v;
        return s / static_cast<double>(phi.size());
    }

private:
    std::size_t grid_;
    int degree_;
    std::vector<double> pre_, wts_;
};

inline std::vector<double> transfer_operator_apply(const ExpandingCircleMap& f, const std::vector<double>& phi) {
    return TransferOperator(f, phi.size()).apply(phi);
}

/// Monte Carlo mean of Z_m, the generation-m size of the thinned preimage tree.
inline MonteCarloEstimate expected_children(const ExpandingCircleMap& f, double y, std::size_t m, std::uint64_t trials,
                                            std::uint64_t seed) {
    MonteCarloEstimate e;
    e.samples = trials;
    if (m == 0) {
        e.estimate = 1.0;
        return e;
    }
    if (trials < 2) throw ValidationError("expected_children: need at least 2 trials");
    DecoratedTree tree = DecoratedTree::from_preimages(preimages(f, y, m));
    const std::size_t chunks = detail::chunk_count(trials);
    std::vector<double> sum(chunks, 0.0), sum_sq(chunks, 0.0);
    parallel_chunks(chunks, [&](std::size_t c) {
        std::uint64_t begin = trials * c / chunks, end = trials * (c + 1) / chunks;
        Rng rng = Rng::stream(seed, c);
        for (std::uint64_t s = begin; s < end; ++s) {
            auto z = static_cast<double>(sample_survivors(tree, rng));
            sum[c] += z;
            sum_sq[c] += z * z;
        }
    });
    double s = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) s += sum[c], s2 += sum_sq[c];
    const double n = static_cast<double>(trials);
    e.estimate = s / n;
    double var = std::max(0.0, (s2 - n * e.estimate * e.estimate) / (n - 1.0));
    e.std_error = std::sqrt(var / n);
    return e;
}

/// Midpoint rule for the integral over y of D-bar of the depth-k preimage tree.
inline double local_global_tau_expanding(const ExpandingCircleMap& f, std::size_t k, std::size_t quad_points) {
    if (quad_points < 64) throw ValidationError("local_global_tau_expanding: need at least 64 quadrature points");
    if (k < 1) throw ValidationError("local_global_tau_expanding: k must be >= 1");
    std::vector<double> vals(quad_points);
    parallel_for(quad_points, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j)
            vals[j] = mean_density_at(f, (static_cast<double>(j) + 0.5) / static_cast<double>(quad_points), k);
    }, 8);
    double s = 0.0;
    for (double v : vals) s += v;
    return s / static_cast<double>(quad_points);
}

}  // namespace recdyn

#endif  // RECDYN_EXPANDING_HPP
