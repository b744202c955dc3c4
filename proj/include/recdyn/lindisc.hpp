#ifndef RECDYN_LINDISC_HPP
#define RECDYN_LINDISC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "recdyn/error.hpp"
#include "recdyn/grid.hpp"
#include "recdyn/rng.hpp"

namespace recdyn {

using IntVec = std::vector<std::int64_t>;

/// Finite sequence A_1..A_k of invertible n x n matrices, with optional
/// translation parts v_1..v_k (empty means all zero).
class MatrixSeq {
public:
    static constexpr double kSingularGuard = 1e-12;
    static constexpr double kConservativeTol = 1e-9;

    MatrixSeq() = default;

    explicit MatrixSeq(std::vector<Eigen::MatrixXd> mats, std::vector<Eigen::VectorXd> shifts = {})
        : mats_(std::move(mats)), shifts_(std::move(shifts)) {
        if (mats_.empty()) throw ValidationError("MatrixSeq: empty sequence");
        dim_ = static_cast<int>(mats_.front().rows());
        for (const auto& a : mats_) {
            if (a.rows() != dim_ || a.cols() != dim_) throw ValidationError("MatrixSeq: matrices must be n x n with a common n");
            if (!(std::abs(a.determinant()) > kSingularGuard)) throw NumericalError("MatrixSeq: singular matrix (|det| <= 1e-12)");
        }
        if (!shifts_.empty()) {
            if (shifts_.size() != mats_.size()) throw ValidationError("MatrixSeq: need one shift per matrix");
            for (const auto& v : shifts_)
                if (v.size() != dim_) throw ValidationError("MatrixSeq: shift dimension mismatch");
        }
    }

    int dim() const { return dim_; }
    std::size_t length() const { return mats_.size(); }
    const Eigen::MatrixXd& matrix(std::size_t i) const { return mats_[i]; }
    const std::vector<Eigen::MatrixXd>& matrices() const { return mats_; }
    bool has_shifts() const { return !shifts_.empty(); }
    Eigen::VectorXd shift(std::size_t i) const {
        return shifts_.empty() ? Eigen::VectorXd::Zero(dim_) : shifts_[i];
    }

    /// Every |det A_i - 1| <= 1e-9.
    bool conservative() const {
        return std::all_of(mats_.begin(), mats_.end(),
                           [](const auto& a) { return std::abs(a.determinant() - 1.0) <= kConservativeTol; });
    }

    MatrixSeq prefix(std::size_t k) const {
        if (k < 1 || k > mats_.size()) throw ValidationError("MatrixSeq: bad prefix length");
        std::vector<Eigen::MatrixXd> m(mats_.begin(), mats_.begin() + static_cast<std::ptrdiff_t>(k));
        std::vector<Eigen::VectorXd> v;
        if (!shifts_.empty()) v.assign(shifts_.begin(), shifts_.begin() + static_cast<std::ptrdiff_t>(k));
        return MatrixSeq(std::move(m), std::move(v));
    }

    MatrixSeq with_shifts(std::vector<Eigen::VectorXd> shifts) const { return MatrixSeq(mats_, std::move(shifts)); }

    static MatrixSeq identity(int dim, std::size_t k) {
        return MatrixSeq(std::vector<Eigen::MatrixXd>(k, Eigen::MatrixXd::Identity(dim, dim)));
    }

    /// One matrix per line, n*n row-major entries, optionally followed by n
    /// shift entries. Blank lines and lines starting with '#' are skipped.
    static MatrixSeq from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot read matrix file " + path);
        std::vector<Eigen::MatrixXd> mats;
        std::vector<Eigen::VectorXd> shifts;
        std::string line;
        int dim = 0;
        bool affine = false;
        while (std::getline(in, line)) {
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            std::vector<double> vals;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                try {
                    std::size_t used = 0;
                    vals.push_back(std::stod(cell, &used));
                } catch (const std::exception&) {
                    throw ValidationError("matrix file " + path + ": bad number '" + cell + "'");
                }
            }
            int n = 0;
            bool has_shift = false;
            for (int cand = 1; cand <= 16; ++cand) {
                if (static_cast<int>(vals.size()) == cand * cand) n = cand;
                else if (static_cast<int>(vals.size()) == cand * cand + cand) n = cand, has_shift = true;
                if (n) break;
            }
            if (n == 0) throw ValidationError("matrix file " + path + ": row length is neither n^2 nor n^2+n");
            if (dim == 0) dim = n, affine = has_shift;
            if (n != dim || has_shift != affine) throw ValidationError("matrix file " + path + ": inconsistent rows");
            Eigen::MatrixXd a(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) a(i, j) = vals[static_cast<std::size_t>(i * n + j)];
            mats.push_back(a);
            if (has_shift) {
                Eigen::VectorXd v(n);
                for (int i = 0; i < n; ++i) v(i) = vals[static_cast<std::size_t>(n * n + i)];
                shifts.push_back(v);
            }
        }
        if (mats.empty()) throw ValidationError("matrix file " + path + " holds no matrices");
        return MatrixSeq(std::move(mats), std::move(shifts));
    }

private:
    int dim_ = 0;
    std::vector<Eigen::MatrixXd> mats_;
    std::vector<Eigen::VectorXd> shifts_;
};

/// Random element of SL_2(R) of the form R_a diag(e^t, e^-t) R_b with a, b
/// uniform in [0, 2 pi] and t uniform in [-1/2, 1/2].
inline Eigen::MatrixXd random_sl2_svd(Rng& rng) {
    auto rot = [](double a) {
        Eigen::MatrixXd r(2, 2);
        r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        return r;
    };
    double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double t = rng.uniform(-0.5, 0.5);
    double b = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = std::exp(t);
    d(1, 1) = std::exp(-t);
    return rot(a) * d * rot(b);
}

inline constexpr const char* kSvdSamplerName = "svd-rot-diag-rot/mt19937_64";

inline MatrixSeq random_sl2_sequence(std::size_t k, Rng& rng) {
    std::vector<Eigen::MatrixXd> mats;
    mats.reserve(k);
    for (std::size_t i = 0; i < k; ++i) mats.push_back(random_sl2_svd(rng));
    return MatrixSeq(std::move(mats));
}

/// Sequence number `index` of the seeded family used by the CLI and tests.
inline MatrixSeq random_sl2_sequence(std::size_t k, std::uint64_t seed, std::uint64_t index) {
    Rng rng = Rng::stream(seed, index);
    return random_sl2_sequence(k, rng);
}

inline constexpr double kCoordinateLimit = 0x1.0p52;

/// pi(A x + v): the discretization of the affine map A + v at an integer point.
inline IntVec hat_apply(const Eigen::MatrixXd& a, const Eigen::VectorXd& v, const IntVec& x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    if (a.rows() != n || a.cols() != n || v.size() != n) throw ValidationError("hat_apply: dimension mismatch");
    IntVec out(x.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = v(i);
        for (Eigen::Index j = 0; j < n; ++j) s += a(i, j) * static_cast<double>(x[static_cast<std::size_t>(j)]);
        double p = nearest_integer(s);
        if (!(std::abs(p) <= kCoordinateLimit)) throw NumericalError("hat_apply: coordinate exceeds 2^52");
        out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(p);
    }
    return out;
}

inline IntVec hat_apply(const Eigen::MatrixXd& a, const IntVec& x) {
    return hat_apply(a, Eigen::VectorXd::Zero(a.rows()), x);
}

/// Image set of Z^n intersected with the sup-norm ball B_R. Points are stored
/// flat (n coordinates each), sorted lexicographically and distinct.
struct PointSet {
    int dim = 0;
    double radius = 0.0;
    std::vector<std::int64_t> coords;

    std::size_t size() const { return dim ? coords.size() / static_cast<std::size_t>(dim) : 0; }

    bool contains(const IntVec& p) const {
        std::size_t lo = 0, hi = size();
        const auto n = static_cast<std::size_t>(dim);
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            auto cmp = std::lexicographical_compare(coords.begin() + static_cast<std::ptrdiff_t>(mid * n),
                                                    coords.begin() + static_cast<std::ptrdiff_t>(mid * n + n), p.begin(), p.end());
            if (cmp) lo = mid + 1;
            else hi = mid;
        }
        return lo < size() && std::equal(p.begin(), p.end(), coords.begin() + static_cast<std::ptrdiff_t>(lo * n));
    }

    /// Number of points with sup-norm <= r.
    std::uint64_t count_within(double r) const;
};

namespace detail {
inline std::uint64_t count_within(const std::vector<std::int64_t>& flat, int dim, double r) {
    const auto n = static_cast<std::size_t>(dim);
    std::uint64_t c = 0;
    for (std::size_t i = 0; i + n <= flat.size(); i += n) {
        bool in = true;
        for (std::size_t j = 0; j < n && in; ++j) in = std::abs(static_cast<double>(flat[i + j])) <= r;
        c += in;
    }
    return c;
}
}  // namespace detail

inline std::uint64_t PointSet::count_within(double r) const { return detail::count_within(coords, dim, r); }

namespace detail {

/// Sorts and deduplicates flat n-vectors. Uses a bitmap over the bounding box
/// when it has at most 2^33 cells, otherwise sort + unique on the tuples.
inline void dedupe_points(std::vector<std::int64_t>& flat, int dim) {
    const auto n = static_cast<std::size_t>(dim);
    const std::size_t count = flat.size() / n;
    if (count == 0) return;
    std::vector<std::int64_t> lo(n, INT64_MAX), hi(n, INT64_MIN);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            lo[j] = std::min(lo[j], flat[i * n + j]);
            hi[j] = std::max(hi[j], flat[i * n + j]);
        }
    long double cells = 1;
    for (std::size_t j = 0; j < n; ++j) cells *= static_cast<long double>(hi[j] - lo[j] + 1);
    if (cells <= 0x1.0p33L) {
        std::vector<std::uint64_t> extent(n), bits((static_cast<std::size_t>(cells) + 63) / 64, 0);
        for (std::size_t j = 0; j < n; ++j) extent[j] = static_cast<std::uint64_t>(hi[j] - lo[j] + 1);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t key = 0;
            for (std::size_t j = 0; j < n; ++j) key = key * extent[j] + static_cast<std::uint64_t>(flat[i * n + j] - lo[j]);
            bits[key >> 6] |= std::uint64_t{1} << (key & 63);
        }
        flat.clear();
        std::vector<std::int64_t> p(n);
        for (std::size_t w = 0; w < bits.size(); ++w) {
            for (std::uint64_t word = bits[w]; word; word &= word - 1) {
                std::uint64_t key = w * 64 + static_cast<std::uint64_t>(__builtin_ctzll(word));
                for (std::size_t j = n; j-- > 0;) {
                    p[j] = lo[j] + static_cast<std::int64_t>(key % extent[j]);
                    key /= extent[j];
                }
                flat.insert(flat.end(), p.begin(), p.end());
            }
        }
        return;
    }
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    auto less = [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(flat.begin() + static_cast<std::ptrdiff_t>(a * n), flat.begin() + static_cast<std::ptrdiff_t>(a * n + n),
                                            flat.begin() + static_cast<std::ptrdiff_t>(b * n), flat.begin() + static_cast<std::ptrdiff_t>(b * n + n));
    };
    std::sort(idx.begin(), idx.end(), less);
    std::vector<std::int64_t> out;
    out.reserve(flat.size());
    for (std::size_t r = 0; r < count; ++r) {
        std::size_t i = idx[r];
        if (r > 0 && !less(idx[r - 1], i)) continue;
        out.insert(out.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * n), flat.begin() + static_cast<std::ptrdiff_t>(i * n + n));
    }
    flat.swap(out);
}

/// One discretized affine stage applied in place to a flat point list.
inline void apply_stage(std::vector<std::int64_t>& flat, int dim, const Eigen::MatrixXd& a, const Eigen::VectorXd& v) {
    const auto n = static_cast<std::size_t>(dim);
    const std::size_t count = flat.size() / n;
    std::vector<double> row(n * n), shift(n);
    for (std::size_t i = 0; i < n; ++i) {
        shift[i] = v(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < n; ++j) row[i * n + j] = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    bool overflow = false;
    parallel_for(count, [&](std::size_t begin, std::size_t end) {
        std::vector<double> x(n);
        bool bad = false;
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t j = 0; j < n; ++j) x[j] = static_cast<double>(flat[p * n + j]);
            for (std::size_t i = 0; i < n; ++i) {
                double s = shift[i];
                for (std::size_t j = 0; j < n; ++j) s += row[i * n + j] * x[j];
                double q = nearest_integer(s);
                bad |= !(std::abs(q) <= kCoordinateLimit);
                flat[p * n + i] = bad ? 0 : static_cast<std::int64_t>(q);
            }
        }
        if (bad) overflow = true;
    }, 1 << 16);
    if (overflow) throw NumericalError("image_set: coordinate exceeds 2^52");
}

/// Unrolling x_i = A_i x_{i-1} + v_i + e_i with |e_i| <= 1/2 gives
/// x_0 = P_k^-1 x_k - sum_i P_i^-1 (v_i + e_i), P_i = A_i ... A_1, hence
/// |x_0| <= slope * |x_k|_inf + offset componentwise.
struct PreimageBound {
    Eigen::VectorXd slope, offset;
};

inline PreimageBound preimage_bound(const MatrixSeq& seq, std::size_t k) {
    const int n = seq.dim();
    Eigen::MatrixXd prod_inv = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < k; ++i) {
        prod_inv = prod_inv * seq.matrix(i).inverse();
        offset += prod_inv.cwiseAbs() * (Eigen::VectorXd::Constant(n, 0.5) + seq.shift(i).cwiseAbs());
    }
    return {prod_inv.cwiseAbs() * Eigen::VectorXd::Ones(n), offset};
}

/// Sup-norm radius r' such that every integer preimage chain of a point of the
/// k-th image within B_{r'} starts inside B_R.
inline double shrunken_radius(const MatrixSeq& seq, std::size_t k, double R) {
    auto b = preimage_bound(seq, k);
    double r = INFINITY;
    for (int j = 0; j < seq.dim(); ++j) r = std::min(r, (R - b.offset(j)) / b.slope(j));
    return std::floor(r + 1e-9);
}

/// Smallest integer input radius R whose image saturates B_{r_out}.
inline double input_radius(const MatrixSeq& seq, std::size_t k, double r_out) {
    auto b = preimage_bound(seq, k);
    double r = 0.0;
    for (int j = 0; j < seq.dim(); ++j) r = std::max(r, b.slope(j) * r_out + b.offset(j));
    return std::ceil(r - 1e-9);
}

}  // namespace detail

namespace detail {

/// Flat list of Z^n cap B_R in lexicographic order.
inline std::vector<std::int64_t> ball_points(int n, double R) {
    const auto r = static_cast<std::int64_t>(std::floor(R));
    long double total = std::pow(static_cast<long double>(2 * r + 1), n);
    if (total > 0x1.0p31L) throw ValidationError("too many input points in B_R; lower the radius");
    std::vector<std::int64_t> flat;
    flat.reserve(static_cast<std::size_t>(total) * static_cast<std::size_t>(n));
    IntVec p(static_cast<std::size_t>(n), -r);
    for (;;) {
        flat.insert(flat.end(), p.begin(), p.end());
        int j = n - 1;
        while (j >= 0 && p[static_cast<std::size_t>(j)] == r) p[static_cast<std::size_t>(j--)] = -r;
        if (j < 0) break;
        ++p[static_cast<std::size_t>(j)];
    }
    return flat;
}

}  // namespace detail

/// Applies the discretized stages one after the other to Z^n cap B_R,
/// deduplicating after each stage.
inline PointSet image_set(const MatrixSeq& seq, double R) {
    if (!(R >= 1.0)) throw ValidationError("image_set: radius must be >= 1");
    PointSet ps{seq.dim(), R, detail::ball_points(seq.dim(), R)};
    for (std::size_t i = 0; i < seq.length(); ++i) {
        detail::apply_stage(ps.coords, ps.dim, seq.matrix(i), seq.shift(i));
        detail::dedupe_points(ps.coords, ps.dim);
    }
    return ps;
}

struct BallRate {
    std::size_t k = 0;
    double rate = 0.0;
    std::uint64_t hits = 0;
    std::uint64_t total = 0;
    double radius = 0.0;
    double output_radius = 0.0;
};

inline constexpr double kMinOutputRadius = 10.0;

/// Density of the k-th image measured on a shrunken output ball B_R' that the
/// truncated input saturates. Returns one entry per prefix k = 1..length.
inline std::vector<BallRate> prefix_rates_ball(const MatrixSeq& seq, double R) {
    if (!(R >= 1.0)) throw ValidationError("rate_injectivity_ball: radius must be >= 1");
    std::vector<double> radii(seq.length());
    for (std::size_t k = 1; k <= seq.length(); ++k) {
        radii[k - 1] = detail::shrunken_radius(seq, k, R);
        if (radii[k - 1] < kMinOutputRadius) {
            std::ostringstream msg;
            msg << "rate_injectivity_ball: output radius " << radii[k - 1] << " < " << kMinOutputRadius
                << " at k = " << k << "; increase R (currently " << R << ")";
            throw ValidationError(msg.str());
        }
    }
    const int n = seq.dim();
    std::vector<std::int64_t> flat = detail::ball_points(n, R);
    std::vector<BallRate> out;
    for (std::size_t i = 0; i < seq.length(); ++i) {
        detail::apply_stage(flat, n, seq.matrix(i), seq.shift(i));
        detail::dedupe_points(flat, n);
        BallRate b;
        b.k = i + 1;
        b.radius = R;
        b.output_radius = radii[i];
        b.hits = detail::count_within(flat, n, radii[i]);
        b.total = static_cast<std::uint64_t>(std::pow(2.0 * radii[i] + 1.0, n));
        b.rate = static_cast<double>(b.hits) / static_cast<double>(b.total);
        out.push_back(b);
    }
    return out;
}

inline BallRate rate_injectivity_ball_detail(const MatrixSeq& seq, double R) {
    return prefix_rates_ball(seq, R).back();
}

/// Card(image cap B_R') / Card(Z^n cap B_R').
inline double rate_injectivity_ball(const MatrixSeq& seq, double R) { return rate_injectivity_ball_detail(seq, R).rate; }

/// Rate of the torus map x -> A x + v for a translation v with period q v in
/// Z^n. On the grid of order N the map is locally x -> P(A x + N v mod 1), so
/// the rate is the mean over N = 0..q-1 of the lattice rate with that shift.
inline double rate_affine_torus(const Eigen::MatrixXd& a, const Eigen::VectorXd& v, std::uint64_t period, double R) {
    if (period < 1) throw ValidationError("rate_affine_torus: period must be >= 1");
    if (v.size() != a.rows()) throw ValidationError("rate_affine_torus: translation dimension mismatch");
    if (((v * static_cast<double>(period)).array() - (v * static_cast<double>(period)).array().round()).abs().maxCoeff() > 1e-9)
        throw ValidationError("rate_affine_torus: period * v is not an integer vector");
    double sum = 0.0;
    for (std::uint64_t N = 0; N < period; ++N) {
        Eigen::VectorXd s = v * static_cast<double>(N);
        s = s.array() - s.array().floor();
        sum += rate_injectivity_ball(MatrixSeq({a}, {s}), R);
    }
    return sum / static_cast<double>(period);
}

/// Binary PGM with one pixel per integer point of B_w (n = 1 or 2), where w is
/// the window if positive and the set's radius otherwise; a pixel is black iff
/// the point is in the set. Rows run from y = +w down to y = -w.
inline void render_image(const PointSet& ps, const std::string& path, double window = 0.0) {
    if (ps.dim != 1 && ps.dim != 2) throw ValidationError("render_image: only 1-D and 2-D sets can be rendered");
    const auto r = static_cast<std::int64_t>(std::floor(window > 0.0 ? window : ps.radius));
    const auto side = static_cast<std::size_t>(2 * r + 1);
    const std::size_t height = ps.dim == 2 ? side : 1;
    std::vector<unsigned char> pixels(side * height, 255);
    const auto n = static_cast<std::size_t>(ps.dim);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::int64_t x = ps.coords[i * n];
        std::int64_t y = ps.dim == 2 ? ps.coords[i * n + 1] : 0;
        if (std::abs(x) > r || std::abs(y) > r) continue;
        std::size_t row = ps.dim == 2 ? static_cast<std::size_t>(r - y) : 0;
        pixels[row * side + static_cast<std::size_t>(x + r)] = 0;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os << "P5\n" << side << ' ' << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!os) throw ValidationError("write failed: " + path);
}

}  // namespace recdyn

#endif  // RECDYN_LINDISC_HPP
