#ifndef RECDYN_MODELSET_HPP
#define RECDYN_MODELSET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "recdyn/error.hpp"
#include "recdyn/lindisc.hpp"
#include "recdyn/parallel.hpp"
#include "recdyn/rng.hpp"

namespace recdyn {

/// Lattice B Z^m with cached inverse and covolume |det B|.
class LatticeBasis {
public:
    explicit LatticeBasis(Eigen::MatrixXd basis) : basis_(std::move(basis)) {
        if (basis_.rows() != basis_.cols() || basis_.rows() == 0) throw ValidationError("LatticeBasis: basis must be square");
        covolume_ = std::abs(basis_.determinant());
        if (!(covolume_ > 1e-12)) throw NumericalError("LatticeBasis: singular basis (|det| <= 1e-12)");
        inv_ = basis_.inverse();
        Eigen::MatrixXd err = inv_ * basis_ - Eigen::MatrixXd::Identity(dim(), dim());
        if (!(err.cwiseAbs().maxCoeff() <= 1e-9)) throw NumericalError("LatticeBasis: inverse not accurate to 1e-9");
    }

    int dim() const { return static_cast<int>(basis_.rows()); }
    const Eigen::MatrixXd& basis() const { return basis_; }
    const Eigen::MatrixXd& inverse() const { return inv_; }
    double covolume() const { return covolume_; }

private:
    Eigen::MatrixXd basis_;
    Eigen::MatrixXd inv_;
    double covolume_ = 0.0;
};

/// The half-open cube W = (-1/2, 1/2]^m.
struct Window {
    int dim = 0;
    bool contains(std::span<const double> y) const {
        return std::all_of(y.begin(), y.end(), [](double v) { return v > -0.5 && v <= 0.5; });
    }
};

/// Block-bidiagonal basis with A_1..A_k on the diagonal and -Id on the block
/// superdiagonal. With `terminal_identity` an extra Id block closes the matrix
/// (the (k+1)-block matrix M); otherwise A_k is the last block (M~).
inline Eigen::MatrixXd chain_matrix(const MatrixSeq& seq, bool terminal_identity) {
    const Eigen::Index n = seq.dim();
    const auto k = static_cast<Eigen::Index>(seq.length());
    const Eigen::Index blocks = terminal_identity ? k + 1 : k;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * blocks, n * blocks);
    for (Eigen::Index i = 0; i < k; ++i) {
        m.block(i * n, i * n, n, n) = seq.matrix(static_cast<std::size_t>(i));
        if (i + 1 < blocks) m.block(i * n, (i + 1) * n, n, n) = -Eigen::MatrixXd::Identity(n, n);
    }
    if (terminal_identity) m.block(k * n, k * n, n, n) = Eigen::MatrixXd::Identity(n, n);
    return m;
}

/// Inverse of M~ in closed form: block (i, j), j >= i, is A_i^-1 ... A_j^-1.
inline Eigen::MatrixXd tilde_inverse_product_form(const MatrixSeq& seq) {
    const Eigen::Index n = seq.dim();
    const auto k = static_cast<Eigen::Index>(seq.length());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * k, n * k);
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(n, n);
        for (Eigen::Index j = i; j < k; ++j) {
            acc = acc * seq.matrix(static_cast<std::size_t>(j)).inverse();
            out.block(i * n, j * n, n, n) = acc;
        }
    }
    return out;
}

struct LatticePair {
    LatticeBasis full;   // Lambda_k, dimension n(k+1)
    LatticeBasis tilde;  // Lambda~_k, dimension nk
};

inline LatticePair build_lattices(const MatrixSeq& seq) {
    return {LatticeBasis(chain_matrix(seq, true)), LatticeBasis(chain_matrix(seq, false))};
}

inline constexpr double kMemberCandidateLimit = 1e7;

/// Whether x lies in W + L, by enumerating the integer box around B^-1 x that
/// must contain any z with x - B z in W.
inline bool member(const LatticeBasis& lattice, const Window& window, std::span<const double> x) {
    const int m = lattice.dim();
    if (window.dim != m || static_cast<int>(x.size()) != m) throw ValidationError("member: dimension mismatch");
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), m);
    Eigen::VectorXd c = lattice.inverse() * xv;
    double norm = lattice.inverse().cwiseAbs().rowwise().sum().maxCoeff();
    auto r = static_cast<std::int64_t>(std::ceil(norm / 2.0)) + 1;
    if (std::pow(2.0 * static_cast<double>(r) + 1.0, m) > kMemberCandidateLimit)
        throw NumericalError("member: enumeration box exceeds 1e7 candidates (ill-conditioned basis)");
    Eigen::VectorXd base(m);
    for (int j = 0; j < m; ++j) base(j) = std::round(c(j));
    std::vector<std::int64_t> off(static_cast<std::size_t>(m), -r);
    Eigen::VectorXd z(m), y(m);
    for (;;) {
        for (int j = 0; j < m; ++j) z(j) = base(j) + static_cast<double>(off[static_cast<std::size_t>(j)]);
        y = xv - lattice.basis() * z;
        if (window.contains(std::span<const double>(y.data(), static_cast<std::size_t>(m)))) return true;
        int j = m - 1;
        while (j >= 0 && off[static_cast<std::size_t>(j)] == r) off[static_cast<std::size_t>(j--)] = -r;
        if (j < 0) return false;
        ++off[static_cast<std::size_t>(j)];
    }
}

/// The lattices spanned by M or M~ for a matrix sequence, with a membership
/// test for W + L that exploits the block structure.
///
/// Row block i of x - M z in W reads A_i z_i in x_i + z_{i+1} + [-1/2, 1/2)^n,
/// where z_{k+1} is 0 for M~ and is pinned by the last block for M. Given
/// z_{i+1}, the admissible z_i are the integer points of a parallelotope of
/// volume 1/|det A_i|, so x is covered iff a backward search from block k
/// reaches block 1. The search is a branching process with about one child
/// per node for conservative sequences, so it stays cheap at large k.
class ChainLattice {
public:
    static ChainLattice tilde(const MatrixSeq& seq) { return ChainLattice(seq, false); }
    static ChainLattice full(const MatrixSeq& seq) { return ChainLattice(seq, true); }

    ChainLattice(const MatrixSeq& seq, bool terminal_identity)
        : seq_(seq.with_shifts({})),
          terminal_identity_(terminal_identity),
          basis_(chain_matrix(seq_, terminal_identity)) {
        const int n = seq_.dim();
        for (std::size_t i = 0; i < seq_.length(); ++i) {
            Eigen::MatrixXd inv = seq_.matrix(i).inverse();
            Level lv;
            lv.a.assign(static_cast<std::size_t>(n * n), 0.0);
            lv.inv.assign(static_cast<std::size_t>(n * n), 0.0);
            lv.half.assign(static_cast<std::size_t>(n), 0.0);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    lv.a[static_cast<std::size_t>(r * n + c)] = seq_.matrix(i)(r, c);
                    lv.inv[static_cast<std::size_t>(r * n + c)] = inv(r, c);
                    lv.half[static_cast<std::size_t>(r)] += 0.5 * std::abs(inv(r, c));
                }
            levels_.push_back(std::move(lv));
        }
    }

    const LatticeBasis& basis() const { return basis_; }
    int dim() const { return basis_.dim(); }
    int block_dim() const { return seq_.dim(); }
    std::size_t length() const { return seq_.length(); }
    double covolume() const { return basis_.covolume(); }
    bool terminal_identity() const { return terminal_identity_; }

    /// x in W + L.
    bool contains(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim()) throw ValidationError("ChainLattice: dimension mismatch");
        const auto n = static_cast<std::size_t>(block_dim());
        const std::size_t k = length();
        std::vector<double> next(n, 0.0);
        if (terminal_identity_)
            for (std::size_t j = 0; j < n; ++j) next[j] = std::floor(x[k * n + j] + 0.5);
        Scratch s(n, k);
        return search(x, k - 1, next.data(), s);
    }

    /// Uniform point of the fundamental parallelotope B [0,1)^m.
    void sample_fundamental(Rng& rng, std::span<double> out) const {
        const int m = dim();
        thread_local std::vector<double> u;
        u.resize(static_cast<std::size_t>(m));
        for (auto& v : u) v = rng.uniform();
        const auto& b = basis_.basis();
        for (int r = 0; r < m; ++r) {
            double s = 0.0;
            for (int c = 0; c < m; ++c) s += b(r, c) * u[static_cast<std::size_t>(c)];
            out[static_cast<std::size_t>(r)] = s;
        }
    }

private:
    struct Level {
        std::vector<double> a, inv, half;
    };
    struct Scratch {
        Scratch(std::size_t n, std::size_t k) : target(n * k), lo(n * k), hi(n * k), z(n * k) {}
        std::vector<double> target, lo, hi, z;
    };

    bool search(std::span<const double> x, std::size_t i, const double* znext, Scratch& s) const {
        const auto n = static_cast<std::size_t>(block_dim());
        const Level& lv = levels_[i];
        double* c = &s.target[i * n];
        double* lo = &s.lo[i * n];
        double* hi = &s.hi[i * n];
        double* z = &s.z[i * n];
        for (std::size_t j = 0; j < n; ++j) c[j] = x[i * n + j] + znext[j];
        for (std::size_t r = 0; r < n; ++r) {
            double ctr = 0.0;
            for (std::size_t j = 0; j < n; ++j) ctr += lv.inv[r * n + j] * c[j];
            lo[r] = std::ceil(ctr - lv.half[r] - 1e-9);
            hi[r] = std::floor(ctr + lv.half[r] + 1e-9);
            if (lo[r] > hi[r]) return false;
            z[r] = lo[r];
        }
        for (;;) {
            bool ok = true;
            for (std::size_t r = 0; r < n && ok; ++r) {
                double v = -c[r];
                for (std::size_t j = 0; j < n; ++j) v += lv.a[r * n + j] * z[j];
                ok = v >= -0.5 && v < 0.5;
            }
            if (ok && (i == 0 || search(x, i - 1, z, s))) return true;
            std::size_t r = n;
            while (r > 0 && z[r - 1] == hi[r - 1]) {
                z[r - 1] = lo[r - 1];
                --r;
            }
            if (r == 0) return false;
            z[r - 1] += 1.0;
        }
    }

    MatrixSeq seq_;
    bool terminal_identity_;
    LatticeBasis basis_;
    std::vector<Level> levels_;
};

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::uint64_t hits = 0;
    std::uint64_t samples = 0;
    double covolume = 1.0;
};

inline constexpr std::uint64_t kMinMeanRateSamples = 10'000;

namespace detail {

inline std::size_t chunk_count(std::uint64_t samples) {
    return static_cast<std::size_t>(std::clamp<std::uint64_t>(samples / 16384, 1, 256));
}

/// Counts draws u for which pred(B u) holds, using per-chunk substreams.
template <class Pred>
std::uint64_t count_hits(const ChainLattice& lattice, std::uint64_t samples, std::uint64_t seed, Pred&& pred) {
    const std::size_t chunks = chunk_count(samples);
    std::vector<std::uint64_t> hits(chunks, 0);
    parallel_chunks(chunks, [&](std::size_t c) {
        std::uint64_t begin = samples * c / chunks, end = samples * (c + 1) / chunks;
        Rng rng = Rng::stream(seed, c);
        std::vector<double> x(static_cast<std::size_t>(lattice.dim()));
        std::uint64_t h = 0;
        for (std::uint64_t s = begin; s < end; ++s) {
            lattice.sample_fundamental(rng, x);
            h += pred(std::span<const double>(x)) ? 1 : 0;
        }
        hits[c] = h;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    return total;
}

inline MonteCarloEstimate covered_fraction(const ChainLattice& lattice, std::uint64_t samples, std::uint64_t seed) {
    if (samples < kMinMeanRateSamples) throw ValidationError("mean_rate: need at least 10^4 samples");
    MonteCarloEstimate e;
    e.samples = samples;
    e.covolume = lattice.covolume();
    e.hits = count_hits(lattice, samples, seed, [&](std::span<const double> x) { return lattice.contains(x); });
    double p = static_cast<double>(e.hits) / static_cast<double>(samples);
    e.estimate = p;
    e.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    return e;
}

}  // namespace detail

/// D_c(W^k + Lambda~_k): probability that a uniform point of the fundamental
/// domain is covered by the unit cubes centred on the lattice.
inline MonteCarloEstimate mean_rate(const MatrixSeq& seq, std::uint64_t samples, std::uint64_t seed) {
    return detail::covered_fraction(ChainLattice::tilde(seq), samples, seed);
}

/// D_c(W^{k+1} + Lambda_k), the same quantity through the (k+1)-block lattice.
inline MonteCarloEstimate mean_rate_alt(const MatrixSeq& seq, std::uint64_t samples, std::uint64_t seed) {
    return detail::covered_fraction(ChainLattice::full(seq), samples, seed);
}

enum class OverlapStatus { Holds, Violated, Skipped };

struct OverlapCheck {
    OverlapStatus status = OverlapStatus::Skipped;
    double density = 0.0;
    double density_se = 0.0;
    double intersection = 0.0;
    /// Estimate of intersection - (2 density - 1) and its standard error.
    double margin = 0.0;
    double margin_se = 0.0;
};

/// Checks D_c((W + L + v) cap (W + L)) >= 2 D_c(W + L) - 1 by paired Monte
/// Carlo, allowing `sigmas` standard errors of slack. Skipped unless the
/// covered density is at least 1/2 + 3 sigma.
inline OverlapCheck overlap_inequality_check(const ChainLattice& lattice, std::span<const double> v, std::uint64_t samples,
                                             std::uint64_t seed, double sigmas = 3.0) {
    if (static_cast<int>(v.size()) != lattice.dim()) throw ValidationError("overlap check: shift dimension mismatch");
    if (samples < kMinMeanRateSamples) throw ValidationError("overlap check: need at least 10^4 samples");
    const std::size_t chunks = detail::chunk_count(samples);
    std::vector<std::uint64_t> in_set(chunks, 0), in_both(chunks, 0);
    parallel_chunks(chunks, [&](std::size_t c) {
        std::uint64_t begin = samples * c / chunks, end = samples * (c + 1) / chunks;
        Rng rng = Rng::stream(seed, c);
        std::vector<double> x(v.size()), xs(v.size());
        for (std::uint64_t s = begin; s < end; ++s) {
            lattice.sample_fundamental(rng, x);
            if (!lattice.contains(x)) continue;
            ++in_set[c];
            for (std::size_t j = 0; j < x.size(); ++j) xs[j] = x[j] - v[j];
            if (lattice.contains(xs)) ++in_both[c];
        }
    });
    std::uint64_t a = 0, b = 0;
    for (std::size_t c = 0; c < chunks; ++c) a += in_set[c], b += in_both[c];
    const double ns = static_cast<double>(samples);
    OverlapCheck r;
    r.density = static_cast<double>(a) / ns;
    r.density_se = std::sqrt(r.density * (1.0 - r.density) / ns);
    r.intersection = static_cast<double>(b) / ns;
    // Per-sample margin Y = 1[both] - 2 1[set] + 1 takes the values 0 (both),
    // -1 (set only) and 1 (neither).
    const double p_set_only = static_cast<double>(a - b) / ns;
    const double p_neither = 1.0 - r.density;
    r.margin = p_neither - p_set_only;
    double second = p_neither + p_set_only;
    r.margin_se = std::sqrt(std::max(0.0, second - r.margin * r.margin) / ns);
    if (r.density < 0.5 + 3.0 * r.density_se) {
        r.status = OverlapStatus::Skipped;
        return r;
    }
    r.status = r.margin >= -sigmas * r.margin_se ? OverlapStatus::Holds : OverlapStatus::Violated;
    return r;
}

inline OverlapCheck overlap_inequality_check(const MatrixSeq& seq, std::span<const double> v, std::uint64_t samples,
                                             std::uint64_t seed, double sigmas = 3.0) {
    return overlap_inequality_check(ChainLattice::tilde(seq), v, samples, seed, sigmas);
}

}  // namespace recdyn

#endif  // RECDYN_MODELSET_HPP
