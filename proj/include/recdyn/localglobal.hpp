#ifndef RECDYN_LOCALGLOBAL_HPP
#define RECDYN_LOCALGLOBAL_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "recdyn/error.hpp"
#include "recdyn/lindisc.hpp"
#include "recdyn/modelset.hpp"
#include "recdyn/parallel.hpp"
#include "recdyn/rng.hpp"
#include "recdyn/smooth_map.hpp"

namespace recdyn {

/// Derivatives Df_x, Df_{f(x)}, ..., Df_{f^{k-1}(x)} along an orbit.
struct Cocycle {
    std::vector<double> base;
    std::size_t k = 0;
    std::vector<Eigen::MatrixXd> mats;

    MatrixSeq sequence() const { return MatrixSeq(mats); }
};

inline Cocycle cocycle(const SmoothMap& f, std::span<const double> x, std::size_t k) {
    if (k < 1) throw ValidationError("cocycle: k must be >= 1");
    if (static_cast<int>(x.size()) != f.dim()) throw ValidationError("cocycle: dimension mismatch");
    Cocycle c;
    c.base.assign(x.begin(), x.end());
    c.k = k;
    std::vector<double> p = c.base;
    for (auto& v : p) v = wrap_unit(v);
    for (std::size_t i = 0; i < k; ++i) {
        c.mats.push_back(f.jacobian(p));
        if (i + 1 < k) p = f.on_torus(p);
    }
    return c;
}

struct TauIntegral {
    double estimate = 0.0;
    double std_error = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t mc_per_point = 0;
};

/// Integral over the torus of the mean rate of the derivative cocycle.
/// Base points are drawn uniformly; the standard error is the spread of the
/// per-point estimates, which includes the inner Monte Carlo noise.
inline TauIntegral tau_k_integral(const SmoothMap& f, std::size_t k, std::uint64_t samples, std::uint64_t mc_per_point,
                                  std::uint64_t seed) {
    if (samples < 32) throw ValidationError("tau_k_integral: need at least 32 base points");
    if (mc_per_point < kMinMeanRateSamples) throw ValidationError("tau_k_integral: need at least 10^4 samples per point");
    std::vector<double> vals(samples);
    parallel_chunks(samples, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, 2 * i);
        std::vector<double> x(static_cast<std::size_t>(f.dim()));
        for (auto& v : x) v = rng.uniform();
        vals[i] = mean_rate(cocycle(f, x, k).sequence(), mc_per_point, splitmix64(seed) ^ (2 * i + 1)).estimate;
    });
    TauIntegral r;
    r.samples = samples;
    r.mc_per_point = mc_per_point;
    double s = 0.0, s2 = 0.0;
    for (double v : vals) s += v, s2 += v * v;
    const double n = static_cast<double>(samples);
    r.estimate = s / n;
    r.std_error = std::sqrt(std::max(0.0, (s2 - n * r.estimate * r.estimate) / (n - 1.0)) / n);
    return r;
}

}  // namespace recdyn

#endif  // RECDYN_LOCALGLOBAL_HPP
