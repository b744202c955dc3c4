#ifndef RECDYN_FUNCGRAPH_HPP
#define RECDYN_FUNCGRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "recdyn/error.hpp"
#include "recdyn/grid.hpp"

namespace recdyn {

/// Exact ratio of two counts.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

namespace detail {

/// Kahn-style peeling: repeatedly drop points nobody maps to. Returns the
/// peeled points in removal order; on return in_degree[i] > 0 iff i is recurrent.
inline std::vector<std::uint32_t> peel(const FiniteMap& sigma, std::vector<std::uint32_t>& in_degree) {
    auto succ = sigma.succ();
    in_degree.assign(succ.size(), 0);
    for (auto s : succ) ++in_degree[s];
    std::vector<std::uint32_t> order;
    for (std::uint32_t i = 0; i < succ.size(); ++i)
        if (in_degree[i] == 0) order.push_back(i);
    for (std::size_t head = 0; head < order.size(); ++head) {
        std::uint32_t s = succ[order[head]];
        if (--in_degree[s] == 0) order.push_back(s);
    }
    return order;
}

}  // namespace detail

/// Membership mask of Omega(sigma), the union of the periodic orbits.
inline std::vector<bool> recurrent_mask(const FiniteMap& sigma) {
    std::vector<std::uint32_t> in_degree;
    detail::peel(sigma, in_degree);
    std::vector<bool> mask(sigma.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = in_degree[i] > 0;
    return mask;
}

/// Sorted indices of the points lying on a cycle of sigma.
inline std::vector<std::uint32_t> recurrent_set(const FiniteMap& sigma) {
    auto mask = recurrent_mask(sigma);
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(i);
    return out;
}

inline Ratio degree_of_recurrence_exact(const FiniteMap& sigma) {
    std::vector<std::uint32_t> in_degree;
    auto peeled = detail::peel(sigma, in_degree);
    return {sigma.size() - peeled.size(), sigma.size()};
}

/// D(sigma) = |Omega(sigma)| / |E|.
inline double degree_of_recurrence(const FiniteMap& sigma) { return degree_of_recurrence_exact(sigma).value(); }

/// |sigma^t(E)| / |E| by t successive image passes over a membership array.
inline Ratio rate_of_injectivity_t_exact(const FiniteMap& sigma, unsigned t) {
    if (t < 1) throw ValidationError("rate_of_injectivity_t: t must be >= 1");
    auto succ = sigma.succ();
    std::vector<char> cur(succ.size(), 1), next(succ.size());
    std::uint64_t count = succ.size();
    for (unsigned step = 0; step < t; ++step) {
        std::fill(next.begin(), next.end(), 0);
        for (std::size_t i = 0; i < succ.size(); ++i)
            if (cur[i]) next[succ[i]] = 1;
        std::uint64_t c = static_cast<std::uint64_t>(std::count(next.begin(), next.end(), 1));
        cur.swap(next);
        if (c == count) break;  // image is stable from here on
        count = c;
    }
    return {count, succ.size()};
}

inline double rate_of_injectivity_t(const FiniteMap& sigma, unsigned t) {
    return rate_of_injectivity_t_exact(sigma, t).value();
}

struct RecurrenceReport {
    std::uint64_t card_E = 0;
    std::uint64_t card_recurrent = 0;
    double degree = 0.0;
    /// tau_by_t[t-1] = tau^t for t = 1..t_max.
    std::vector<double> tau_by_t;
    /// min{t >= 0 : sigma^t(E) = Omega}.
    std::uint64_t stabilization_time = 0;
    std::uint64_t cycle_count = 0;
};

/// Degree of recurrence, tau^1..tau^t_max, stabilization time and number of
/// cycles, all in O(|E|).
///
/// A transient point y belongs to sigma^t(E) iff the longest backward chain
/// ending at y has length >= t; that length is propagated along the peeling
/// order, in which every point comes after all of its preimages.
inline RecurrenceReport analyze(const FiniteMap& sigma, unsigned t_max = 64) {
    auto succ = sigma.succ();
    std::vector<std::uint32_t> in_degree;
    auto peeled = detail::peel(sigma, in_degree);

    RecurrenceReport r;
    r.card_E = succ.size();
    r.card_recurrent = succ.size() - peeled.size();
    r.degree = static_cast<double>(r.card_recurrent) / static_cast<double>(r.card_E);

    std::vector<std::uint32_t> chain(succ.size(), 0);
    std::uint32_t longest = 0;
    for (auto x : peeled) {
        std::uint32_t s = succ[x];
        if (in_degree[s] == 0) chain[s] = std::max(chain[s], chain[x] + 1);
        longest = std::max(longest, chain[x]);
    }
    r.stabilization_time = peeled.empty() ? 0 : std::uint64_t{longest} + 1;

    std::vector<std::uint64_t> at_least(std::size_t{longest} + 2, 0);
    for (auto x : peeled) ++at_least[chain[x]];
    for (std::size_t i = at_least.size() - 1; i-- > 0;) at_least[i] += at_least[i + 1];
    r.tau_by_t.resize(t_max);
    for (unsigned t = 1; t <= t_max; ++t) {
        std::uint64_t transient = t < at_least.size() ? at_least[t] : 0;
        r.tau_by_t[t - 1] = static_cast<double>(r.card_recurrent + transient) / static_cast<double>(r.card_E);
    }

    std::vector<char> seen(succ.size(), 0);
    for (std::uint32_t i = 0; i < succ.size(); ++i) {
        if (in_degree[i] == 0 || seen[i]) continue;
        ++r.cycle_count;
        for (std::uint32_t j = i; !seen[j]; j = succ[j]) seen[j] = 1;
    }
    return r;
}

}  // namespace recdyn

#endif  // RECDYN_FUNCGRAPH_HPP
