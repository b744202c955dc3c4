#ifndef RECDYN_GRID_HPP
#define RECDYN_GRID_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "recdyn/error.hpp"
#include "recdyn/parallel.hpp"
#include "recdyn/smooth_map.hpp"

namespace recdyn {

/// Half-width of the snapping band around half-integers.
inline constexpr double kHalfIntegerSnap = 0x1.0p-40;

/// The integer k with k - 1/2 < x <= k + 1/2. Values within 2^-40 of a
/// half-integer are snapped onto it first, so ties resolve downwards.
inline double nearest_integer(double x) {
    double h = std::floor(x) + 0.5;
    if (std::abs(x - h) <= kHalfIntegerSnap) x = h;
    return std::ceil(x - 0.5);
}

/// Uniform grid E_N on T^n: points (i_1/N, ..., i_n/N), 0 <= i_j < N.
/// Flat index is row-major with i_1 the most significant digit.
struct GridSpec {
    int dim = 1;
    std::uint64_t order = 1;

    GridSpec() = default;
    GridSpec(int n, std::uint64_t N) : dim(n), order(N) { validate(); }

    void validate() const {
        if (dim < 1) throw ValidationError("grid: dimension must be positive");
        if (order < 1) throw ValidationError("grid: order must be positive");
        long double total = std::pow(static_cast<long double>(order), dim);
        if (total > static_cast<long double>(std::numeric_limits<std::uint32_t>::max()))
            throw ValidationError("grid: N^n exceeds 2^32 - 1 points");
    }

    std::uint64_t size() const {
        std::uint64_t s = 1;
        for (int j = 0; j < dim; ++j) s *= order;
        return s;
    }

    std::vector<std::uint64_t> multi_index(std::uint64_t index) const {
        std::vector<std::uint64_t> m(static_cast<std::size_t>(dim));
        for (int j = dim - 1; j >= 0; --j) {
            m[static_cast<std::size_t>(j)] = index % order;
            index /= order;
        }
        return m;
    }

    std::uint64_t flat_index(std::span<const std::uint64_t> m) const {
        std::uint64_t idx = 0;
        for (auto v : m) idx = idx * order + v;
        return idx;
    }

    /// Coordinates of grid point `index`, written into out (size dim).
    void point(std::uint64_t index, std::span<double> out) const {
        const double n = static_cast<double>(order);
        for (int j = dim - 1; j >= 0; --j) {
            out[static_cast<std::size_t>(j)] = static_cast<double>(index % order) / n;
            index /= order;
        }
    }

    std::vector<double> point(std::uint64_t index) const {
        std::vector<double> p(static_cast<std::size_t>(dim));
        point(index, p);
        return p;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// A point of T^n, coordinates kept in [0,1).
class TorusPoint {
public:
    explicit TorusPoint(std::vector<double> coords) : coords_(std::move(coords)) {
        for (double& c : coords_) c = wrap_unit(c);
    }
    std::span<const double> coords() const { return coords_; }
    int dim() const { return static_cast<int>(coords_.size()); }

private:
    std::vector<double> coords_;
};

/// Grid index of the point nearest x: multi-index P(N x_j) mod N.
/// x may be any lift; it is reduced on the fly.
inline std::uint64_t project(const GridSpec& spec, std::span<const double> x) {
    const double n = static_cast<double>(spec.order);
    std::uint64_t idx = 0;
    for (int j = 0; j < spec.dim; ++j) {
        double k = nearest_integer(n * wrap_unit(x[static_cast<std::size_t>(j)]));
        auto i = static_cast<std::uint64_t>(k);
        if (i >= spec.order) i -= spec.order;
        idx = idx * spec.order + i;
    }
    return idx;
}

inline std::uint64_t project(const GridSpec& spec, const TorusPoint& x) {
    if (x.dim() != spec.dim) throw ValidationError("project: dimension mismatch");
    return project(spec, x.coords());
}

/// Discretization f_N: a total self-map of the grid given by its successor array.
class FiniteMap {
public:
    FiniteMap(GridSpec spec, std::vector<std::uint32_t> succ) : spec_(spec), succ_(std::move(succ)) {
        spec_.validate();
        if (succ_.size() != spec_.size()) throw ValidationError("FiniteMap: successor array has wrong length");
        for (auto s : succ_)
            if (s >= succ_.size()) throw ValidationError("FiniteMap: successor index out of range");
    }

    /// Plain functional graph on |succ| points, viewed as a 1-D grid.
    static FiniteMap from_successors(std::vector<std::uint32_t> succ) {
        GridSpec spec(1, succ.size());
        return FiniteMap(spec, std::move(succ));
    }

    const GridSpec& spec() const { return spec_; }
    std::span<const std::uint32_t> succ() const { return succ_; }
    std::size_t size() const { return succ_.size(); }
    std::uint32_t operator[](std::size_t i) const { return succ_[i]; }

private:
    GridSpec spec_;
    std::vector<std::uint32_t> succ_;
};

/// succ[i] = project(spec, f(point_i)).
inline FiniteMap discretize(const SmoothMap& f, const GridSpec& spec) {
    if (f.dim() != spec.dim) throw ValidationError("discretize: map and grid dimensions differ");
    spec.validate();
    std::vector<std::uint32_t> succ(spec.size());
    parallel_for(succ.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> x(static_cast<std::size_t>(spec.dim)), y(x.size());
        for (std::size_t i = begin; i < end; ++i) {
            spec.point(i, x);
            f.eval(x, y);
            succ[i] = static_cast<std::uint32_t>(project(spec, y));
        }
    });
    return FiniteMap(spec, std::move(succ));
}

namespace detail {
template <class T>
void put_le(std::ostream& os, T v) {
    std::array<char, sizeof(T)> b{};
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    os.write(b.data(), b.size());
}
template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> b{};
    is.read(reinterpret_cast<char*>(b.data()), b.size());
    if (!is) throw ValidationError("FiniteMap dump: truncated file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<T>(v);
}
}  // namespace detail

/// Binary dump: "RDFM", u32 n, u64 N, then N^n little-endian u64 successors.
inline void write_dump(const FiniteMap& map, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os.write("RDFM", 4);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.spec().dim));
    detail::put_le<std::uint64_t>(os, map.spec().order);
    for (auto s : map.succ()) detail::put_le<std::uint64_t>(os, s);
    if (!os) throw ValidationError("write failed: " + path);
}

inline FiniteMap read_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "RDFM") throw ValidationError("FiniteMap dump: bad magic in " + path);
    auto n = detail::get_le<std::uint32_t>(is);
    auto order = detail::get_le<std::uint64_t>(is);
    GridSpec spec(static_cast<int>(n), order);
    std::vector<std::uint32_t> succ(spec.size());
    for (auto& s : succ) {
        auto v = detail::get_le<std::uint64_t>(is);
        if (v >= succ.size()) throw ValidationError("FiniteMap dump: successor out of range");
        s = static_cast<std::uint32_t>(v);
    }
    return FiniteMap(spec, std::move(succ));
}

}  // namespace recdyn

#endif  // RECDYN_GRID_HPP
