#ifndef RECDYN_SMOOTH_MAP_HPP
#define RECDYN_SMOOTH_MAP_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "recdyn/error.hpp"

namespace recdyn {

/// Reduces a real number into [0, 1).
inline double wrap_unit(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

/// A map of the torus T^n given on the lift R^n, with its analytic Jacobian.
/// eval writes f(x) unreduced; callers reduce mod 1 when they need torus points.
class SmoothMap {
public:
    using Eval = std::function<void(std::span<const double>, std::span<double>)>;
    using Jacobian = std::function<Eigen::MatrixXd(std::span<const double>)>;

    SmoothMap(std::string name, int dim, Eval eval, Jacobian jacobian, bool conservative)
        : name_(std::move(name)),
          dim_(dim),
          eval_(std::move(eval)),
          jacobian_(std::move(jacobian)),
          conservative_(conservative) {
        if (dim_ < 1) throw ValidationError("SmoothMap: dimension must be positive");
    }

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    bool conservative() const { return conservative_; }

    void eval(std::span<const double> x, std::span<double> out) const { eval_(x, out); }

    std::vector<double> operator()(std::span<const double> x) const {
        std::vector<double> out(static_cast<std::size_t>(dim_));
        eval_(x, out);
        return out;
    }

    /// f(x) reduced into [0,1)^n.
    std::vector<double> on_torus(std::span<const double> x) const {
        auto y = (*this)(x);
        for (double& v : y) v = wrap_unit(v);
        return y;
    }

    Eigen::MatrixXd jacobian(std::span<const double> x) const { return jacobian_(x); }

private:
    std::string name_;
    int dim_;
    Eval eval_;
    Jacobian jacobian_;
    bool conservative_;
};

namespace maps {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline SmoothMap identity(int dim) {
    return SmoothMap(
        "identity", dim,
        [](std::span<const double> x, std::span<double> y) {
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i];
        },
        [dim](std::span<const double>) { return Eigen::MatrixXd::Identity(dim, dim).eval(); }, true);
}

inline SmoothMap translation(std::vector<double> shift) {
    int dim = static_cast<int>(shift.size());
    return SmoothMap(
        "translation", dim,
        [shift](std::span<const double> x, std::span<double> y) {
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + shift[i];
        },
        [dim](std::span<const double>) { return Eigen::MatrixXd::Identity(dim, dim).eval(); }, true);
}

/// Linear toral automorphism given by an integer matrix.
inline SmoothMap linear(const Eigen::MatrixXd& a, std::string name = "linear") {
    if (a.rows() != a.cols()) throw ValidationError("linear map: matrix must be square");
    int dim = static_cast<int>(a.rows());
    bool conservative = std::abs(std::abs(a.determinant()) - 1.0) <= 1e-9;
    return SmoothMap(
        std::move(name), dim,
        [a](std::span<const double> x, std::span<double> y) {
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                double s = 0.0;
                for (Eigen::Index j = 0; j < a.cols(); ++j) s += a(i, j) * x[static_cast<std::size_t>(j)];
                y[static_cast<std::size_t>(i)] = s;
            }
        },
        [a](std::span<const double>) { return a; }, conservative);
}

/// Arnold's cat map (x, y) -> (2x + y, x + y).
inline SmoothMap cat() {
    Eigen::MatrixXd a(2, 2);
    a << 2, 1, 1, 1;
    return linear(a, "cat");
}

/// Trigonometric polynomial sum_j c_j * trig_j(2 pi m_j t), with its derivative.
struct TrigPoly {
    struct Term {
        double coeff;
        double freq;
        bool is_sin;
    };
    std::vector<Term> terms;

    double operator()(double t) const {
        double s = 0.0;
        for (const auto& term : terms) {
            double a = kTwoPi * term.freq * t;
            s += term.coeff * (term.is_sin ? std::sin(a) : std::cos(a));
        }
        return s;
    }
    double derivative(double t) const {
        double s = 0.0;
        for (const auto& term : terms) {
            double w = kTwoPi * term.freq;
            double a = w * t;
            s += term.coeff * w * (term.is_sin ? std::cos(a) : -std::sin(a));
        }
        return s;
    }
};

/// Composition Q o P of the vertical shear P(x,y) = (x, y + p(x)) and the
/// horizontal shear Q(x,y) = (x + q(y), y). Area-preserving for any p, q.
inline SmoothMap shear_pair(std::string name, TrigPoly p, TrigPoly q) {
    return SmoothMap(
        std::move(name), 2,
        [p, q](std::span<const double> x, std::span<double> out) {
            double y = x[1] + p(x[0]);
            out[0] = x[0] + q(y);
            out[1] = y;
        },
        [p, q](std::span<const double> x) {
            double dp = p.derivative(x[0]);
            double dq = q.derivative(x[1] + p(x[0]));
            Eigen::MatrixXd j(2, 2);
            j << 1.0 + dq * dp, dq, dp, 1.0;
            return j;
        },
        true);
}

/// The conservative diffeomorphism used in the degree-of-recurrence experiments.
inline SmoothMap paper_diffeo() {
    TrigPoly p{{{1.0 / 209, 17, false}, {1.0 / 271, 27, true}, {-1.0 / 703, 35, false}}};
    TrigPoly q{{{1.0 / 287, 15, false}, {1.0 / 203, 27, true}, {-1.0 / 841, 38, true}}};
    return shear_pair("paper-diffeo", std::move(p), std::move(q));
}

/// Q o P with single-mode shears p(x) = a sin(2 pi x), q(y) = b sin(2 pi y).
inline SmoothMap sine_shears(double a, double b) {
    return shear_pair("shear", TrigPoly{{{a, 1, true}}}, TrigPoly{{{b, 1, true}}});
}

/// paper_diffeo composed after the coordinatewise circle diffeomorphism
/// t -> t + c sin(2 pi t) / (2 pi), |c| < 1. Not area-preserving for c != 0.
inline SmoothMap dissipative_diffeo(double c) {
    if (!(std::abs(c) < 1.0)) throw ValidationError("dissipative-diffeo: need |c| < 1");
    SmoothMap inner = paper_diffeo();
    auto squeeze = [c](double t) { return t + c * std::sin(kTwoPi * t) / kTwoPi; };
    auto dsqueeze = [c](double t) { return 1.0 + c * std::cos(kTwoPi * t); };
    return SmoothMap(
        "dissipative-diffeo", 2,
        [inner, squeeze](std::span<const double> x, std::span<double> out) {
            double z[2] = {squeeze(x[0]), squeeze(x[1])};
            inner.eval(z, out);
        },
        [inner, squeeze, dsqueeze](std::span<const double> x) {
            double z[2] = {squeeze(x[0]), squeeze(x[1])};
            Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
            d(0, 0) = dsqueeze(x[0]);
            d(1, 1) = dsqueeze(x[1]);
            return (inner.jacobian(z) * d).eval();
        },
        c == 0.0);
}

}  // namespace maps
}  // namespace recdyn

#endif  // RECDYN_SMOOTH_MAP_HPP
