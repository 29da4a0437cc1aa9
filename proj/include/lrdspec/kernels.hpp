#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrdspec/errors.hpp"

namespace lrdspec {

/// Bounded, symmetric probability kernel. `support_bound` is the radius beyond
/// which K is treated as zero by every numerical routine (exact for compact
/// kernels; 10 for the Gaussian, where K(10)/K(0) < 1e-21). `tail_beta` is the
/// declared exponent with K(x) = O(1/(1+|x|^{1-beta})).
struct KernelSpec {
    enum class Kind { gaussian, epanechnikov, custom };

    Kind kind = Kind::gaussian;
    std::string name = "gaussian";
    std::function<double(double)> evaluator;
    double support_bound = 10.0;
    double tail_beta = 0.0;

    static KernelSpec gaussian();
    static KernelSpec epanechnikov();
    /// `name` identifies the kernel in the constants cache, so it must be unique per evaluator.
    static KernelSpec custom(std::string name, std::function<double(double)> evaluator, double support_bound,
                             double tail_beta);

    [[nodiscard]] double operator()(double x) const;
};

[[nodiscard]] double eval(const KernelSpec& spec, double x);

/// Parses "gaussian" | "epanechnikov".
[[nodiscard]] KernelSpec kernel_from_name(const std::string& name);

/// Integral of K over the real line (should be 1).
[[nodiscard]] double kernel_mass(const KernelSpec& spec, double rel_tol = 1e-10);
/// Integral of K^2.
[[nodiscard]] double kernel_k2(const KernelSpec& spec, double rel_tol = 1e-10);
/// Integral of x^2 K(x).
[[nodiscard]] double kernel_second_moment(const KernelSpec& spec, double rel_tol = 1e-10);

/// Integrand of A_alpha before integration over (x, y, z):
/// x^{-a} y^{-a} [K(z) K(x+y-z) + K(z-x) K(z-y)].
[[nodiscard]] double a_alpha_integrand(const KernelSpec& spec, double alpha, double x, double y, double z);

struct KernelConstants {
    std::string kernel;
    double k2_integral = 0.0;
    double delta0 = 0.0;
    double a_alpha = 0.0;
    double a_alpha_star = 0.0;
    double alpha_used = 0.0;
    std::size_t n_used = 0;
    double quadrature_tolerance = 0.0;
    // Relative error estimates.
    double delta0_error = 0.0;
    double a_alpha_error = 0.0;
    double a_alpha_star_error = 0.0;
};

class QuadratureError : public NumericalError {
public:
    QuadratureError(const std::string& what, double partial, double error)
        : NumericalError(what), partial_(partial), error_(error) {}
    [[nodiscard]] double partial_estimate() const noexcept { return partial_; }
    [[nodiscard]] double error_estimate() const noexcept { return error_; }

private:
    double partial_;
    double error_;
};

/// Delta_0 = int_0^inf x^{-alpha} K(x) dx, any 0 < alpha < 1.
[[nodiscard]] double kernel_delta0(const KernelSpec& spec, double alpha, double rel_tol = 1e-8);

/// A_alpha over (0, inf)^3 when n == 0, or A*_alpha with every limit in [1/n, n].
/// Requires 1/2 < alpha < 1. Throws QuadratureError if the error estimate exceeds tol.
[[nodiscard]] double kernel_a_alpha(const KernelSpec& spec, double alpha, std::size_t n, double tol,
                                    double* error_estimate = nullptr);

/// All constants for (kernel, alpha, n); cached per (kernel name, alpha rounded to
/// 1e-6, n, tol). Safe to call concurrently.
[[nodiscard]] KernelConstants compute_constants(const KernelSpec& spec, double alpha, std::size_t n,
                                                double tol = 1e-4);

/// A*_alpha(n) for a fixed (kernel, n) across an alpha interval, for callers
/// that need it at many estimated alphas. Nodes are spaced at most 0.01 apart;
/// log A* is interpolated by a 4-point Lagrange stencil.
class AStarTable {
public:
    AStarTable(const KernelSpec& spec, std::size_t n, double alpha_lo, double alpha_hi, double tol = 1e-6,
               unsigned threads = 1);

    [[nodiscard]] double operator()(double alpha) const;
    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] double alpha_lo() const noexcept { return lo_; }
    [[nodiscard]] double alpha_hi() const noexcept { return hi_; }
    [[nodiscard]] const std::string& kernel() const noexcept { return kernel_; }
    [[nodiscard]] std::size_t node_count() const noexcept { return log_values_.size(); }

private:
    std::string kernel_;
    std::size_t n_;
    double lo_, hi_, step_;
    std::vector<double> log_values_;
};

}  // namespace lrdspec
