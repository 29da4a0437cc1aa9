#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "lrdspec/errors.hpp"
#include "lrdspec/lrd_core.hpp"

namespace lrdspec {

/// I(w_j) = |sum_s u_s e^{i s w_j}|^2 / (2 pi n) at w_j = 2 pi j / n, j = 1..floor((n-1)/2).
struct Periodogram {
    std::size_t n = 0;
    std::vector<double> frequencies;
    std::vector<double> values;
};

[[nodiscard]] Periodogram periodogram(std::span<const double> u);
/// Ordinates at all n Fourier bins j = 0..n-1 (for the Parseval check).
[[nodiscard]] std::vector<double> periodogram_all_bins(std::span<const double> u);

/// Spectral density families psi_e(w; alpha, eta), both linear in eta.
///  power_sine:   c_f |2 sin(w/2)|^{alpha-1}, c_f = eta / (2 Gamma(alpha) cos(pi alpha / 2)).
///  power_ladder: (c^2 / 2 pi) |Li_b(e^{iw})|^2, b = (1+alpha)/2, c^2 = eta / B((1-alpha)/2, alpha),
///                the exact spectrum of the one-sided power ladder.
enum class SpectralForm { power_sine, power_ladder };

[[nodiscard]] const char* to_string(SpectralForm form) noexcept;
[[nodiscard]] SpectralForm spectral_form_from_name(const std::string& name);

[[nodiscard]] double spectral_constant(const LrdParams& lambda);

/// Polylogarithm Li_s(e^{iw}) for 0 < s < 1, 0 < w <= pi.
[[nodiscard]] std::complex<double> polylog_unit_circle(double s, double w);

/// psi_e(w; lambda) / eta at each frequency.
[[nodiscard]] std::vector<double> spectral_shape(SpectralForm form, double alpha, std::span<const double> freqs);
[[nodiscard]] double spectral_density(SpectralForm form, double w, const LrdParams& lambda);

/// (1/4 pi) int (log psi + I/psi) dw as the symmetric Riemann sum over +-w_j:
/// (1/n) sum_j [log psi(w_j) + I(w_j)/psi(w_j)].
[[nodiscard]] double whittle_objective(const Periodogram& pg, const LrdParams& lambda,
                                       SpectralForm form = SpectralForm::power_sine);

struct WhittleConfig {
    double alpha_lo = 0.55;
    double alpha_hi = 0.95;
    double eta_lo = 0.05;
    double eta_hi = 10.0;
    std::size_t grid_points = 25;
    double refine_tolerance = 1e-5;
    SpectralForm form = SpectralForm::power_sine;

    void validate() const;
};

struct WhittleResult {
    LrdParams lambda;
    double objective = 0.0;
    LrdParams grid_best;
    double grid_objective = 0.0;
    std::size_t grid_points = 0;
    bool refined = false;  // the simplex improved on the best grid point
    bool eta_clamped = false;
    std::size_t evaluations = 0;
};

/// Grid search over the box (eta log-spaced), then a bounded Nelder-Mead
/// refinement in (alpha, log eta). Throws NumericalError for degenerate input.
[[nodiscard]] WhittleResult estimate(std::span<const double> u, const WhittleConfig& config = {});
[[nodiscard]] WhittleResult estimate(const Periodogram& pg, const WhittleConfig& config = {});

}  // namespace lrdspec
