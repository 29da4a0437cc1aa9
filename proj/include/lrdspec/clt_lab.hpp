#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrdspec/kernels.hpp"
#include "lrdspec/lrd_core.hpp"
#include "lrdspec/spec_test.hpp"

namespace lrdspec {

enum class LabTheorem { t23_normal, t23_chisq, t24 };

[[nodiscard]] const char* to_string(LabTheorem t) noexcept;
/// "t23-normal" | "t23-chisq" | "t24".
[[nodiscard]] LabTheorem lab_theorem_from_name(const std::string& name);

/// h either given outright or as h = n^{-exponent}.
struct BandwidthRule {
    enum class Kind { explicit_value, rate };
    Kind kind = Kind::rate;
    double value = 0.4;

    static BandwidthRule explicit_h(double h) { return {Kind::explicit_value, h}; }
    static BandwidthRule rate(double exponent) { return {Kind::rate, exponent}; }

    [[nodiscard]] double h(std::size_t n) const;
    /// -log h / log n; equals `value` for a rate rule.
    [[nodiscard]] double exponent(std::size_t n) const;
};

struct LabSpec {
    LabTheorem theorem = LabTheorem::t24;
    std::size_t n = 400;
    BandwidthRule h_rule = BandwidthRule::rate(0.4);
    double alpha = 0.75;
    std::size_t replications = 300;
    std::uint64_t seed = 0;
    LadderShape shape = LadderShape::fractional;
    double scale = 1.0;  // ladder constant c
    InnovationDist innovation = InnovationDist::standard_normal();
    KernelSpec kernel = KernelSpec::gaussian();
    std::size_t j_max = 0;  // 0: default_j_max(n)
    unsigned threads = 1;

    /// Checks the counts and that the h-rule exponent p (h = n^{-p}) lies in the
    /// theorem's regime: t23-normal needs 2(1-alpha) < p < 1, t23-chisq
    /// 0 < p < 2(1-alpha), t24 0 < p < 1 with 1/2 < alpha < 1.
    void validate() const;
};

struct LawDistance {
    double ks_statistic = 0.0;
    std::size_t sample_size = 0;
    ReferenceLaw target = ReferenceLaw::standard_normal;
    double h = 0.0;
    double sigma = 0.0;  // population normalization
    std::vector<double> sample;
};

/// Kolmogorov-Smirnov distance sup |F_m - F| of a sample to the reference law.
[[nodiscard]] double ks_distance(std::vector<double> sample, ReferenceLaw target);
[[nodiscard]] double reference_cdf(ReferenceLaw target, double x);

/// The normalized quadratic form of one lab, with its population normalization:
///   t23-normal  sum_{s!=t} e_s K((X_s-X_t)/h) e_t / sigma_1n,
///               sigma_1n^2 = 2 n^2 h gamma(0)^2 int K^2 int f^2;
///   t23-chisq   the same form / sigma_2n, sigma_2n = n^{2-alpha} h 2 eta int f^2 / ((1-alpha)(2-alpha));
///   t24         sum_{s!=t} K((s-t)/(nh)) (e_s e_t - gamma(s-t)) / sigma_3n,
///               sigma_3n^2 = 8 eta^2 n (nh)^{3-2 alpha} A_alpha.
/// The design for t23 is i.i.d. U(0,1), so int f^2 = 1.
class LabStatistic {
public:
    explicit LabStatistic(const LabSpec& spec);

    /// `x` is ignored for t24.
    [[nodiscard]] double operator()(std::span<const double> e, std::span<const double> x = {}) const;

    [[nodiscard]] double h() const noexcept { return h_; }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] ReferenceLaw target() const noexcept;
    [[nodiscard]] const CoefficientLadder& ladder() const noexcept { return ladder_; }
    /// True autocovariances gamma(0..n-1) of the truncated ladder.
    [[nodiscard]] const std::vector<double>& gamma() const noexcept { return gamma_; }

private:
    LabSpec spec_;
    CoefficientLadder ladder_;
    std::vector<double> gamma_;
    double h_ = 0.0;
    double sigma_ = 0.0;
};

[[nodiscard]] LawDistance run_lab(const LabSpec& spec);

struct MomentCheck {
    double closed_form = 0.0;
    double mc_estimate = 0.0;
    double standard_error = 0.0;
    double z_score = 0.0;
};

/// E[e_j e_k e_s e_t] = (E eta^4 - 3) sum_m psi_{j-m} psi_{k-m} psi_{s-m} psi_{t-m}
///   + gamma(j-k) gamma(s-t) + gamma(j-s) gamma(k-t) + gamma(j-t) gamma(k-s),
/// exact for the truncated ladder.
[[nodiscard]] double fourth_moment_closed_form(const CoefficientLadder& ladder, const std::array<long, 4>& idx,
                                               double innovation_fourth_moment);

/// Closed form against a Monte Carlo average over `replications` seeded paths.
[[nodiscard]] MomentCheck moment_oracle(const CoefficientLadder& ladder, const std::array<long, 4>& idx,
                                        const InnovationDist& dist, std::size_t replications, std::uint64_t seed = 0,
                                        unsigned threads = 1);

}  // namespace lrdspec
