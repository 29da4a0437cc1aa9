#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrdspec/kernels.hpp"
#include "lrdspec/lrd_core.hpp"
#include "lrdspec/spec_test.hpp"
#include "lrdspec/whittle.hpp"

namespace lrdspec {

/// Data-generating truth on the fixed design x_t = t/n:
/// Y_t = a + b x_t + g x_t^2 + e_t, e_t from the ladder c j^{-(1+alpha)/2} (c = sqrt(alpha)).
struct DesignTruth {
    double alpha = 0.75;
    double intercept = 1.0;
    double slope = 1.0;
    double quadratic = 0.0;
    LadderShape shape = LadderShape::power;
    InnovationDist innovation = InnovationDist::standard_normal();
    std::size_t j_max = 0;  // 0: 50 n

    static DesignTruth null_linear(double alpha = 0.75);
    /// Quadratic alternative with g = n^{-1/2} sqrt(log log n).
    static DesignTruth quadratic_alternative(std::size_t n, double alpha = 0.75);
    [[nodiscard]] static double alternative_coefficient(std::size_t n);

    [[nodiscard]] Dataset generate(std::size_t n, std::uint64_t seed) const;
};

/// Reusable generator for one truth at one n (the ladder FFT is built once).
class DesignSampler {
public:
    DesignSampler(DesignTruth truth, std::size_t n);
    [[nodiscard]] Dataset draw(std::uint64_t seed) const;
    [[nodiscard]] const DesignTruth& truth() const noexcept { return truth_; }

private:
    DesignTruth truth_;
    std::vector<double> x_;
    LadderGenerator gen_;
};

/// Everything needed to turn a fixed-design dataset into L^_3n on a bandwidth
/// grid: fit the null model, estimate lambda~ by Whittle from the residuals,
/// then evaluate every h from one set of lag products.
struct L3nPipeline {
    std::size_t n = 0;
    ModelKind model = ModelKind::linear;
    KernelSpec kernel = KernelSpec::gaussian();
    WhittleConfig whittle;
    std::shared_ptr<const AStarTable> a_star;

    /// Builds the A* table over the Whittle alpha box.
    static L3nPipeline make(std::size_t n, ModelKind model = ModelKind::linear,
                            KernelSpec kernel = KernelSpec::gaussian(), WhittleConfig whittle = {},
                            unsigned threads = 1);
};

struct GridStatistics {
    ParametricModel fitted;
    std::vector<double> residuals;
    double sigma2 = 0.0;  // (1/n) sum residual^2
    LrdParams lambda;
    std::vector<double> h;
    std::vector<double> values;
};

/// `lambda` overrides the Whittle estimate when given.
[[nodiscard]] GridStatistics l3n_on_grid(const L3nPipeline& pipe, const Dataset& data, std::span<const double> h_grid,
                                         std::optional<LrdParams> lambda = std::nullopt);

enum class BootstrapMethod { parametric_41, block_42 };

[[nodiscard]] const char* to_string(BootstrapMethod m) noexcept;
/// Accepts "41" | "parametric" | "42" | "block".
[[nodiscard]] BootstrapMethod bootstrap_method_from_name(const std::string& name);

struct BootstrapConfig {
    BootstrapMethod method = BootstrapMethod::parametric_41;
    std::size_t M = 250;  // ensemble size
    std::size_t J = 250;  // block resamples averaged per draw (method 42)
    InnovationDist innovation = InnovationDist::normalized_chi_squared();
    /// Method 41 ladder side; two_sided_no_zero sums c |j|^{-(1+alpha)/2} over all j != 0.
    LadderSide side = LadderSide::one_sided;
    std::size_t j_max = 0;  // 0: 50 n
    std::uint64_t base_seed = 0;
    unsigned threads = 1;

    void validate() const;
};

struct CriticalValue {
    double r = 0.05;
    double l_star = 0.0;
    std::vector<double> ensemble;
    double h = 0.0;
};

/// Empirical (1-r) quantile: the ceil((1-r) M)-th order statistic, so
/// P*(L* >= l*) is r up to 1/M; r = 0 gives +inf.
[[nodiscard]] double upper_quantile(std::span<const double> sample, double r);

/// Overlapping-block bootstrap of a template ladder series (c = sqrt(alpha~),
/// N(0,1) innovations): l = floor(n^{1/3}), ceil(n/l) blocks drawn uniformly from
/// the N = n - l + 1 starts and tiled to length n, J draws averaged pointwise.
/// With sigma_tilde the average is rescaled to sample variance sigma_tilde^2.
class BlockResampler {
public:
    BlockResampler(double alpha, std::size_t n, std::size_t j_max = 0);
    /// The template that draw(..., seed) resamples.
    [[nodiscard]] std::vector<double> template_series(std::uint64_t seed) const;
    [[nodiscard]] std::vector<double> draw(std::optional<double> sigma_tilde, std::size_t J,
                                           std::uint64_t seed) const;

private:
    std::size_t n_;
    LadderGenerator gen_;
};

[[nodiscard]] std::vector<double> block_resample(const LrdParams& lambda_tilde, std::optional<double> sigma_tilde,
                                                 std::size_t n, std::size_t J, std::uint64_t seed,
                                                 std::size_t j_max = 0);
[[nodiscard]] std::size_t block_length(std::size_t n);

/// Bootstrap errors e* for one ensemble; member m uses derive_seed(base_seed, {m}).
/// Method 41 draws from the ladder at alpha~ scaled so that sum psi*^2 = sigma~^2;
/// method 42 block-resamples and rescales to sigma~^2.
class BootstrapErrorSource {
public:
    BootstrapErrorSource(const LrdParams& lambda_tilde, double sigma2_tilde, std::size_t n,
                         const BootstrapConfig& config);
    [[nodiscard]] std::vector<double> draw(std::size_t member) const;

private:
    BootstrapConfig config_;
    double sigma2_;
    std::optional<LadderGenerator> ladder_;
    std::optional<BlockResampler> blocks_;
};

/// Bootstrap ensemble of L^*_3n on a bandwidth grid: values[h index][member].
/// Each member regenerates e*, rebuilds Y* = m_theta~(x) + e*, refits and
/// re-estimates lambda~* before evaluating the statistic.
struct BootstrapEnsemble {
    std::vector<double> h;
    std::vector<std::vector<double>> values;
};

[[nodiscard]] BootstrapEnsemble bootstrap_ensemble(const L3nPipeline& pipe, const ParametricModel& fitted,
                                                   const LrdParams& lambda_tilde, double sigma2_tilde,
                                                   std::span<const double> h_grid, const BootstrapConfig& config);

[[nodiscard]] CriticalValue bootstrap_critical_value(const L3nPipeline& pipe, const Dataset& data,
                                                     const LrdParams& lambda_tilde, double h, double r,
                                                     const BootstrapConfig& config);

/// A truth paired with the replication counts for nested Monte Carlo.
struct RejectionRates {
    std::vector<double> h;
    std::vector<double> rate;  // per h
    std::vector<double> standard_error;
    std::size_t replications = 0;
};

/// Frequency of L^_3n(h) > l*_r(h) over outer replications drawn from `truth`;
/// every replication runs its own bootstrap ensemble. Seeds are counter based on
/// (config.base_seed, stream, replication).
[[nodiscard]] RejectionRates rejection_rates(const L3nPipeline& pipe, const DesignTruth& truth,
                                             std::span<const double> h_grid, double r, std::size_t outer_reps,
                                             const BootstrapConfig& config, std::uint64_t stream = 0);

struct SizePower {
    double gamma = 0.0;
    double beta = 0.0;
    double gamma_se = 0.0;
    double beta_se = 0.0;
    /// sqrt(se_gamma^2 + se_beta^2), for comparing the two independent estimates.
    [[nodiscard]] double joint_se() const;
};

[[nodiscard]] double binomial_se(double p, std::size_t reps);

[[nodiscard]] SizePower size_power(const L3nPipeline& pipe, double h, const DesignTruth& null_truth,
                                   const DesignTruth& alt_truth, double r, std::size_t outer_reps,
                                   const BootstrapConfig& config);

struct BandwidthSearch {
    std::vector<double> grid;
    double r = 0.05;
    double epsilon = 0.025;
    std::vector<double> gamma_n;
    std::vector<double> beta_n;
    std::vector<std::size_t> admissible;  // indices of H_n
    std::size_t selected = 0;
    double h_test = 0.0;
};

class EmptyAdmissibleSet : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// argmax of beta over H_n = {h : r - eps < gamma(h) < r + eps}; ties go to the
/// smaller h. Throws EmptyAdmissibleSet when no h qualifies.
[[nodiscard]] BandwidthSearch select_h_from_curves(std::span<const double> grid, std::span<const double> gamma_n,
                                                   std::span<const double> beta_n, double r, double epsilon);

[[nodiscard]] BandwidthSearch select_h_test(const L3nPipeline& pipe, std::span<const double> grid, double r,
                                            double epsilon, const DesignTruth& null_truth,
                                            const DesignTruth& alt_truth, std::size_t outer_reps,
                                            const BootstrapConfig& config);

/// Default h_test grid: `points` geometric values on [n^{-0.8}, n^{-0.2}].
[[nodiscard]] std::vector<double> default_test_grid(std::size_t n, std::size_t points = 8);

struct CvConfig {
    double c0 = 0.05;
    double c1 = 0.1;
    double c2 = 2.0;
    std::size_t points = 30;
};

struct CvSearch {
    std::vector<double> grid;
    std::vector<double> scores;  // +inf where some deletion left no kernel mass
    std::size_t selected = 0;
    double h_cv = 0.0;
};

/// Leave-one-out Nadaraya-Watson score (1/n) sum (Y_t - m^_{-t}(X_t, h))^2.
[[nodiscard]] double cv_score(const Dataset& data, double h, const KernelSpec& kernel = KernelSpec::gaussian());

/// Minimizes cv_score over a geometric grid on [c1 / n, c2 n^{-(1-c0)}].
[[nodiscard]] CvSearch select_h_cv(const Dataset& data, const CvConfig& config = {},
                                   const KernelSpec& kernel = KernelSpec::gaussian());

}  // namespace lrdspec
