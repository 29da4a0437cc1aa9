#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lrdspec/rng.hpp"

namespace lrdspec {

class WindowedConvolver;

/// Long-memory parameters: gamma(k) ~ eta |k|^{-alpha}.
struct LrdParams {
    double alpha = 0.75;
    double eta = 1.0;

    /// Validates 0 < alpha < 1 and eta > 0; with `strict`, 1/2 < alpha < 1
    /// (the range needed by the normal-limit statistics).
    static LrdParams make(double alpha, double eta, bool strict = false);
};

void validate(const LrdParams& params, bool strict = false);

enum class LadderSide { one_sided, two_sided_no_zero };

/// `power`: psi_j = c j^{-(1+alpha)/2}.
/// `fractional`: psi_j = c Gamma(j-1+d) / (Gamma(j) Gamma(d)), d = (1-alpha)/2,
/// the fractional-differencing filter, which decays like (c/Gamma(d)) j^{-(1+alpha)/2}
/// and whose autocovariance reaches its power-law tail quickly.
enum class LadderShape { power, fractional };

struct ScaleRule {
    enum class Kind { explicit_scale, sqrt_alpha, variance_target };
    Kind kind = Kind::sqrt_alpha;
    double value = 0.0;

    static ScaleRule explicit_scale(double c) { return {Kind::explicit_scale, c}; }
    static ScaleRule sqrt_alpha() { return {Kind::sqrt_alpha, 0.0}; }
    /// Scale chosen so the squared coefficients over the whole index set sum to sigma2.
    static ScaleRule variance_target(double sigma2) { return {Kind::variance_target, sigma2}; }
};

/// Truncated MA(inf) coefficients psi_1..psi_jmax; immutable once built.
class CoefficientLadder {
public:
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double scale() const noexcept { return scale_; }
    [[nodiscard]] std::size_t j_max() const noexcept { return coefficients_.size(); }
    [[nodiscard]] LadderSide side() const noexcept { return side_; }
    [[nodiscard]] LadderShape shape() const noexcept { return shape_; }
    /// psi_1..psi_jmax (index 0 holds psi_1). Two-sided ladders mirror these to j < 0.
    [[nodiscard]] std::span<const double> coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] double psi(std::size_t j) const { return coefficients_.at(j - 1); }

    /// Sum of psi_j^2 over the full index set, i.e. gamma(0) of the truncated ladder.
    [[nodiscard]] double sum_of_squares() const noexcept { return sum_of_squares_; }
    /// Upper bound on sum_{|j| > jmax} psi_j^2, the gamma(0) truncation error.
    [[nodiscard]] double tail_bound() const;
    /// lim_k gamma(k) k^alpha for the untruncated ladder.
    [[nodiscard]] double asymptotic_eta() const;
    [[nodiscard]] LrdParams asymptotic_params() const { return {alpha_, asymptotic_eta()}; }

    [[nodiscard]] std::string describe() const;

private:
    friend CoefficientLadder make_ladder(double, ScaleRule, std::size_t, LadderSide, LadderShape);
    double alpha_ = 0.0;
    double scale_ = 0.0;
    LadderSide side_ = LadderSide::one_sided;
    LadderShape shape_ = LadderShape::power;
    std::vector<double> coefficients_;
    double sum_of_squares_ = 0.0;
};

[[nodiscard]] CoefficientLadder make_ladder(double alpha, ScaleRule rule, std::size_t j_max,
                                            LadderSide side = LadderSide::one_sided,
                                            LadderShape shape = LadderShape::power);

/// max(10^6, 50 n).
[[nodiscard]] std::size_t default_j_max(std::size_t n) noexcept;

/// gamma(k) = sum_j psi_j psi_{j+|k|} over the ladder's index set (O(j_max)).
[[nodiscard]] double autocovariance(const CoefficientLadder& ladder, long k);

/// gamma(0..max_lag) of the truncated ladder, computed by FFT autocorrelation.
[[nodiscard]] std::vector<double> autocovariances(const CoefficientLadder& ladder, std::size_t max_lag);

/// Innovation law. Every kind has mean 0 and variance 1.
class InnovationDist {
public:
    enum class Kind { standard_normal, normalized_chi_squared_2, custom };
    using Sampler = std::function<double(Engine&)>;

    static InnovationDist standard_normal();
    /// (chi^2_2 - 2) / 2, i.e. Exp(1) - 1.
    static InnovationDist normalized_chi_squared();
    /// The caller asserts mean 0, variance 1 and a finite sixth moment.
    static InnovationDist custom(std::string name, Sampler sampler, double fourth_moment);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] double fourth_moment() const noexcept { return fourth_moment_; }
    [[nodiscard]] double sample(Engine& eng) const;
    void fill(Engine& eng, std::span<double> out) const;

private:
    Kind kind_ = Kind::standard_normal;
    std::string name_ = "standard-normal";
    double fourth_moment_ = 3.0;
    Sampler sampler_;
};

struct TimeSeries {
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::string provenance;
};

/// Convolves a ladder with n + (pre-sample) seeded innovations. The FFT of
/// the filter is computed once, so reuse an instance across replications.
class LadderGenerator {
public:
    LadderGenerator(CoefficientLadder ladder, std::size_t n);
    ~LadderGenerator();
    LadderGenerator(LadderGenerator&&) noexcept;
    LadderGenerator& operator=(LadderGenerator&&) noexcept;

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] const CoefficientLadder& ladder() const noexcept { return ladder_; }
    /// Number of innovations consumed per path.
    [[nodiscard]] std::size_t innovation_count() const noexcept;

    [[nodiscard]] std::vector<double> values(const InnovationDist& dist, std::uint64_t seed) const;
    /// Same path as values(); `innovations` must hold innovation_count() draws.
    [[nodiscard]] std::vector<double> from_innovations(std::span<const double> innovations) const;
    [[nodiscard]] TimeSeries generate(const InnovationDist& dist, std::uint64_t seed) const;

private:
    CoefficientLadder ladder_;
    std::size_t n_;
    std::unique_ptr<WindowedConvolver> conv_;
};

[[nodiscard]] TimeSeries generate(const CoefficientLadder& ladder, std::size_t n,
                                  const InnovationDist& dist, std::uint64_t seed);

/// CSV with header "value" and one value per line.
void write_series_csv(std::ostream& os, std::span<const double> values);
[[nodiscard]] std::vector<double> read_series_csv(std::istream& is);

[[nodiscard]] const char* to_string(LadderShape shape) noexcept;
[[nodiscard]] const char* to_string(LadderSide side) noexcept;

}  // namespace lrdspec
