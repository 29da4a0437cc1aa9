#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lrdspec/bootstrap.hpp"

namespace lrdspec {

enum class BandwidthRuleKind { cv, test };
enum class Hypothesis { H0, H1 };

[[nodiscard]] const char* to_string(BandwidthRuleKind k) noexcept;
[[nodiscard]] const char* to_string(Hypothesis h) noexcept;
[[nodiscard]] BandwidthRuleKind bandwidth_rule_from_name(const std::string& name);
[[nodiscard]] Hypothesis hypothesis_from_name(const std::string& name);

/// Monte Carlo study of the linear null Y = 1 + x + e against the quadratic
/// alternative with coefficient n^{-1/2} sqrt(log log n), e an LRD ladder.
struct ExperimentConfig {
    std::vector<std::size_t> n_list{250, 500, 750};
    std::vector<double> r_list{0.01, 0.05, 0.10};
    std::size_t M = 500;  // outer replications per (n, hypothesis)
    std::size_t B = 250;  // bootstrap ensemble size
    std::size_t J = 250;  // block resamples per draw (method 42)
    BootstrapMethod bootstrap_method = BootstrapMethod::parametric_41;
    double alpha_true = 0.75;
    std::string gamma1_rule = "sqrt-loglog";
    std::vector<BandwidthRuleKind> bandwidth_rules{BandwidthRuleKind::cv, BandwidthRuleKind::test};
    std::uint64_t base_seed = 0;
    std::string output_path = "mc_report";  // stem: writes <stem>.csv and <stem>.json
    /// Bootstrap ensembles per outer replication; their critical values are averaged.
    std::size_t repeat_count = 10;
    /// Band half-width of the h_test admissible set as a fraction of r.
    double epsilon_fraction = 0.5;
    std::size_t test_grid_points = 8;
    CvConfig cv;
    SpectralForm whittle_form = SpectralForm::power_ladder;
    unsigned threads = 1;
    /// Wall time in the CSV makes runs differ byte for byte, so it is opt-in.
    bool record_wall_time = false;
    double budget_seconds = 3600.0;

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Every key optional; unknown keys are rejected.
[[nodiscard]] ExperimentConfig experiment_config_from_json(const std::string& text);
[[nodiscard]] ExperimentConfig load_experiment_config(const std::string& path);
[[nodiscard]] std::string to_json(const ExperimentConfig& config);

/// Critical value of the asymptotic N(0,1) test: 2.33, 1.645 and 1.28 at the
/// 1%, 5% and 10% levels, the exact normal quantile elsewhere.
[[nodiscard]] double normal_critical_value(double r);

/// Cost model M B repeat n^2 summed over n and both hypotheses.
struct CostEstimate {
    double units = 0.0;
    double seconds = 0.0;
};
[[nodiscard]] CostEstimate estimate_cost(const ExperimentConfig& config);

struct McRow {
    std::size_t n = 0;
    double r = 0.0;
    BandwidthRuleKind rule = BandwidthRuleKind::test;
    Hypothesis hypothesis = Hypothesis::H0;
    double frequency = 0.0;
    double standard_error = 0.0;
    double time = 0.0;  // seconds for the row's n, or 0 without record_wall_time

    bool operator==(const McRow&) const = default;
};

/// How h_test was chosen for one (n, r).
struct TestBandwidth {
    std::size_t n = 0;
    double r = 0.0;
    BandwidthSearch search;
    bool fallback = false;  // H_n was empty; the h with size closest to r was used
};

struct McReport {
    std::vector<McRow> rows;
    std::vector<TestBandwidth> selections;
    double wall_time = 0.0;

    [[nodiscard]] const McRow* find(std::size_t n, double r, BandwidthRuleKind rule, Hypothesis hyp) const;
};

[[nodiscard]] McReport run_experiment(const ExperimentConfig& config);

/// Columns n,r,rule,hypothesis,freq,se,time; numbers in shortest round-trip form.
void write_report_csv(std::ostream& os, const McReport& report);
void write_report_json(std::ostream& os, const McReport& report);
/// Rows only (selections and wall_time are JSON-only).
[[nodiscard]] McReport read_report_csv(std::istream& is);
[[nodiscard]] McReport read_report_json(std::istream& is);

enum class ReportFormat { csv, json };
/// Writes <stem>.csv or <stem>.json; throws std::runtime_error on I/O failure.
void emit_report(const McReport& report, const std::string& stem, ReportFormat format);

}  // namespace lrdspec
