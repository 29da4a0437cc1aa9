#include "lrdspec/experiment.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lrdspec/log.hpp"
#include "lrdspec/parallel.hpp"
#include "lrdspec/rng.hpp"

namespace lrdspec {

using nlohmann::json;

const char* to_string(BandwidthRuleKind k) noexcept { return k == BandwidthRuleKind::cv ? "cv" : "test"; }
const char* to_string(Hypothesis h) noexcept { return h == Hypothesis::H0 ? "H0" : "H1"; }

BandwidthRuleKind bandwidth_rule_from_name(const std::string& name) {
    if (name == "cv") return BandwidthRuleKind::cv;
    if (name == "test") return BandwidthRuleKind::test;
    throw std::invalid_argument("unknown bandwidth rule '" + name + "' (expected cv or test)");
}

Hypothesis hypothesis_from_name(const std::string& name) {
    if (name == "H0") return Hypothesis::H0;
    if (name == "H1") return Hypothesis::H1;
    throw std::invalid_argument("unknown hypothesis '" + name + "' (expected H0 or H1)");
}

void ExperimentConfig::validate() const {
    if (n_list.empty()) throw std::invalid_argument("n_list is empty");
    for (auto n : n_list)
        if (n < 16) throw std::invalid_argument("every n must be at least 16");
    if (r_list.empty()) throw std::invalid_argument("r_list is empty");
    for (double r : r_list)
        if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("every r must lie in (0, 1)");
    if (M < 1 || B < 1 || J < 1 || repeat_count < 1 || test_grid_points < 1)
        throw std::invalid_argument("M, B, J, repeat_count and test_grid_points must be positive");
    if (!(alpha_true > 0.5 && alpha_true < 1.0)) throw std::invalid_argument("alpha_true must lie in (1/2, 1)");
    if (gamma1_rule != "sqrt-loglog")
        throw std::invalid_argument("gamma1_rule '" + gamma1_rule + "' is not supported (only sqrt-loglog)");
    if (bandwidth_rules.empty()) throw std::invalid_argument("bandwidth_rules is empty");
    for (std::size_t i = 0; i < bandwidth_rules.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (bandwidth_rules[i] == bandwidth_rules[j]) throw std::invalid_argument("bandwidth_rules repeats a rule");
    if (!(epsilon_fraction > 0.0 && epsilon_fraction < 1.0))
        throw std::invalid_argument("epsilon_fraction must lie in (0, 1)");
    if (!(cv.c0 > 0.0 && cv.c0 < 1.0) || !(cv.c1 > 0.0) || !(cv.c2 > cv.c1) || cv.points < 2)
        throw std::invalid_argument("cv needs 0 < c0 < 1, 0 < c1 < c2 and at least 2 points");
    if (threads < 1) throw std::invalid_argument("threads must be positive");
    if (!(budget_seconds > 0.0)) throw std::invalid_argument("budget_seconds must be positive");
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const std::vector<std::string> known{
        "n_list", "r_list",       "M",         "B",         "J",           "bootstrap_method",
        "alpha_true", "gamma1_rule", "bandwidth_rules", "base_seed", "output_path", "repeat_count",
        "epsilon_fraction", "test_grid_points", "cv", "whittle_form", "threads", "record_wall_time",
        "budget_seconds"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown config key '" + key + "'");

    ExperimentConfig c;
    try {
        take(j, "n_list", c.n_list);
        take(j, "r_list", c.r_list);
        take(j, "M", c.M);
        take(j, "B", c.B);
        take(j, "J", c.J);
        if (j.contains("bootstrap_method")) {
            const auto& m = j.at("bootstrap_method");
            c.bootstrap_method = bootstrap_method_from_name(m.is_number() ? std::to_string(m.get<int>()) : m.get<std::string>());
        }
        take(j, "alpha_true", c.alpha_true);
        take(j, "gamma1_rule", c.gamma1_rule);
        if (j.contains("bandwidth_rules")) {
            c.bandwidth_rules.clear();
            for (const auto& r : j.at("bandwidth_rules")) c.bandwidth_rules.push_back(bandwidth_rule_from_name(r.get<std::string>()));
        }
        take(j, "base_seed", c.base_seed);
        take(j, "output_path", c.output_path);
        take(j, "repeat_count", c.repeat_count);
        take(j, "epsilon_fraction", c.epsilon_fraction);
        take(j, "test_grid_points", c.test_grid_points);
        if (j.contains("cv")) {
            const auto& cv = j.at("cv");
            for (const auto& [key, _] : cv.items())
                if (key != "c0" && key != "c1" && key != "c2" && key != "points")
                    throw std::invalid_argument("unknown cv key '" + key + "'");
            take(cv, "c0", c.cv.c0);
            take(cv, "c1", c.cv.c1);
            take(cv, "c2", c.cv.c2);
            take(cv, "points", c.cv.points);
        }
        if (j.contains("whittle_form")) c.whittle_form = spectral_form_from_name(j.at("whittle_form").get<std::string>());
        take(j, "threads", c.threads);
        take(j, "record_wall_time", c.record_wall_time);
        take(j, "budget_seconds", c.budget_seconds);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config has a field of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return experiment_config_from_json(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
    json j;
    j["n_list"] = c.n_list;
    j["r_list"] = c.r_list;
    j["M"] = c.M;
    j["B"] = c.B;
    j["J"] = c.J;
    j["bootstrap_method"] = to_string(c.bootstrap_method);
    j["alpha_true"] = c.alpha_true;
    j["gamma1_rule"] = c.gamma1_rule;
    j["bandwidth_rules"] = json::array();
    for (auto r : c.bandwidth_rules) j["bandwidth_rules"].push_back(to_string(r));
    j["base_seed"] = c.base_seed;
    j["output_path"] = c.output_path;
    j["repeat_count"] = c.repeat_count;
    j["epsilon_fraction"] = c.epsilon_fraction;
    j["test_grid_points"] = c.test_grid_points;
    j["cv"] = {{"c0", c.cv.c0}, {"c1", c.cv.c1}, {"c2", c.cv.c2}, {"points", c.cv.points}};
    j["whittle_form"] = to_string(c.whittle_form);
    j["threads"] = c.threads;
    j["record_wall_time"] = c.record_wall_time;
    j["budget_seconds"] = c.budget_seconds;
    return j.dump(2);
}

double normal_critical_value(double r) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("level r must lie in (0, 1)");
    for (auto [level, z] : {std::pair{0.01, 2.33}, std::pair{0.05, 1.645}, std::pair{0.10, 1.28}})
        if (std::abs(r - level) < 1e-12) return z;
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<>(), r));
}

CostEstimate estimate_cost(const ExperimentConfig& c) {
    const bool test = std::find(c.bandwidth_rules.begin(), c.bandwidth_rules.end(), BandwidthRuleKind::test) !=
                      c.bandwidth_rules.end();
    const double stats_per_rep = 1.0 + (test ? static_cast<double>(c.repeat_count * c.B) : 0.0);
    CostEstimate e;
    for (auto n : c.n_list) {
        const double nd = static_cast<double>(n);
        e.units += 2.0 * static_cast<double>(c.M) * stats_per_rep * nd * nd;
    }
    // About 4e-8 s per unit for one statistic at n = 250 on one core.
    e.seconds = e.units * 4e-8 / static_cast<double>(c.threads);
    return e;
}

const McRow* McReport::find(std::size_t n, double r, BandwidthRuleKind rule, Hypothesis hyp) const {
    for (const auto& row : rows)
        if (row.n == n && std::abs(row.r - r) < 1e-12 && row.rule == rule && row.hypothesis == hyp) return &row;
    return nullptr;
}

namespace {

struct RepOutcome {
    std::vector<std::vector<char>> test;  // [r][h]
    std::vector<char> cv;                 // [r]
};

// One hypothesis at one n: every outer replication's rejections for all r and h.
std::vector<RepOutcome> simulate(const ExperimentConfig& c, const L3nPipeline& pipe, const DesignTruth& truth,
                                 std::uint64_t stream, std::span<const double> grid, bool do_test, bool do_cv) {
    const std::size_t n = pipe.n;
    const DesignSampler sampler(truth, n);
    std::vector<double> z(c.r_list.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = normal_critical_value(c.r_list[k]);

    BootstrapConfig boot;
    boot.method = c.bootstrap_method;
    boot.M = c.B;
    boot.J = c.J;
    boot.threads = 1;

    std::vector<RepOutcome> out(c.M);
    parallel_for(c.M, c.threads, [&](std::size_t i) {
        const auto data = sampler.draw(derive_seed(c.base_seed, {n, stream, i, 0}));
        std::vector<double> all(grid.begin(), grid.end());
        if (do_cv) all.push_back(select_h_cv(data, c.cv, pipe.kernel).h_cv);
        const auto obs = l3n_on_grid(pipe, data, all);

        RepOutcome& o = out[i];
        if (do_cv) {
            const double stat = obs.values.back();
            o.cv.resize(c.r_list.size());
            for (std::size_t k = 0; k < z.size(); ++k) o.cv[k] = stat > z[k] ? 1 : 0;
        }
        if (do_test) {
            std::vector<std::vector<double>> lstar(c.r_list.size(), std::vector<double>(grid.size(), 0.0));
            for (std::size_t q = 0; q < c.repeat_count; ++q) {
                BootstrapConfig cfg = boot;
                cfg.base_seed = derive_seed(c.base_seed, {n, stream, i, 1, q});
                const auto ens = bootstrap_ensemble(pipe, obs.fitted, obs.lambda, obs.sigma2, grid, cfg);
                for (std::size_t k = 0; k < c.r_list.size(); ++k)
                    for (std::size_t g = 0; g < grid.size(); ++g)
                        lstar[k][g] += upper_quantile(ens.values[g], c.r_list[k]);
            }
            o.test.assign(c.r_list.size(), std::vector<char>(grid.size(), 0));
            for (std::size_t k = 0; k < c.r_list.size(); ++k)
                for (std::size_t g = 0; g < grid.size(); ++g)
                    o.test[k][g] = obs.values[g] > lstar[k][g] / static_cast<double>(c.repeat_count) ? 1 : 0;
        }
    });
    return out;
}

double frequency(const std::vector<RepOutcome>& reps, auto&& pick) {
    std::size_t hits = 0;
    for (const auto& o : reps) hits += pick(o) ? 1u : 0u;
    return static_cast<double>(hits) / static_cast<double>(reps.size());
}

TestBandwidth choose_h_test(std::size_t n, double r, double epsilon, std::span<const double> grid,
                            const std::vector<double>& gamma, const std::vector<double>& beta) {
    TestBandwidth tb;
    tb.n = n;
    tb.r = r;
    try {
        tb.search = select_h_from_curves(grid, gamma, beta, r, epsilon);
    } catch (const EmptyAdmissibleSet&) {
        tb.fallback = true;
        auto& s = tb.search;
        s.grid.assign(grid.begin(), grid.end());
        s.r = r;
        s.epsilon = epsilon;
        s.gamma_n = gamma;
        s.beta_n = beta;
        for (std::size_t g = 1; g < grid.size(); ++g)
            if (std::abs(gamma[g] - r) < std::abs(gamma[s.selected] - r)) s.selected = g;
        s.h_test = grid[s.selected];
        std::ostringstream msg;
        msg << "n = " << n << ", r = " << r << ": no bandwidth has size within " << epsilon
            << " of r; using h = " << s.h_test << " whose size " << gamma[s.selected] << " is closest";
        warn(msg.str());
    }
    return tb;
}

}  // namespace

McReport run_experiment(const ExperimentConfig& c) {
    c.validate();
    const auto cost = estimate_cost(c);
    if (cost.seconds > c.budget_seconds) {
        std::ostringstream msg;
        msg << "estimated run time " << cost.seconds << " s exceeds the budget of " << c.budget_seconds
            << " s (M B n^2 cost model)";
        warn(msg.str());
    }
    const bool do_test = std::find(c.bandwidth_rules.begin(), c.bandwidth_rules.end(), BandwidthRuleKind::test) !=
                         c.bandwidth_rules.end();
    const bool do_cv = std::find(c.bandwidth_rules.begin(), c.bandwidth_rules.end(), BandwidthRuleKind::cv) !=
                       c.bandwidth_rules.end();

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    McReport report;
    for (auto n : c.n_list) {
        const auto t0 = clock::now();
        WhittleConfig w;
        w.form = c.whittle_form;
        const auto pipe = L3nPipeline::make(n, ModelKind::linear, KernelSpec::gaussian(), w, c.threads);
        const auto grid = default_test_grid(n, c.test_grid_points);
        const auto h0 = simulate(c, pipe, DesignTruth::null_linear(c.alpha_true), 0, grid, do_test, do_cv);
        const auto h1 = simulate(c, pipe, DesignTruth::quadratic_alternative(n, c.alpha_true), 1, grid, do_test, do_cv);
        const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
        const double row_time = c.record_wall_time ? seconds : 0.0;

        for (std::size_t k = 0; k < c.r_list.size(); ++k) {
            const double r = c.r_list[k];
            for (auto rule : c.bandwidth_rules) {
                double f0 = 0.0, f1 = 0.0;
                if (rule == BandwidthRuleKind::cv) {
                    f0 = frequency(h0, [&](const RepOutcome& o) { return o.cv[k] != 0; });
                    f1 = frequency(h1, [&](const RepOutcome& o) { return o.cv[k] != 0; });
                } else {
                    std::vector<double> gamma(grid.size()), beta(grid.size());
                    for (std::size_t g = 0; g < grid.size(); ++g) {
                        gamma[g] = frequency(h0, [&](const RepOutcome& o) { return o.test[k][g] != 0; });
                        beta[g] = frequency(h1, [&](const RepOutcome& o) { return o.test[k][g] != 0; });
                    }
                    auto tb = choose_h_test(n, r, c.epsilon_fraction * r, grid, gamma, beta);
                    f0 = gamma[tb.search.selected];
                    f1 = beta[tb.search.selected];
                    report.selections.push_back(std::move(tb));
                }
                report.rows.push_back({n, r, rule, Hypothesis::H0, f0, binomial_se(f0, c.M), row_time});
                report.rows.push_back({n, r, rule, Hypothesis::H1, f1, binomial_se(f1, c.M), row_time});
            }
        }
    }
    report.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------- report I/O

namespace {

constexpr const char* kCsvHeader = "n,r,rule,hypothesis,freq,se,time";

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("malformed number '" + s + "' in report");
    return v;
}

std::size_t parse_size(const std::string& s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("malformed count '" + s + "' in report");
    return v;
}

json row_json(const McRow& row) {
    return {{"n", row.n},
            {"r", row.r},
            {"rule", to_string(row.rule)},
            {"hypothesis", to_string(row.hypothesis)},
            {"freq", row.frequency},
            {"se", row.standard_error},
            {"time", row.time}};
}

}  // namespace

void write_report_csv(std::ostream& os, const McReport& report) {
    os << kCsvHeader << '\n';
    for (const auto& row : report.rows)
        os << row.n << ',' << fmt(row.r) << ',' << to_string(row.rule) << ',' << to_string(row.hypothesis) << ','
           << fmt(row.frequency) << ',' << fmt(row.standard_error) << ',' << fmt(row.time) << '\n';
}

McReport read_report_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw std::invalid_argument("report CSV header mismatch");
    McReport report;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 7) throw std::invalid_argument("report CSV row needs 7 fields: " + line);
        report.rows.push_back({parse_size(f[0]), parse_double(f[1]), bandwidth_rule_from_name(f[2]),
                               hypothesis_from_name(f[3]), parse_double(f[4]), parse_double(f[5]),
                               parse_double(f[6])});
    }
    return report;
}

void write_report_json(std::ostream& os, const McReport& report) {
    json j;
    j["rows"] = json::array();
    for (const auto& row : report.rows) j["rows"].push_back(row_json(row));
    j["selections"] = json::array();
    for (const auto& s : report.selections) {
        std::vector<double> admissible;
        for (auto i : s.search.admissible) admissible.push_back(s.search.grid[i]);
        j["selections"].push_back({{"n", s.n},
                                   {"r", s.r},
                                   {"epsilon", s.search.epsilon},
                                   {"grid", s.search.grid},
                                   {"gamma", s.search.gamma_n},
                                   {"beta", s.search.beta_n},
                                   {"admissible", s.search.admissible},
                                   {"selected", s.search.selected},
                                   {"h_test", s.search.h_test},
                                   {"fallback", s.fallback}});
    }
    j["wall_time"] = report.wall_time;
    os << j.dump(2) << '\n';
}

McReport read_report_json(std::istream& is) {
    McReport report;
    try {
        const json j = json::parse(is);
        for (const auto& r : j.at("rows"))
            report.rows.push_back({r.at("n").get<std::size_t>(), r.at("r").get<double>(),
                                   bandwidth_rule_from_name(r.at("rule").get<std::string>()),
                                   hypothesis_from_name(r.at("hypothesis").get<std::string>()),
                                   r.at("freq").get<double>(), r.at("se").get<double>(), r.at("time").get<double>()});
        if (j.contains("selections"))
            for (const auto& s : j.at("selections")) {
                TestBandwidth tb;
                tb.n = s.at("n").get<std::size_t>();
                tb.r = s.at("r").get<double>();
                tb.fallback = s.at("fallback").get<bool>();
                auto& b = tb.search;
                b.r = tb.r;
                b.epsilon = s.at("epsilon").get<double>();
                b.grid = s.at("grid").get<std::vector<double>>();
                b.gamma_n = s.at("gamma").get<std::vector<double>>();
                b.beta_n = s.at("beta").get<std::vector<double>>();
                b.admissible = s.at("admissible").get<std::vector<std::size_t>>();
                b.selected = s.at("selected").get<std::size_t>();
                b.h_test = s.at("h_test").get<double>();
                report.selections.push_back(std::move(tb));
            }
        report.wall_time = j.value("wall_time", 0.0);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed report JSON: ") + e.what());
    }
    return report;
}

void emit_report(const McReport& report, const std::string& stem, ReportFormat format) {
    const std::string path = stem + (format == ReportFormat::csv ? ".csv" : ".json");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    if (format == ReportFormat::csv)
        write_report_csv(out, report);
    else
        write_report_json(out, report);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace lrdspec
