// Command-line front end: generate | test | estimate-lrd | bootstrap | clt-lab | constants | mc.
// Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "lrdspec/bootstrap.hpp"
#include "lrdspec/clt_lab.hpp"
#include "lrdspec/experiment.hpp"
#include "lrdspec/log.hpp"
#include "lrdspec/rng.hpp"

using namespace lrdspec;
using nlohmann::json;

namespace {

constexpr int kIoError = 1;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string config;
    std::string output;  // empty: stdout
};

void write_output(const Globals& g, const std::string& text) {
    if (g.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(g.output, std::ios::binary);
    if (!out || !(out << text)) throw std::runtime_error("cannot write " + g.output);
}

std::vector<double> split_numbers(const std::string& s, std::size_t expected, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string(what) + ": '" + cell + "' is not a number");
        }
    }
    if (v.size() != expected)
        throw std::invalid_argument(std::string(what) + " needs " + std::to_string(expected) + " comma-separated values");
    return v;
}

// CSV with header "value" (fixed design) or "x,y".
Dataset read_dataset(const std::string& path, DesignKind design) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header == "value") {
        in.seekg(0);
        auto y = read_series_csv(in);
        if (design == DesignKind::random) throw std::invalid_argument("a random design needs an x,y CSV");
        return Dataset::fixed_design(std::move(y));
    }
    if (header != "x,y") throw std::invalid_argument(path + ": expected header 'value' or 'x,y'");
    std::vector<double> x, y;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line == "\r") continue;
        const auto v = split_numbers(line, 2, "x,y row");
        x.push_back(v[0]);
        y.push_back(v[1]);
    }
    if (design == DesignKind::fixed) return Dataset::fixed_design(std::move(y));
    return Dataset::random_design(std::move(x), std::move(y));
}

std::vector<double> read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    return read_series_csv(in);
}

json lambda_json(const LrdParams& l) { return {{"alpha", l.alpha}, {"eta", l.eta}}; }

InnovationDist innovation_from_name(const std::string& name) {
    if (name == "normal") return InnovationDist::standard_normal();
    if (name == "chi2") return InnovationDist::normalized_chi_squared();
    throw std::invalid_argument("unknown innovation '" + name + "' (expected normal or chi2)");
}

LadderShape shape_from_name(const std::string& name) {
    if (name == "power") return LadderShape::power;
    if (name == "fractional") return LadderShape::fractional;
    throw std::invalid_argument("unknown ladder shape '" + name + "' (expected power or fractional)");
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::size_t n = 250;
    double alpha = 0.75;
    std::string shape = "power";
    bool two_sided = false;
    std::string scale = "sqrt-alpha";
    std::string innovation = "normal";
    std::size_t j_max = 0;
    std::string dataset = "errors";
};

int run_generate(const Globals& g, const GenerateArgs& a) {
    const auto shape = shape_from_name(a.shape);
    const auto side = a.two_sided ? LadderSide::two_sided_no_zero : LadderSide::one_sided;
    const ScaleRule rule = a.scale == "sqrt-alpha" ? ScaleRule::sqrt_alpha()
                                                   : ScaleRule::explicit_scale(split_numbers(a.scale, 1, "--scale")[0]);
    const auto ladder = make_ladder(a.alpha, rule, a.j_max ? a.j_max : default_j_max(a.n), side, shape);
    const auto e = generate(ladder, a.n, innovation_from_name(a.innovation), g.seed).values;
    std::ostringstream os;
    os.precision(17);
    if (a.dataset == "errors") {
        write_series_csv(os, e);
    } else {
        double quad = 0.0;
        if (a.dataset == "alternative")
            quad = DesignTruth::alternative_coefficient(a.n);
        else if (a.dataset != "null")
            throw std::invalid_argument("--dataset must be errors, null or alternative");
        const auto x = fixed_design_points(a.n);
        os << "x,y\n";
        for (std::size_t t = 0; t < a.n; ++t) os << x[t] << ',' << 1.0 + x[t] + quad * x[t] * x[t] + e[t] << '\n';
    }
    write_output(g, os.str());
    return 0;
}

// ---------------------------------------------------------------- test

struct TestArgs {
    std::string input;
    std::string design = "fixed";
    std::string model = "linear";
    std::string stat = "l3n";
    std::string h = "cv";
    std::string alpha_eta = "estimate";
    std::string kernel = "gaussian";
};

int run_test(const Globals& g, const TestArgs& a) {
    const auto design = a.design == "fixed"    ? DesignKind::fixed
                        : a.design == "random" ? DesignKind::random
                                               : throw std::invalid_argument("--design must be fixed or random");
    const auto kind = a.model == "linear"      ? ModelKind::linear
                      : a.model == "quadratic" ? ModelKind::quadratic
                                               : throw std::invalid_argument("--model must be linear or quadratic");
    const StatKind stat = a.stat == "l1n"   ? StatKind::L1n
                          : a.stat == "l2n" ? StatKind::L2n
                          : a.stat == "l3n" ? StatKind::L3n
                                            : throw std::invalid_argument("--stat must be l1n, l2n or l3n");
    if ((stat == StatKind::L3n) != (design == DesignKind::fixed))
        throw std::invalid_argument("l3n goes with the fixed design, l1n/l2n with the random design");
    const auto kernel = kernel_from_name(a.kernel);
    const auto data = read_dataset(a.input, design);
    const auto fitted = fit(data, kind);

    LrdParams lambda;
    bool estimated = false;
    if (a.alpha_eta == "estimate") {
        lambda = estimate(residuals(data, fitted)).lambda;
        estimated = true;
    } else {
        const auto v = split_numbers(a.alpha_eta, 2, "--alpha-eta");
        lambda = LrdParams::make(v[0], v[1]);
    }
    const double h = a.h == "cv" ? select_h_cv(data, {}, kernel).h_cv : split_numbers(a.h, 1, "--h")[0];

    TestResult r;
    if (stat == StatKind::L3n) {
        const auto c = compute_constants(kernel, lambda.alpha, data.n());
        r = statistic_L3n(data, fitted, lambda, h, c, kernel);
    } else {
        r = statistic_L1n_L2n(data, fitted, lambda, h, stat, kernel);
    }
    json j{{"stat", to_string(r.kind)},
           {"statistic", r.statistic},
           {"numerator", r.numerator},
           {"sigma_hat", r.sigma_hat},
           {"h", r.h},
           {"lambda", lambda_json(r.lambda_used)},
           {"lambda_estimated", estimated},
           {"reference_law", to_string(r.reference_law)},
           {"theta", fitted.theta},
           {"n", data.n()},
           {"warnings", r.warnings}};
    write_output(g, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- estimate-lrd

struct EstimateArgs {
    std::string input;
    std::string box;
    std::size_t grid = 25;
    std::string form = "power_sine";
};

int run_estimate(const Globals& g, const EstimateArgs& a) {
    WhittleConfig cfg;
    if (!a.box.empty()) {
        const auto b = split_numbers(a.box, 4, "--box");
        cfg.alpha_lo = b[0];
        cfg.alpha_hi = b[1];
        cfg.eta_lo = b[2];
        cfg.eta_hi = b[3];
    }
    cfg.grid_points = a.grid;
    cfg.form = spectral_form_from_name(a.form);
    cfg.validate();
    const auto r = estimate(read_series(a.input), cfg);
    json j{{"alpha", r.lambda.alpha},
           {"eta", r.lambda.eta},
           {"objective", r.objective},
           {"grid", {{"alpha", r.grid_best.alpha}, {"eta", r.grid_best.eta}, {"objective", r.grid_objective},
                     {"points", r.grid_points}}},
           {"refined", r.refined},
           {"eta_clamped", r.eta_clamped},
           {"form", to_string(cfg.form)}};
    write_output(g, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- bootstrap

struct BootstrapArgs {
    std::string input;
    std::string method = "41";
    std::size_t M = 250;
    std::size_t J = 250;
    double r = 0.05;
    std::string h = "test";
    std::size_t outer = 50;
    std::size_t grid_points = 8;
    std::string form = "power_ladder";
};

int run_bootstrap(const Globals& g, const BootstrapArgs& a) {
    const auto data = read_dataset(a.input, DesignKind::fixed);
    const std::size_t n = data.n();
    WhittleConfig w;
    w.form = spectral_form_from_name(a.form);
    const auto pipe = L3nPipeline::make(n, ModelKind::linear, KernelSpec::gaussian(), w, g.threads);

    BootstrapConfig cfg;
    cfg.method = bootstrap_method_from_name(a.method);
    cfg.M = a.M;
    cfg.J = a.J;
    cfg.base_seed = g.seed;
    cfg.threads = g.threads;
    cfg.validate();
    if (!(a.r > 0.0 && a.r < 1.0)) throw std::invalid_argument("--r must lie in (0, 1)");

    const std::array<double, 1> probe{0.1};
    const auto obs = l3n_on_grid(pipe, data, probe);
    json extra = json::object();
    double h = 0.0;
    if (a.h == "cv") {
        h = select_h_cv(data).h_cv;
    } else if (a.h == "test") {
        // Size and power curves simulated at the fitted alpha.
        const auto grid = default_test_grid(n, a.grid_points);
        BootstrapConfig sim = cfg;
        sim.base_seed = derive_seed(g.seed, {7});
        const auto s = select_h_test(pipe, grid, a.r, 0.5 * a.r, DesignTruth::null_linear(obs.lambda.alpha),
                                     DesignTruth::quadratic_alternative(n, obs.lambda.alpha), a.outer, sim);
        h = s.h_test;
        extra = {{"grid", s.grid}, {"gamma", s.gamma_n}, {"beta", s.beta_n}, {"admissible", s.admissible}};
    } else {
        h = split_numbers(a.h, 1, "--h")[0];
    }
    const auto cv = bootstrap_critical_value(pipe, data, obs.lambda, h, a.r, cfg);
    const std::array<double, 1> hh{h};
    const double stat = l3n_on_grid(pipe, data, hh).values[0];
    json j{{"r", cv.r},
           {"l_star", cv.l_star},
           {"h", cv.h},
           {"h_rule", a.h == "cv" || a.h == "test" ? a.h : "value"},
           {"method", to_string(cfg.method)},
           {"M", cfg.M},
           {"statistic", stat},
           {"reject", stat > cv.l_star},
           {"lambda", lambda_json(obs.lambda)},
           {"ensemble", cv.ensemble}};
    if (!extra.empty()) j["h_search"] = extra;
    write_output(g, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- clt-lab

struct LabArgs {
    std::string theorem = "t24";
    std::size_t n = 400;
    double alpha = 0.75;
    std::string h = "rate:0.4";
    std::size_t reps = 300;
    std::string shape = "fractional";
    std::size_t j_max = 0;
};

int run_lab_cmd(const Globals& g, const LabArgs& a) {
    LabSpec s;
    s.theorem = lab_theorem_from_name(a.theorem);
    s.n = a.n;
    s.alpha = a.alpha;
    if (a.h.rfind("rate:", 0) == 0)
        s.h_rule = BandwidthRule::rate(split_numbers(a.h.substr(5), 1, "--h rate")[0]);
    else
        s.h_rule = BandwidthRule::explicit_h(split_numbers(a.h, 1, "--h")[0]);
    s.replications = a.reps;
    s.seed = g.seed;
    s.shape = shape_from_name(a.shape);
    s.j_max = a.j_max;
    s.threads = g.threads;
    const auto r = run_lab(s);
    json j{{"theorem", to_string(s.theorem)}, {"n", s.n},       {"h", r.h},
           {"alpha", s.alpha},                {"reps", r.sample_size}, {"ks", r.ks_statistic},
           {"target", to_string(r.target)},   {"sigma", r.sigma}};
    write_output(g, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- constants

struct ConstantsArgs {
    std::string kernel = "gaussian";
    double alpha = 0.75;
    std::size_t n = 250;
    double tol = 1e-6;
};

int run_constants(const Globals& g, const ConstantsArgs& a) {
    const auto c = compute_constants(kernel_from_name(a.kernel), a.alpha, a.n, a.tol);
    json j{{"kernel", c.kernel},   {"alpha", c.alpha_used},     {"n", c.n_used},
           {"k2", c.k2_integral},  {"delta0", c.delta0},        {"a_alpha", c.a_alpha},
           {"a_alpha_star", c.a_alpha_star}, {"tol", c.quadrature_tolerance}};
    write_output(g, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- mc

struct McArgs {
    std::string output;
    bool seed_given = false;
    bool threads_given = false;
};

int run_mc(const Globals& g, const McArgs& a) {
    auto cfg = g.config.empty() ? ExperimentConfig{} : load_experiment_config(g.config);
    if (a.seed_given) cfg.base_seed = g.seed;
    if (a.threads_given) cfg.threads = g.threads;
    if (!a.output.empty()) cfg.output_path = a.output;
    cfg.validate();
    for (const char* ext : {".csv", ".json"})
        if (!std::ofstream(cfg.output_path + ext, std::ios::app))
            throw std::runtime_error("cannot write " + cfg.output_path + ext);

    // Replications can repeat the same advisory many times; show each message once.
    std::map<std::string, std::size_t> counts;
    McReport report;
    {
        ScopedWarningSink sink([&](const std::string& m) {
            if (counts[m]++ == 0) std::cerr << "warning: " << m << '\n';
        });
        const auto cost = estimate_cost(cfg);
        std::cerr << "mc: " << cfg.n_list.size() << " sample sizes, M = " << cfg.M << ", B = " << cfg.B
                  << ", repeat_count = " << cfg.repeat_count << "; estimated " << std::lround(cost.seconds)
                  << " s\n";
        report = run_experiment(cfg);
    }
    for (const auto& [m, c] : counts)
        if (c > 1) std::cerr << "warning repeated " << c << " times: " << m << '\n';
    emit_report(report, cfg.output_path, ReportFormat::csv);
    emit_report(report, cfg.output_path, ReportFormat::json);

    std::printf("%6s %6s %5s %3s %8s %8s\n", "n", "r", "rule", "hyp", "freq", "se");
    for (const auto& row : report.rows)
        std::printf("%6zu %6.3f %5s %3s %8.3f %8.3f\n", row.n, row.r, to_string(row.rule), to_string(row.hypothesis),
                    row.frequency, row.standard_error);
    std::printf("wrote %s.csv and %s.json (%.1f s)\n", cfg.output_path.c_str(), cfg.output_path.c_str(),
                report.wall_time);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel specification tests for regression with long-range dependent errors"};
    app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Base seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--config", g.config, "JSON experiment config (mc)");
    app.add_option("-o,--output", g.output, "Write the result here instead of stdout");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Simulate an LRD error series or a regression dataset (CSV)");
    gen->add_option("--n", ga.n)->capture_default_str();
    gen->add_option("--alpha", ga.alpha)->capture_default_str();
    gen->add_option("--shape", ga.shape, "power | fractional")->capture_default_str();
    gen->add_flag("--two-sided", ga.two_sided, "Two-sided ladder (power shape only)");
    gen->add_option("--scale", ga.scale, "sqrt-alpha or a number")->capture_default_str();
    gen->add_option("--innovation", ga.innovation, "normal | chi2")->capture_default_str();
    gen->add_option("--j-max", ga.j_max, "Ladder length (0: default)");
    gen->add_option("--dataset", ga.dataset, "errors | null | alternative")->capture_default_str();

    TestArgs ta;
    auto* test = app.add_subcommand("test", "Compute L1n, L2n or L3n for a dataset");
    test->add_option("--input", ta.input, "CSV with header 'value' or 'x,y'")->required();
    test->add_option("--design", ta.design, "fixed | random")->capture_default_str();
    test->add_option("--model", ta.model, "linear | quadratic")->capture_default_str();
    test->add_option("--stat", ta.stat, "l1n | l2n | l3n")->capture_default_str();
    test->add_option("--h", ta.h, "Bandwidth or 'cv'")->capture_default_str();
    test->add_option("--alpha-eta", ta.alpha_eta, "'a,e' or 'estimate'")->capture_default_str();
    test->add_option("--kernel", ta.kernel, "gaussian | epanechnikov")->capture_default_str();

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate-lrd", "Whittle estimate of (alpha, eta) from a series");
    est->add_option("--input", ea.input, "CSV with header 'value'")->required();
    est->add_option("--box", ea.box, "a_lo,a_hi,e_lo,e_hi");
    est->add_option("--grid", ea.grid, "Grid points per axis")->capture_default_str();
    est->add_option("--form", ea.form, "power_sine | power_ladder")->capture_default_str();

    BootstrapArgs ba;
    auto* boot = app.add_subcommand("bootstrap", "Simulated critical value of L3n for a fixed-design dataset");
    boot->add_option("--input", ba.input, "CSV with header 'value' or 'x,y'")->required();
    boot->add_option("--method", ba.method, "41 | 42")->capture_default_str();
    boot->add_option("--M", ba.M, "Ensemble size")->capture_default_str();
    boot->add_option("--J", ba.J, "Block resamples per draw (method 42)")->capture_default_str();
    boot->add_option("--r", ba.r, "Level")->capture_default_str();
    boot->add_option("--h", ba.h, "Bandwidth, 'test' or 'cv'")->capture_default_str();
    boot->add_option("--outer", ba.outer, "Outer replications for h_test")->capture_default_str();
    boot->add_option("--grid-points", ba.grid_points, "h_test grid size")->capture_default_str();
    boot->add_option("--form", ba.form, "Whittle spectral form")->capture_default_str();

    LabArgs la;
    auto* lab = app.add_subcommand("clt-lab", "KS distance of a normalized quadratic form to its limit law");
    lab->add_option("--theorem", la.theorem, "t23-normal | t23-chisq | t24")->capture_default_str();
    lab->add_option("--n", la.n)->capture_default_str();
    lab->add_option("--alpha", la.alpha)->capture_default_str();
    lab->add_option("--h", la.h, "Bandwidth or rate:p for h = n^-p")->capture_default_str();
    lab->add_option("--reps", la.reps)->capture_default_str();
    lab->add_option("--shape", la.shape, "power | fractional")->capture_default_str();
    lab->add_option("--j-max", la.j_max, "Ladder length (0: default)");

    ConstantsArgs ca;
    auto* consts = app.add_subcommand("constants", "Kernel constants K2, Delta0, A_alpha, A*_alpha");
    consts->add_option("--kernel", ca.kernel)->capture_default_str();
    consts->add_option("--alpha", ca.alpha)->capture_default_str();
    consts->add_option("--n", ca.n)->capture_default_str();
    consts->add_option("--tol", ca.tol)->capture_default_str();

    McArgs ma;
    auto* mc = app.add_subcommand("mc", "Monte Carlo size/power study; writes <stem>.csv and <stem>.json");
    mc->add_option("--stem", ma.output, "Output stem (overrides output_path)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }
    ma.seed_given = app.count("--seed") > 0;
    ma.threads_given = app.count("--threads") > 0;

    try {
        if (*gen) return run_generate(g, ga);
        if (*test) return run_test(g, ta);
        if (*est) return run_estimate(g, ea);
        if (*boot) return run_bootstrap(g, ba);
        if (*lab) return run_lab_cmd(g, la);
        if (*consts) return run_constants(g, ca);
        if (*mc) return run_mc(g, ma);
    } catch (const EmptyAdmissibleSet& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::out_of_range& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIoError;
    }
    return 0;
}
