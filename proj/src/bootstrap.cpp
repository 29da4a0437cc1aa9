#include "lrdspec/bootstrap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "lrdspec/log.hpp"
#include "lrdspec/parallel.hpp"
#include "lrdspec/rng.hpp"

namespace lrdspec {

namespace {

std::size_t resolve_j_max(std::size_t j_max, std::size_t n) { return j_max != 0 ? j_max : 50 * n; }

}  // namespace

// ---------------------------------------------------------------- truths

DesignTruth DesignTruth::null_linear(double alpha) {
    DesignTruth t;
    t.alpha = alpha;
    return t;
}

double DesignTruth::alternative_coefficient(std::size_t n) {
    if (n < 3) throw std::invalid_argument("the alternative coefficient needs n >= 3 (log log n > 0)");
    const double nd = static_cast<double>(n);
    return std::sqrt(std::log(std::log(nd)) / nd);
}

DesignTruth DesignTruth::quadratic_alternative(std::size_t n, double alpha) {
    DesignTruth t = null_linear(alpha);
    t.quadratic = alternative_coefficient(n);
    return t;
}

Dataset DesignTruth::generate(std::size_t n, std::uint64_t seed) const { return DesignSampler(*this, n).draw(seed); }

DesignSampler::DesignSampler(DesignTruth truth, std::size_t n)
    : truth_(std::move(truth)),
      x_(fixed_design_points(n)),
      gen_(make_ladder(truth_.alpha, ScaleRule::sqrt_alpha(), resolve_j_max(truth_.j_max, n), LadderSide::one_sided,
                       truth_.shape),
           n) {}

Dataset DesignSampler::draw(std::uint64_t seed) const {
    auto e = gen_.values(truth_.innovation, seed);
    for (std::size_t t = 0; t < e.size(); ++t)
        e[t] += truth_.intercept + truth_.slope * x_[t] + truth_.quadratic * x_[t] * x_[t];
    Dataset d;
    d.design = DesignKind::fixed;
    d.x = x_;
    d.y = std::move(e);
    return d;
}

// ---------------------------------------------------------------- statistic on a grid

L3nPipeline L3nPipeline::make(std::size_t n, ModelKind model, KernelSpec kernel, WhittleConfig whittle,
                              unsigned threads) {
    whittle.validate();
    L3nPipeline p;
    p.n = n;
    p.model = model;
    p.a_star = std::make_shared<const AStarTable>(kernel, n, whittle.alpha_lo, whittle.alpha_hi, 1e-6, threads);
    p.kernel = std::move(kernel);
    p.whittle = whittle;
    return p;
}

namespace {

double a_star_for(const L3nPipeline& pipe, double alpha) {
    if (pipe.a_star && alpha >= pipe.a_star->alpha_lo() && alpha <= pipe.a_star->alpha_hi())
        return (*pipe.a_star)(alpha);
    return compute_constants(pipe.kernel, alpha, pipe.n, 1e-6).a_alpha_star;
}

}  // namespace

GridStatistics l3n_on_grid(const L3nPipeline& pipe, const Dataset& data, std::span<const double> h_grid,
                           std::optional<LrdParams> lambda) {
    if (data.design != DesignKind::fixed) throw std::invalid_argument("L3n is defined for the fixed design");
    if (data.n() != pipe.n) throw std::invalid_argument("dataset length differs from the pipeline's n");
    GridStatistics g;
    g.fitted = fit(data, pipe.model);
    g.residuals = residuals(data, g.fitted);
    double ss = 0.0;
    for (double u : g.residuals) ss += u * u;
    g.sigma2 = ss / static_cast<double>(pipe.n);
    g.lambda = lambda ? *lambda : estimate(g.residuals, pipe.whittle).lambda;
    validate(g.lambda, /*strict=*/true);
    const double a_star = a_star_for(pipe, g.lambda.alpha);
    const auto lags = lag_products(g.residuals);
    g.h.assign(h_grid.begin(), h_grid.end());
    g.values.reserve(h_grid.size());
    for (double h : h_grid)
        g.values.push_back(l3n_numerator(lags, h, g.lambda, pipe.kernel) / sigma3n(pipe.n, h, g.lambda, a_star));
    return g;
}

// ---------------------------------------------------------------- configuration

const char* to_string(BootstrapMethod m) noexcept {
    return m == BootstrapMethod::parametric_41 ? "parametric-41" : "block-42";
}

BootstrapMethod bootstrap_method_from_name(const std::string& name) {
    if (name == "41" || name == "parametric" || name == "parametric-41") return BootstrapMethod::parametric_41;
    if (name == "42" || name == "block" || name == "block-42") return BootstrapMethod::block_42;
    throw std::invalid_argument("unknown bootstrap method '" + name + "' (expected 41 or 42)");
}

void BootstrapConfig::validate() const {
    if (M < 1) throw std::invalid_argument("bootstrap ensemble size M must be at least 1");
    if (method == BootstrapMethod::block_42 && J < 1)
        throw std::invalid_argument("block bootstrap needs J >= 1 resamples");
}

double upper_quantile(std::span<const double> sample, double r) {
    if (sample.empty()) throw std::invalid_argument("quantile of an empty ensemble");
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("level r must lie in [0, 1)");
    if (r == 0.0) return std::numeric_limits<double>::infinity();
    std::vector<double> v(sample.begin(), sample.end());
    const double m = static_cast<double>(v.size());
    auto k = static_cast<std::size_t>(std::ceil((1.0 - r) * m - 1e-9));
    k = std::clamp<std::size_t>(k, 1, v.size());
    std::nth_element(v.begin(), v.begin() + static_cast<long>(k - 1), v.end());
    return v[k - 1];
}

// ---------------------------------------------------------------- block bootstrap

std::size_t block_length(std::size_t n) {
    auto l = static_cast<std::size_t>(std::cbrt(static_cast<double>(n)));
    while ((l + 1) * (l + 1) * (l + 1) <= n) ++l;
    while (l > 1 && l * l * l > n) --l;
    return std::max<std::size_t>(l, 1);
}

BlockResampler::BlockResampler(double alpha, std::size_t n, std::size_t j_max)
    : n_(n),
      gen_(make_ladder(alpha, ScaleRule::sqrt_alpha(), resolve_j_max(j_max, n), LadderSide::one_sided,
                       LadderShape::power),
           n) {
    if (n < 8) throw std::invalid_argument("block bootstrap needs n >= 8");
}

std::vector<double> BlockResampler::template_series(std::uint64_t seed) const {
    return gen_.values(InnovationDist::standard_normal(), derive_seed(seed, {0}));
}

std::vector<double> BlockResampler::draw(std::optional<double> sigma_tilde, std::size_t J,
                                         std::uint64_t seed) const {
    if (J < 1) throw std::invalid_argument("block bootstrap needs J >= 1 resamples");
    const auto tmpl = template_series(seed);
    const std::size_t l = block_length(n_);
    const std::size_t starts = n_ - l + 1;
    Engine eng = make_engine(derive_seed(seed, {1}));
    std::vector<double> avg(n_, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t pos = 0; pos < n_; pos += l) {
            const auto s =
                std::min(static_cast<std::size_t>(uniform01(eng) * static_cast<double>(starts)), starts - 1);
            const std::size_t len = std::min(l, n_ - pos);
            for (std::size_t i = 0; i < len; ++i) avg[pos + i] += tmpl[s + i];
        }
    }
    const double inv = 1.0 / static_cast<double>(J);
    for (double& v : avg) v *= inv;
    if (sigma_tilde) {
        double ss = 0.0;
        for (double v : avg) ss += v * v;
        const double current = std::sqrt(ss / static_cast<double>(n_));
        if (current > 0.0) {
            const double f = *sigma_tilde / current;
            for (double& v : avg) v *= f;
        }
    }
    return avg;
}

std::vector<double> block_resample(const LrdParams& lambda_tilde, std::optional<double> sigma_tilde, std::size_t n,
                                   std::size_t J, std::uint64_t seed, std::size_t j_max) {
    validate(lambda_tilde);
    return BlockResampler(lambda_tilde.alpha, n, j_max).draw(sigma_tilde, J, seed);
}

BootstrapErrorSource::BootstrapErrorSource(const LrdParams& lambda_tilde, double sigma2_tilde, std::size_t n,
                                           const BootstrapConfig& config)
    : config_(config), sigma2_(sigma2_tilde) {
    config.validate();
    validate(lambda_tilde);
    if (!(sigma2_tilde > 0.0)) throw std::invalid_argument("bootstrap needs a positive residual variance");
    if (config.method == BootstrapMethod::parametric_41) {
        ladder_.emplace(make_ladder(lambda_tilde.alpha, ScaleRule::variance_target(sigma2_tilde),
                                    resolve_j_max(config.j_max, n), config.side, LadderShape::power),
                        n);
    } else {
        blocks_.emplace(lambda_tilde.alpha, n, config.j_max);
    }
}

std::vector<double> BootstrapErrorSource::draw(std::size_t member) const {
    const std::uint64_t seed = derive_seed(config_.base_seed, {member});
    if (ladder_) return ladder_->values(config_.innovation, seed);
    return blocks_->draw(std::sqrt(sigma2_), config_.J, seed);
}

// ---------------------------------------------------------------- ensembles

BootstrapEnsemble bootstrap_ensemble(const L3nPipeline& pipe, const ParametricModel& fitted,
                                     const LrdParams& lambda_tilde, double sigma2_tilde,
                                     std::span<const double> h_grid, const BootstrapConfig& config) {
    if (!fitted.fitted()) throw std::invalid_argument("bootstrap needs a fitted null model");
    const BootstrapErrorSource source(lambda_tilde, sigma2_tilde, pipe.n, config);
    const std::size_t n = pipe.n;
    const auto x = fixed_design_points(n);
    std::vector<double> mean(n);
    for (std::size_t t = 0; t < n; ++t) mean[t] = fitted.predict(x[t]);

    BootstrapEnsemble ens;
    ens.h.assign(h_grid.begin(), h_grid.end());
    ens.values.assign(h_grid.size(), std::vector<double>(config.M));
    parallel_for(config.M, config.threads, [&](std::size_t m) {
        std::vector<double> e = source.draw(m);
        for (std::size_t t = 0; t < n; ++t) e[t] += mean[t];
        Dataset star;
        star.design = DesignKind::fixed;
        star.x = x;
        star.y = std::move(e);
        const auto g = l3n_on_grid(pipe, star, h_grid);
        for (std::size_t k = 0; k < h_grid.size(); ++k) ens.values[k][m] = g.values[k];
    });
    return ens;
}

CriticalValue bootstrap_critical_value(const L3nPipeline& pipe, const Dataset& data, const LrdParams& lambda_tilde,
                                       double h, double r, const BootstrapConfig& config) {
    if (data.design != DesignKind::fixed) throw std::invalid_argument("the bootstrap is defined for the fixed design");
    const auto fitted = fit(data, pipe.model);
    const auto u = residuals(data, fitted);
    double ss = 0.0;
    for (double v : u) ss += v * v;
    const std::array<double, 1> grid{h};
    auto ens = bootstrap_ensemble(pipe, fitted, lambda_tilde, ss / static_cast<double>(u.size()), grid, config);
    CriticalValue cv;
    cv.r = r;
    cv.h = h;
    cv.ensemble = std::move(ens.values[0]);
    cv.l_star = upper_quantile(cv.ensemble, r);
    return cv;
}

// ---------------------------------------------------------------- size and power

double binomial_se(double p, std::size_t reps) {
    if (reps == 0) return 0.0;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(reps));
}

double SizePower::joint_se() const { return std::hypot(gamma_se, beta_se); }

RejectionRates rejection_rates(const L3nPipeline& pipe, const DesignTruth& truth, std::span<const double> h_grid,
                               double r, std::size_t outer_reps, const BootstrapConfig& config, std::uint64_t stream) {
    if (outer_reps < 1) throw std::invalid_argument("size/power needs at least one outer replication");
    if (h_grid.empty()) throw std::invalid_argument("size/power needs a nonempty bandwidth grid");
    config.validate();
    const DesignSampler sampler(truth, pipe.n);
    std::vector<std::vector<char>> reject(outer_reps, std::vector<char>(h_grid.size(), 0));
    BootstrapConfig inner = config;
    inner.threads = 1;
    parallel_for(outer_reps, config.threads, [&](std::size_t i) {
        const auto data = sampler.draw(derive_seed(config.base_seed, {stream, i, 0}));
        const auto obs = l3n_on_grid(pipe, data, h_grid);
        BootstrapConfig cfg = inner;
        cfg.base_seed = derive_seed(config.base_seed, {stream, i, 1});
        const auto ens = bootstrap_ensemble(pipe, obs.fitted, obs.lambda, obs.sigma2, h_grid, cfg);
        for (std::size_t k = 0; k < h_grid.size(); ++k)
            reject[i][k] = obs.values[k] > upper_quantile(ens.values[k], r) ? 1 : 0;
    });
    RejectionRates out;
    out.h.assign(h_grid.begin(), h_grid.end());
    out.replications = outer_reps;
    for (std::size_t k = 0; k < h_grid.size(); ++k) {
        std::size_t hits = 0;
        for (const auto& row : reject) hits += static_cast<std::size_t>(row[k]);
        const double p = static_cast<double>(hits) / static_cast<double>(outer_reps);
        out.rate.push_back(p);
        out.standard_error.push_back(binomial_se(p, outer_reps));
    }
    return out;
}

SizePower size_power(const L3nPipeline& pipe, double h, const DesignTruth& null_truth, const DesignTruth& alt_truth,
                     double r, std::size_t outer_reps, const BootstrapConfig& config) {
    const std::array<double, 1> grid{h};
    const auto g = rejection_rates(pipe, null_truth, grid, r, outer_reps, config, 0);
    const auto b = rejection_rates(pipe, alt_truth, grid, r, outer_reps, config, 1);
    return {g.rate[0], b.rate[0], g.standard_error[0], b.standard_error[0]};
}

// ---------------------------------------------------------------- bandwidth selection

BandwidthSearch select_h_from_curves(std::span<const double> grid, std::span<const double> gamma_n,
                                     std::span<const double> beta_n, double r, double epsilon) {
    if (grid.empty()) throw std::invalid_argument("bandwidth grid is empty");
    if (gamma_n.size() != grid.size() || beta_n.size() != grid.size())
        throw std::invalid_argument("size/power curves must match the bandwidth grid");
    if (!(epsilon > 0.0 && epsilon < r)) throw std::invalid_argument("band half-width needs 0 < epsilon < r");
    BandwidthSearch s;
    s.grid.assign(grid.begin(), grid.end());
    s.gamma_n.assign(gamma_n.begin(), gamma_n.end());
    s.beta_n.assign(beta_n.begin(), beta_n.end());
    s.r = r;
    s.epsilon = epsilon;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (gamma_n[k] > r - epsilon && gamma_n[k] < r + epsilon) s.admissible.push_back(k);
    if (s.admissible.empty()) {
        std::ostringstream msg;
        msg << "no bandwidth has size within (" << r - epsilon << ", " << r + epsilon
            << "); widen the h grid or increase epsilon";
        throw EmptyAdmissibleSet(msg.str());
    }
    std::size_t best = s.admissible.front();
    for (std::size_t k : s.admissible)
        if (beta_n[k] > beta_n[best] || (beta_n[k] == beta_n[best] && grid[k] < grid[best])) best = k;
    s.selected = best;
    s.h_test = grid[best];
    return s;
}

BandwidthSearch select_h_test(const L3nPipeline& pipe, std::span<const double> grid, double r, double epsilon,
                              const DesignTruth& null_truth, const DesignTruth& alt_truth, std::size_t outer_reps,
                              const BootstrapConfig& config) {
    const auto g = rejection_rates(pipe, null_truth, grid, r, outer_reps, config, 0);
    const auto b = rejection_rates(pipe, alt_truth, grid, r, outer_reps, config, 1);
    return select_h_from_curves(grid, g.rate, b.rate, r, epsilon);
}

namespace {

std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
    if (points < 1) throw std::invalid_argument("grid needs at least one point");
    std::vector<double> g(points);
    if (points == 1) {
        g[0] = lo;
        return g;
    }
    const double step = std::log(hi / lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
    g.back() = hi;
    return g;
}

}  // namespace

std::vector<double> default_test_grid(std::size_t n, std::size_t points) {
    const double nd = static_cast<double>(n);
    return geometric_grid(std::pow(nd, -0.8), std::pow(nd, -0.2), points);
}

double cv_score(const Dataset& data, double h, const KernelSpec& kernel) {
    const std::size_t n = data.n();
    if (n < 3) throw std::invalid_argument("cross-validation needs n >= 3");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
    const auto& x = data.x;
    const auto& y = data.y;
    double acc = 0.0;
    if (data.design == DesignKind::fixed) {
        // x_t - x_s = (t - s)/n: one kernel weight per lag.
        std::vector<double> w(n);
        const double nh = static_cast<double>(n) * h;
        for (std::size_t k = 0; k < n; ++k) w[k] = kernel(static_cast<double>(k) / nh);
        for (std::size_t t = 0; t < n; ++t) {
            double num = 0.0, den = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                if (s == t) continue;
                const double b = w[s > t ? s - t : t - s];
                num += b * y[s];
                den += b;
            }
            if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
            const double r = y[t] - num / den;
            acc += r * r;
        }
    } else {
        for (std::size_t t = 0; t < n; ++t) {
            double num = 0.0, den = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                if (s == t) continue;
                const double b = kernel((x[t] - x[s]) / h);
                num += b * y[s];
                den += b;
            }
            if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
            const double r = y[t] - num / den;
            acc += r * r;
        }
    }
    return acc / static_cast<double>(n);
}

CvSearch select_h_cv(const Dataset& data, const CvConfig& config, const KernelSpec& kernel) {
    const std::size_t n = data.n();
    if (n < 3) throw std::invalid_argument("cross-validation needs n >= 3");
    if (!(config.c0 > 0.0 && config.c0 < 1.0 && config.c1 > 0.0 && config.c1 < config.c2))
        throw std::invalid_argument("cross-validation bounds need 0 < c0 < 1 and 0 < c1 < c2");
    const double nd = static_cast<double>(n);
    const double lo = config.c1 / nd;
    const double hi = config.c2 * std::pow(nd, -(1.0 - config.c0));
    if (!(lo < hi)) throw std::invalid_argument("cross-validation interval [c1/n, c2 n^{-(1-c0)}] is empty");
    CvSearch s;
    s.grid = geometric_grid(lo, hi, config.points);
    std::size_t degenerate = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        const double v = cv_score(data, s.grid[i], kernel);
        s.scores.push_back(v);
        if (!std::isfinite(v)) ++degenerate;
        if (v < best) {
            best = v;
            s.selected = i;
        }
    }
    if (!std::isfinite(best)) throw NumericalError("every cross-validation bandwidth left a point with no kernel mass");
    if (degenerate > 0) {
        std::ostringstream msg;
        msg << "cross-validation: " << degenerate << " of " << s.grid.size()
            << " bandwidths left a point with no kernel mass and were excluded";
        warn(msg.str());
    }
    s.h_cv = s.grid[s.selected];
    return s;
}

}  // namespace lrdspec
