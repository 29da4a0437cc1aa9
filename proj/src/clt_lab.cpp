#include "lrdspec/clt_lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lrdspec/parallel.hpp"
#include "lrdspec/rng.hpp"

namespace lrdspec {

const char* to_string(LabTheorem t) noexcept {
    switch (t) {
        case LabTheorem::t23_normal: return "t23-normal";
        case LabTheorem::t23_chisq: return "t23-chisq";
        case LabTheorem::t24: return "t24";
    }
    return "?";
}

LabTheorem lab_theorem_from_name(const std::string& name) {
    if (name == "t23-normal") return LabTheorem::t23_normal;
    if (name == "t23-chisq") return LabTheorem::t23_chisq;
    if (name == "t24") return LabTheorem::t24;
    throw std::invalid_argument("unknown theorem '" + name + "' (expected t23-normal, t23-chisq or t24)");
}

double BandwidthRule::h(std::size_t n) const {
    if (kind == Kind::explicit_value) return value;
    return std::pow(static_cast<double>(n), -value);
}

double BandwidthRule::exponent(std::size_t n) const {
    if (kind == Kind::rate) return value;
    return -std::log(value) / std::log(static_cast<double>(n));
}

void LabSpec::validate() const {
    if (n < 2) throw std::invalid_argument("lab n must be at least 2");
    if (replications < 50) throw std::invalid_argument("a lab needs at least 50 replications");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("lab alpha must lie in (0, 1)");
    if (!(scale > 0.0)) throw std::invalid_argument("lab ladder scale must be positive");
    const double h = h_rule.h(n);
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("lab bandwidth must be positive");

    const double p = h_rule.exponent(n);
    const double crit = 2.0 * (1.0 - alpha);
    std::ostringstream msg;
    msg << to_string(theorem) << " with alpha = " << alpha << " and h = n^{-" << p << "}: ";
    switch (theorem) {
        case LabTheorem::t23_normal:
            if (!(p > crit && p < 1.0))
                throw std::invalid_argument(msg.str() + "needs n^{2(1-alpha)} h -> 0 and nh -> inf, i.e. " +
                                            std::to_string(crit) + " < p < 1");
            break;
        case LabTheorem::t23_chisq:
            if (!(p > 0.0 && p < crit))
                throw std::invalid_argument(msg.str() + "needs h -> 0 and n^{2(1-alpha)} h -> inf, i.e. 0 < p < " +
                                            std::to_string(crit));
            break;
        case LabTheorem::t24:
            if (!(p > 0.0 && p < 1.0))
                throw std::invalid_argument(msg.str() + "needs h -> 0 and nh -> inf, i.e. 0 < p < 1");
            if (!(alpha > 0.5)) throw std::invalid_argument(msg.str() + "needs 1/2 < alpha < 1");
            break;
    }
}

double reference_cdf(ReferenceLaw target, double x) {
    if (target == ReferenceLaw::standard_normal) return 0.5 * std::erfc(-x / std::sqrt(2.0));
    return x <= 0.0 ? 0.0 : std::erf(std::sqrt(0.5 * x));
}

double ks_distance(std::vector<double> sample, ReferenceLaw target) {
    if (sample.empty()) throw std::invalid_argument("KS distance of an empty sample");
    std::sort(sample.begin(), sample.end());
    const double m = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = reference_cdf(target, sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return d;
}

LabStatistic::LabStatistic(const LabSpec& spec)
    : spec_(spec),
      ladder_(make_ladder(spec.alpha, ScaleRule::explicit_scale(spec.scale),
                          spec.j_max ? spec.j_max : default_j_max(spec.n), LadderSide::one_sided, spec.shape)) {
    spec_.validate();
    h_ = spec_.h_rule.h(spec_.n);
    const double n = static_cast<double>(spec_.n);
    const double a = spec_.alpha;
    const double eta = ladder_.asymptotic_eta();
    switch (spec_.theorem) {
        case LabTheorem::t23_normal: {
            const double g0 = ladder_.sum_of_squares();
            sigma_ = std::sqrt(2.0 * n * n * h_ * g0 * g0 * kernel_k2(spec_.kernel));
            break;
        }
        case LabTheorem::t23_chisq:
            sigma_ = std::pow(n, 2.0 - a) * h_ * 2.0 * eta / ((1.0 - a) * (2.0 - a));
            break;
        case LabTheorem::t24: {
            gamma_ = autocovariances(ladder_, spec_.n - 1);
            const double a_alpha = kernel_a_alpha(spec_.kernel, a, 0, 1e-6);
            sigma_ = std::sqrt(8.0 * eta * eta * n * std::pow(n * h_, 3.0 - 2.0 * a) * a_alpha);
            break;
        }
    }
}

ReferenceLaw LabStatistic::target() const noexcept {
    return spec_.theorem == LabTheorem::t23_chisq ? ReferenceLaw::chi_squared_1 : ReferenceLaw::standard_normal;
}

double LabStatistic::operator()(std::span<const double> e, std::span<const double> x) const {
    if (e.size() != spec_.n) throw std::invalid_argument("lab path length differs from n");
    if (spec_.theorem != LabTheorem::t24) return kernel_quadratic_form(x, e, h_, spec_.kernel).m_hat / sigma_;

    const auto lags = lag_products(e);
    const double nh = static_cast<double>(spec_.n) * h_;
    double num = 0.0;
    for (std::size_t k = 1; k < spec_.n; ++k) {
        const double w = spec_.kernel(static_cast<double>(k) / nh);
        num += w * (lags.s[k] - static_cast<double>(spec_.n - k) * gamma_[k]);
    }
    return 2.0 * num / sigma_;
}

LawDistance run_lab(const LabSpec& spec) {
    const LabStatistic stat(spec);
    const LadderGenerator gen(stat.ladder(), spec.n);
    const bool random_design = spec.theorem != LabTheorem::t24;

    LawDistance out;
    out.sample.resize(spec.replications);
    parallel_for(spec.replications, spec.threads, [&](std::size_t i) {
        const auto e = gen.values(spec.innovation, derive_seed(spec.seed, {i, 0}));
        std::vector<double> x;
        if (random_design) {
            Engine eng = make_engine(derive_seed(spec.seed, {i, 1}));
            x.resize(spec.n);
            for (double& v : x) v = uniform01(eng);
        }
        out.sample[i] = stat(e, x);
    });
    out.target = stat.target();
    out.sample_size = spec.replications;
    out.h = stat.h();
    out.sigma = stat.sigma();
    out.ks_statistic = ks_distance(out.sample, out.target);
    return out;
}

namespace {

// psi at signed lag i (zero outside the index set).
double psi_at(const CoefficientLadder& ladder, long i) {
    const auto J = static_cast<long>(ladder.j_max());
    if (ladder.side() == LadderSide::one_sided) return (i >= 1 && i <= J) ? ladder.coefficients()[i - 1] : 0.0;
    if (i == 0 || std::abs(i) > J) return 0.0;
    return ladder.coefficients()[std::abs(i) - 1];
}

}  // namespace

double fourth_moment_closed_form(const CoefficientLadder& ladder, const std::array<long, 4>& idx,
                                 double innovation_fourth_moment) {
    const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end());
    const auto J = static_cast<long>(ladder.j_max());
    double cum = 0.0;
    if (innovation_fourth_moment != 3.0) {
        const long m_lo = *hi - J;
        const long m_hi = ladder.side() == LadderSide::one_sided ? *lo - 1 : *lo + J;
        for (long m = m_lo; m <= m_hi; ++m) {
            double p = 1.0;
            for (long a : idx) p *= psi_at(ladder, a - m);
            cum += p;
        }
    }
    auto g = [&](long k) { return autocovariance(ladder, k); };
    const auto [j, k, s, t] = idx;
    return (innovation_fourth_moment - 3.0) * cum + g(j - k) * g(s - t) + g(j - s) * g(k - t) + g(j - t) * g(k - s);
}

MomentCheck moment_oracle(const CoefficientLadder& ladder, const std::array<long, 4>& idx,
                          const InnovationDist& dist, std::size_t replications, std::uint64_t seed,
                          unsigned threads) {
    if (replications < 2) throw std::invalid_argument("moment oracle needs at least 2 replications");
    const auto [lo_it, hi_it] = std::minmax_element(idx.begin(), idx.end());
    const auto J = static_cast<long>(ladder.j_max());
    const bool one_sided = ladder.side() == LadderSide::one_sided;
    // Innovations eta_p for p in [first, last] cover every term of the four e's.
    const long first = *lo_it - J;
    const long last = one_sided ? *hi_it - 1 : *hi_it + J;
    const auto width = static_cast<std::size_t>(last - first + 1);

    std::vector<double> products(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
        Engine eng = make_engine(derive_seed(seed, {r}));
        std::vector<double> eta(width);
        dist.fill(eng, eta);
        double prod = 1.0;
        for (long a : idx) {
            double e = 0.0;
            for (long p = first; p <= last; ++p) e += psi_at(ladder, a - p) * eta[static_cast<std::size_t>(p - first)];
            prod *= e;
        }
        products[r] = prod;
    });

    const double m = static_cast<double>(replications);
    double mean = 0.0;
    for (double v : products) mean += v;
    mean /= m;
    double ss = 0.0;
    for (double v : products) ss += (v - mean) * (v - mean);

    MomentCheck out;
    out.closed_form = fourth_moment_closed_form(ladder, idx, dist.fourth_moment());
    out.mc_estimate = mean;
    out.standard_error = std::sqrt(ss / (m - 1.0) / m);
    out.z_score = out.standard_error > 0.0 ? (mean - out.closed_form) / out.standard_error : 0.0;
    return out;
}

}  // namespace lrdspec
