#include "lrdspec/lrd_core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lrdspec/fft.hpp"

namespace lrdspec {

namespace {

double beta_fn(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream msg;
        msg << "alpha must lie in (0, 1), got " << alpha;
        throw std::invalid_argument(msg.str());
    }
}

// Pairwise summation keeps sum_of_squares accurate to ~1e-15 for 10^6+ terms.
double pairwise_sum_sq(const double* p, std::size_t n) {
    if (n <= 64) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += p[i] * p[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum_sq(p, h) + pairwise_sum_sq(p + h, n - h);
}

}  // namespace

void validate(const LrdParams& params, bool strict) {
    check_alpha(params.alpha);
    if (strict && !(params.alpha > 0.5)) {
        std::ostringstream msg;
        msg << "strict mode requires 1/2 < alpha < 1, got " << params.alpha;
        throw std::invalid_argument(msg.str());
    }
    if (!(params.eta > 0.0) || !std::isfinite(params.eta)) {
        std::ostringstream msg;
        msg << "eta must be positive and finite, got " << params.eta;
        throw std::invalid_argument(msg.str());
    }
}

LrdParams LrdParams::make(double alpha, double eta, bool strict) {
    LrdParams p{alpha, eta};
    validate(p, strict);
    return p;
}

double CoefficientLadder::tail_bound() const {
    const double J = static_cast<double>(j_max());
    double per_side = 0.0;
    if (shape_ == LadderShape::power) {
        per_side = scale_ * scale_ * std::pow(J, -alpha_) / alpha_;
    } else {
        // Wendel: Gamma(x+d)/Gamma(x+1) <= x^{d-1}, so psi_j <= (c/Gamma(d)) (j-1)^{d-1}.
        const double d = 0.5 * (1.0 - alpha_);
        const double lead = scale_ / std::tgamma(d);
        per_side = lead * lead * (std::pow(J, -(1.0 + alpha_)) + std::pow(J, -alpha_) / alpha_);
    }
    return side_ == LadderSide::one_sided ? per_side : 2.0 * per_side;
}

double CoefficientLadder::asymptotic_eta() const {
    const double c2 = scale_ * scale_;
    if (shape_ == LadderShape::fractional) {
        const double d = 0.5 * (1.0 - alpha_);
        return c2 * std::tgamma(1.0 - 2.0 * d) / (std::tgamma(d) * std::tgamma(1.0 - d));
    }
    const double a = 0.5 * (1.0 - alpha_);
    if (side_ == LadderSide::one_sided) return c2 * beta_fn(a, alpha_);
    // Two-sided: integral over R of |x|^{-b}|x+1|^{-b}, b = (1+alpha)/2.
    return c2 * (2.0 * beta_fn(a, alpha_) + beta_fn(a, a));
}

const char* to_string(LadderShape shape) noexcept {
    return shape == LadderShape::power ? "power" : "fractional";
}

const char* to_string(LadderSide side) noexcept {
    return side == LadderSide::one_sided ? "one-sided" : "two-sided-no-zero";
}

std::string CoefficientLadder::describe() const {
    std::ostringstream os;
    os.precision(10);
    os << "ladder shape=" << to_string(shape_) << " side=" << to_string(side_) << " alpha=" << alpha_
       << " scale=" << scale_ << " j_max=" << j_max() << " tail_bound=" << tail_bound();
    return os.str();
}

CoefficientLadder make_ladder(double alpha, ScaleRule rule, std::size_t j_max, LadderSide side,
                              LadderShape shape) {
    check_alpha(alpha);
    if (j_max < 1) throw std::invalid_argument("j_max must be at least 1");
    if (shape == LadderShape::fractional && side != LadderSide::one_sided)
        throw std::invalid_argument("the fractional ladder is one-sided only");

    CoefficientLadder ladder;
    ladder.alpha_ = alpha;
    ladder.side_ = side;
    ladder.shape_ = shape;
    auto& psi = ladder.coefficients_;
    psi.resize(j_max);
    if (shape == LadderShape::power) {
        const double expo = -0.5 * (1.0 + alpha);
        for (std::size_t j = 1; j <= j_max; ++j) psi[j - 1] = std::pow(static_cast<double>(j), expo);
    } else {
        const double d = 0.5 * (1.0 - alpha);
        psi[0] = 1.0;
        for (std::size_t j = 1; j < j_max; ++j)
            psi[j] = psi[j - 1] * (static_cast<double>(j) - 1.0 + d) / static_cast<double>(j);
    }
    const double unit_ss = pairwise_sum_sq(psi.data(), psi.size()) * (side == LadderSide::one_sided ? 1.0 : 2.0);

    double c = 0.0;
    switch (rule.kind) {
        case ScaleRule::Kind::explicit_scale:
            if (!(rule.value > 0.0) || !std::isfinite(rule.value))
                throw std::invalid_argument("explicit ladder scale must be positive");
            c = rule.value;
            break;
        case ScaleRule::Kind::sqrt_alpha:
            c = std::sqrt(alpha);
            break;
        case ScaleRule::Kind::variance_target:
            if (!(rule.value > 0.0) || !std::isfinite(rule.value))
                throw std::invalid_argument("variance target must be positive");
            c = std::sqrt(rule.value / unit_ss);
            break;
    }
    for (double& v : psi) v *= c;
    ladder.scale_ = c;
    ladder.sum_of_squares_ = unit_ss * c * c;
    return ladder;
}

std::size_t default_j_max(std::size_t n) noexcept { return std::max<std::size_t>(1'000'000, 50 * n); }

double autocovariance(const CoefficientLadder& ladder, long k) {
    const auto psi = ladder.coefficients();
    const auto J = static_cast<long>(psi.size());
    const long a = std::abs(k);
    if (ladder.side() == LadderSide::one_sided) {
        double s = 0.0;
        for (long j = 0; j + a < J; ++j) s += psi[j] * psi[j + a];
        return s;
    }
    // Index set m in [-J, J] \ {0}; coefficient at m is psi_|m|.
    auto coef = [&](long m) { return m == 0 ? 0.0 : psi[std::abs(m) - 1]; };
    double s = 0.0;
    for (long m = -J; m + a <= J; ++m) s += coef(m) * coef(m + a);
    return s;
}

std::vector<double> autocovariances(const CoefficientLadder& ladder, std::size_t max_lag) {
    const auto psi = ladder.coefficients();
    std::vector<double> filter;
    if (ladder.side() == LadderSide::one_sided) {
        filter.assign(psi.begin(), psi.end());
    } else {
        filter.assign(2 * psi.size() + 1, 0.0);
        const std::size_t J = psi.size();
        for (std::size_t j = 1; j <= J; ++j) {
            filter[J + j] = psi[j - 1];
            filter[J - j] = psi[j - 1];
        }
    }
    const std::size_t len = filter.size();
    const std::size_t lags = std::min(max_lag, len - 1) + 1;
    std::vector<double> out(max_lag + 1, 0.0);
    if (len * lags <= 400'000) {
        for (std::size_t k = 0; k < lags; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j + k < len; ++j) s += filter[j] * filter[j + k];
            out[k] = s;
        }
        return out;
    }
    const std::size_t m = fft_friendly_size(len + lags);
    RealFft fft(m);
    std::vector<double> buf(m, 0.0);
    std::copy(filter.begin(), filter.end(), buf.begin());
    std::vector<std::complex<double>> spec(fft.spectrum_size());
    fft.forward(buf, spec);
    for (auto& z : spec) z = std::norm(z);
    fft.inverse(spec, buf);
    for (std::size_t k = 0; k < lags; ++k) out[k] = buf[k] / static_cast<double>(m);
    return out;
}

InnovationDist InnovationDist::standard_normal() { return {}; }

InnovationDist InnovationDist::normalized_chi_squared() {
    InnovationDist d;
    d.kind_ = Kind::normalized_chi_squared_2;
    d.name_ = "normalized-chi-squared-2";
    d.fourth_moment_ = 9.0;  // E(E-1)^4 for E ~ Exp(1)
    return d;
}

InnovationDist InnovationDist::custom(std::string name, Sampler sampler, double fourth_moment) {
    if (!sampler) throw std::invalid_argument("custom innovation needs a sampler");
    if (!(fourth_moment >= 1.0)) throw std::invalid_argument("custom innovation: E[eta^4] must be >= 1");
    InnovationDist d;
    d.kind_ = Kind::custom;
    d.name_ = std::move(name);
    d.fourth_moment_ = fourth_moment;
    d.sampler_ = std::move(sampler);
    return d;
}

double InnovationDist::sample(Engine& eng) const {
    switch (kind_) {
        case Kind::standard_normal: {
            std::normal_distribution<double> nd;
            return nd(eng);
        }
        case Kind::normalized_chi_squared_2: {
            std::exponential_distribution<double> ed(1.0);
            return ed(eng) - 1.0;
        }
        case Kind::custom:
            return sampler_(eng);
    }
    return 0.0;
}

void InnovationDist::fill(Engine& eng, std::span<double> out) const {
    switch (kind_) {
        case Kind::standard_normal: {
            std::normal_distribution<double> nd;
            for (double& v : out) v = nd(eng);
            return;
        }
        case Kind::normalized_chi_squared_2: {
            std::exponential_distribution<double> ed(1.0);
            for (double& v : out) v = ed(eng) - 1.0;
            return;
        }
        case Kind::custom:
            for (double& v : out) v = sampler_(eng);
            return;
    }
}

// One-sided: filter f[m] = psi_m (f[0] = 0); signal index i is time i - J, so
// e_t = c[t + J]. Two-sided: filter g[m + J] = psi_|m|, e_t = c[t + 2J].
LadderGenerator::LadderGenerator(CoefficientLadder ladder, std::size_t n) : ladder_(std::move(ladder)), n_(n) {
    if (n_ == 0) return;
    const auto psi = ladder_.coefficients();
    const std::size_t J = psi.size();
    if (ladder_.side() == LadderSide::one_sided) {
        std::vector<double> f(J + 1, 0.0);
        std::copy(psi.begin(), psi.end(), f.begin() + 1);
        conv_ = std::make_unique<WindowedConvolver>(std::move(f), n_ + J - 1, J, n_);
    } else {
        std::vector<double> g(2 * J + 1, 0.0);
        for (std::size_t j = 1; j <= J; ++j) {
            g[J + j] = psi[j - 1];
            g[J - j] = psi[j - 1];
        }
        conv_ = std::make_unique<WindowedConvolver>(std::move(g), n_ + 2 * J, 2 * J, n_);
    }
}

LadderGenerator::~LadderGenerator() = default;
LadderGenerator::LadderGenerator(LadderGenerator&&) noexcept = default;
LadderGenerator& LadderGenerator::operator=(LadderGenerator&&) noexcept = default;

std::size_t LadderGenerator::innovation_count() const noexcept { return conv_ ? conv_->signal_size() : 0; }

std::vector<double> LadderGenerator::from_innovations(std::span<const double> innovations) const {
    if (n_ == 0) return {};
    return conv_->apply(innovations);
}

std::vector<double> LadderGenerator::values(const InnovationDist& dist, std::uint64_t seed) const {
    if (n_ == 0) return {};
    Engine eng = make_engine(seed);
    std::vector<double> innov(innovation_count());
    dist.fill(eng, innov);
    return conv_->apply(innov);
}

TimeSeries LadderGenerator::generate(const InnovationDist& dist, std::uint64_t seed) const {
    TimeSeries ts;
    ts.values = values(dist, seed);
    ts.seed = seed;
    std::ostringstream os;
    os << ladder_.describe() << " innovations=" << dist.name() << " n=" << n_ << " seed=" << seed;
    ts.provenance = os.str();
    return ts;
}

TimeSeries generate(const CoefficientLadder& ladder, std::size_t n, const InnovationDist& dist,
                    std::uint64_t seed) {
    return LadderGenerator(ladder, n).generate(dist, seed);
}

void write_series_csv(std::ostream& os, std::span<const double> values) {
    os << "value\n";
    os.precision(std::numeric_limits<double>::max_digits10);
    for (double v : values) os << v << '\n';
    if (!os) throw std::runtime_error("failed writing series CSV");
}

std::vector<double> read_series_csv(std::istream& is) {
    std::string line;
    std::vector<double> out;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        line = line.substr(first, line.find_last_not_of(" \t") - first + 1);
        if (!header_seen) {
            header_seen = true;
            if (line == "value") continue;
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(line, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != line.size()) {
            std::ostringstream msg;
            msg << "series CSV line " << lineno << ": not a number: '" << line << "'";
            throw std::runtime_error(msg.str());
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace lrdspec
