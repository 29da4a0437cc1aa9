#include "lrdspec/whittle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "lrdspec/fft.hpp"
#include "lrdspec/log.hpp"

namespace lrdspec {

namespace {

std::vector<std::complex<double>> dft(std::span<const double> u) {
    const std::size_t n = u.size();
    RealFft fft(n);
    std::vector<std::complex<double>> spec(fft.spectrum_size());
    fft.forward(u, spec);
    return spec;
}

}  // namespace

Periodogram periodogram(std::span<const double> u) {
    const std::size_t n = u.size();
    if (n < 4) throw std::invalid_argument("periodogram needs n >= 4");
    const auto spec = dft(u);
    Periodogram pg;
    pg.n = n;
    const std::size_t m = (n - 1) / 2;
    pg.frequencies.resize(m);
    pg.values.resize(m);
    const double scale = 1.0 / (2.0 * std::numbers::pi * static_cast<double>(n));
    for (std::size_t j = 1; j <= m; ++j) {
        pg.frequencies[j - 1] = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
        // |sum u_s e^{+isw}| = |sum u_s e^{-isw}| for real u.
        pg.values[j - 1] = std::norm(spec[j]) * scale;
    }
    return pg;
}

std::vector<double> periodogram_all_bins(std::span<const double> u) {
    const std::size_t n = u.size();
    if (n < 1) throw std::invalid_argument("periodogram needs a nonempty series");
    const auto spec = dft(u);
    const double scale = 1.0 / (2.0 * std::numbers::pi * static_cast<double>(n));
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = j <= n / 2 ? j : n - j;
        out[j] = std::norm(spec[k]) * scale;
    }
    return out;
}

const char* to_string(SpectralForm form) noexcept {
    return form == SpectralForm::power_sine ? "power_sine" : "power_ladder";
}

SpectralForm spectral_form_from_name(const std::string& name) {
    if (name == "power_sine") return SpectralForm::power_sine;
    if (name == "power_ladder") return SpectralForm::power_ladder;
    throw std::invalid_argument("unknown spectral model '" + name + "' (expected power_sine or power_ladder)");
}

double spectral_constant(const LrdParams& lambda) {
    return lambda.eta / (2.0 * std::tgamma(lambda.alpha) * std::cos(std::numbers::pi * lambda.alpha / 2.0));
}

namespace {

// zeta(z) for real z > 0, z != 1, by Euler-Maclaurin with N = 16 direct
// terms; the remainder after B_10 is near 1e-16 relative throughout. `powers`
// holds m^{-z} for m = 1..N. (std::riemann_zeta is ~60us on (0, 1).)
constexpr int kZetaTerms = 16;

double zeta_em(double z, const std::array<double, kZetaTerms + 1>& powers) {
    constexpr double N = kZetaTerms;
    constexpr std::array<double, 5> b2j_over_fact{1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0,
                                                  1.0 / 47900160.0};
    double acc = 0.0;
    for (int m = kZetaTerms - 1; m >= 1; --m) acc += powers[m];
    const double nz = powers[kZetaTerms];
    acc += N * nz / (z - 1.0) + 0.5 * nz;
    double rising = z;     // z (z+1) ... (z+2j-2)
    double npow = nz / N;  // N^{-z-2j+1}
    for (std::size_t j = 0; j < b2j_over_fact.size(); ++j) {
        acc += b2j_over_fact[j] * rising * npow;
        rising *= (z + 2.0 * j + 1.0) * (z + 2.0 * j + 2.0);
        npow /= N * N;
    }
    return acc;
}

// Li_s(e^mu) = Gamma(1-s)(-mu)^{s-1} + sum_k zeta(s-k) mu^k / k!, |mu| < 2 pi.
// For k >= 1 the reflection formula gives, with z = 1 - s + k,
// zeta(s-k)/k! = 2 (2 pi)^{-z} cos(pi z / 2) [Gamma(z)/k!] zeta(z).
struct PolylogSeries {
    double s;
    double gamma_1ms;
    std::vector<double> coef;  // zeta(s-k)/k!

    explicit PolylogSeries(double s_) : s(s_), gamma_1ms(std::tgamma(1.0 - s_)) {
        constexpr double pi = std::numbers::pi;
        double gamma_ratio = gamma_1ms;              // Gamma(1-s+k)/k!
        double scale = std::pow(2.0 * pi, s - 1.0);  // (2 pi)^{-z}
        std::array<double, kZetaTerms + 1> powers;   // m^{-z}
        for (int m = 1; m <= kZetaTerms; ++m) powers[m] = std::pow(m, -s);
        coef.push_back(zeta_em(s, powers));
        for (int m = 1; m <= kZetaTerms; ++m) powers[m] = 1.0 / (m * powers[m]);
        // cos(pi z / 2) cycles through (sin t, -cos t, -sin t, cos t) with t = pi (1-s)/2.
        const double st = std::sin(pi * (1.0 - s) / 2.0), ct = std::cos(pi * (1.0 - s) / 2.0);
        const std::array<double, 4> cosines{ct, -st, -ct, st};
        double pik = 1.0;
        for (int k = 1; k < 160; ++k) {
            gamma_ratio *= (k - s) / k;
            scale /= 2.0 * pi;
            for (int m = 2; m <= kZetaTerms; ++m) powers[m] /= m;
            pik *= pi;
            const double z = 1.0 - s + k;
            const double c = 2.0 * scale * cosines[k % 4] * gamma_ratio * zeta_em(z, powers);
            coef.push_back(c);
            // |c| ~ 2 (2 pi)^{-z} k^{-s}; pi^k |c| is negligible from here on.
            if (k > 20 && std::abs(c) * pik < 1e-18) break;
        }
    }

    std::complex<double> operator()(double w) const {
        // sum_k c_k (iw)^k split into even (real) and odd (imaginary) parts, Horner in -w^2.
        const double q = -w * w;
        double re = 0.0, im = 0.0;
        const std::size_t K = coef.size();
        for (std::size_t k = (K - 1) & ~std::size_t{1};; k -= 2) {
            re = re * q + coef[k];
            if (k == 0) break;
        }
        for (std::size_t k = (K - 1) | 1;; k -= 2) {
            if (k < K) im = im * q + coef[k];
            if (k == 1) break;
        }
        im *= w;
        // Gamma(1-s) (-iw)^{s-1} = Gamma(1-s) w^{s-1} e^{i pi (1-s)/2}.
        const double lead = gamma_1ms * std::pow(w, s - 1.0);
        const double phase = std::numbers::pi * (1.0 - s) / 2.0;
        return {re + lead * std::cos(phase), im + lead * std::sin(phase)};
    }
};

}  // namespace

std::complex<double> polylog_unit_circle(double s, double w) {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("polylog_unit_circle: order must lie in (0, 1)");
    if (!(w > 0.0 && w <= std::numbers::pi)) throw std::invalid_argument("polylog_unit_circle: need 0 < w <= pi");
    return PolylogSeries(s)(w);
}

std::vector<double> spectral_shape(SpectralForm form, double alpha, std::span<const double> freqs) {
    std::vector<double> out(freqs.size());
    if (form == SpectralForm::power_sine) {
        const double cf = spectral_constant({alpha, 1.0});
        for (std::size_t j = 0; j < freqs.size(); ++j)
            out[j] = cf * std::pow(std::abs(2.0 * std::sin(freqs[j] / 2.0)), alpha - 1.0);
        return out;
    }
    const double b = 0.5 * (1.0 + alpha);
    const double a = 0.5 * (1.0 - alpha);
    const double c2 = 1.0 / std::exp(std::lgamma(a) + std::lgamma(alpha) - std::lgamma(a + alpha));
    const PolylogSeries li(b);
    for (std::size_t j = 0; j < freqs.size(); ++j) out[j] = c2 / (2.0 * std::numbers::pi) * std::norm(li(freqs[j]));
    return out;
}

double spectral_density(SpectralForm form, double w, const LrdParams& lambda) {
    const std::array<double, 1> f{w};
    return lambda.eta * spectral_shape(form, lambda.alpha, f)[0];
}

namespace {

double objective_from_shape(const Periodogram& pg, std::span<const double> shape, double eta) {
    double acc = 0.0;
    for (std::size_t j = 0; j < shape.size(); ++j) {
        const double psi = eta * shape[j];
        acc += std::log(psi) + pg.values[j] / psi;
    }
    return acc / static_cast<double>(pg.n);
}

}  // namespace

double whittle_objective(const Periodogram& pg, const LrdParams& lambda, SpectralForm form) {
    validate(lambda);
    const auto shape = spectral_shape(form, lambda.alpha, pg.frequencies);
    return objective_from_shape(pg, shape, lambda.eta);
}

void WhittleConfig::validate() const {
    if (!(alpha_lo > 0.5 && alpha_lo < alpha_hi && alpha_hi < 1.0))
        throw std::invalid_argument("Whittle box needs 1/2 < alpha_lo < alpha_hi < 1");
    if (!(eta_lo > 0.0 && eta_lo < eta_hi && std::isfinite(eta_hi)))
        throw std::invalid_argument("Whittle box needs 0 < eta_lo < eta_hi < inf");
    if (grid_points < 2) throw std::invalid_argument("Whittle grid needs at least 2 points per axis");
    if (!(refine_tolerance > 0.0)) throw std::invalid_argument("Whittle refine tolerance must be positive");
}

namespace {

// Gamma(alpha, eta) = (sum log s_j + m log eta + (1/eta) sum I_j/s_j) / n with
// s the shape at alpha, so one pass per alpha serves every eta.
struct AlphaSums {
    double log_sum = 0.0;
    double ratio_sum = 0.0;
    double m = 0.0;
    double n = 0.0;

    AlphaSums() = default;
    AlphaSums(const Periodogram& pg, std::span<const double> shape)
        : m(static_cast<double>(shape.size())), n(static_cast<double>(pg.n)) {
        for (std::size_t j = 0; j < shape.size(); ++j) {
            log_sum += std::log(shape[j]);
            ratio_sum += pg.values[j] / shape[j];
        }
    }

    [[nodiscard]] double objective(double log_eta) const {
        return (log_sum + m * log_eta + ratio_sum * std::exp(-log_eta)) / n;
    }
};

// Bounded Nelder-Mead on (alpha, log eta); points are projected into the box.
class Refiner {
public:
    Refiner(const Periodogram& pg, const WhittleConfig& cfg) : pg_(pg), cfg_(cfg) {}

    double operator()(std::array<double, 2>& p) {
        p[0] = std::clamp(p[0], cfg_.alpha_lo, cfg_.alpha_hi);
        p[1] = std::clamp(p[1], std::log(cfg_.eta_lo), std::log(cfg_.eta_hi));
        ++evals;
        if (p[0] != cached_alpha_) {
            sums_ = AlphaSums(pg_, spectral_shape(cfg_.form, p[0], pg_.frequencies));
            cached_alpha_ = p[0];
        }
        return sums_.objective(p[1]);
    }

    std::size_t evals = 0;

private:
    const Periodogram& pg_;
    const WhittleConfig& cfg_;
    AlphaSums sums_;
    double cached_alpha_ = -1.0;
};

struct Vertex {
    std::array<double, 2> p;
    double f;
};

Vertex nelder_mead(Refiner& fn, std::array<double, 2> start, std::array<double, 2> step, double tol) {
    std::array<Vertex, 3> v;
    v[0].p = start;
    v[1].p = {start[0] + step[0], start[1]};
    v[2].p = {start[0], start[1] + step[1]};
    for (auto& x : v) x.f = fn(x.p);
    auto order = [&] { std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; }); };
    for (int iter = 0; iter < 2000; ++iter) {
        order();
        double spread = 0.0;
        for (int i = 1; i < 3; ++i)
            spread = std::max({spread, std::abs(v[i].p[0] - v[0].p[0]), std::abs(v[i].p[1] - v[0].p[1])});
        if (spread < tol) break;
        const std::array<double, 2> c{0.5 * (v[0].p[0] + v[1].p[0]), 0.5 * (v[0].p[1] + v[1].p[1])};
        auto along = [&](double t) {
            std::array<double, 2> q{c[0] + t * (v[2].p[0] - c[0]), c[1] + t * (v[2].p[1] - c[1])};
            const double f = fn(q);
            return Vertex{q, f};
        };
        const Vertex r = along(-1.0);
        if (r.f < v[0].f) {
            const Vertex e = along(-2.0);
            v[2] = e.f < r.f ? e : r;
        } else if (r.f < v[1].f) {
            v[2] = r;
        } else {
            const Vertex k = r.f < v[2].f ? along(-0.5) : along(0.5);
            if (k.f < std::min(r.f, v[2].f)) {
                v[2] = k;
            } else {
                for (int i = 1; i < 3; ++i) {
                    v[i].p = {0.5 * (v[i].p[0] + v[0].p[0]), 0.5 * (v[i].p[1] + v[0].p[1])};
                    v[i].f = fn(v[i].p);
                }
            }
        }
    }
    order();
    return v[0];
}

}  // namespace

WhittleResult estimate(const Periodogram& pg, const WhittleConfig& cfg) {
    cfg.validate();
    if (pg.values.empty()) throw std::invalid_argument("Whittle estimation needs a nonempty periodogram");
    if (pg.n < 64) {
        std::ostringstream msg;
        msg << "Whittle estimate from n = " << pg.n << " < 64 observations is unreliable";
        warn(msg.str());
    }
    if (std::all_of(pg.values.begin(), pg.values.end(), [](double v) { return v == 0.0; }))
        throw NumericalError(
            "Whittle objective is unbounded below (periodogram identically zero at all Fourier frequencies)");

    const std::size_t G = cfg.grid_points;
    const double le_lo = std::log(cfg.eta_lo), le_hi = std::log(cfg.eta_hi);
    WhittleResult res;
    res.grid_points = G * G;
    double best = INFINITY;
    std::array<double, 2> best_p{cfg.alpha_lo, le_lo};
    for (std::size_t i = 0; i < G; ++i) {
        const double a = cfg.alpha_lo + (cfg.alpha_hi - cfg.alpha_lo) * static_cast<double>(i) / (G - 1.0);
        const AlphaSums sums(pg, spectral_shape(cfg.form, a, pg.frequencies));
        for (std::size_t j = 0; j < G; ++j) {
            const double le = le_lo + (le_hi - le_lo) * static_cast<double>(j) / (G - 1.0);
            const double f = sums.objective(le);
            ++res.evaluations;
            if (f < best) {
                best = f;
                best_p = {a, le};
            }
        }
    }
    if (!std::isfinite(best)) throw NumericalError("Whittle objective is non-finite across the whole box");
    res.grid_best = {best_p[0], std::exp(best_p[1])};
    res.grid_objective = best;

    Refiner fn(pg, cfg);
    const std::array<double, 2> step{(cfg.alpha_hi - cfg.alpha_lo) / (G - 1.0), (le_hi - le_lo) / (G - 1.0)};
    const Vertex v = nelder_mead(fn, best_p, step, cfg.refine_tolerance);
    res.evaluations += fn.evals;
    if (std::isfinite(v.f) && v.f < best) {
        res.lambda = {v.p[0], std::exp(v.p[1])};
        res.objective = v.f;
        res.refined = true;
    } else {
        res.lambda = res.grid_best;
        res.objective = best;
    }
    if (res.lambda.eta <= cfg.eta_lo * (1.0 + 1e-9)) {
        res.lambda.eta = cfg.eta_lo;
        res.eta_clamped = true;
        std::ostringstream msg;
        msg << "Whittle eta estimate clamped to the lower bound " << cfg.eta_lo;
        warn(msg.str());
    }
    return res;
}

WhittleResult estimate(std::span<const double> u, const WhittleConfig& config) {
    if (u.size() < 4) throw std::invalid_argument("Whittle estimation needs n >= 4");
    return estimate(periodogram(u), config);
}

}  // namespace lrdspec
