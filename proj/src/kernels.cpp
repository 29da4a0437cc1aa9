#include "lrdspec/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <sstream>
#include <tuple>

#include "lrdspec/parallel.hpp"
#include "lrdspec/quadrature.hpp"

namespace lrdspec {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double gaussian_k(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double epanechnikov_k(double x) {
    const double a = std::abs(x);
    return a <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
}

}  // namespace

KernelSpec KernelSpec::gaussian() {
    KernelSpec k;
    k.kind = Kind::gaussian;
    k.name = "gaussian";
    k.support_bound = 10.0;
    k.tail_beta = 0.0;  // exponential tails satisfy the condition for every beta
    return k;
}

KernelSpec KernelSpec::epanechnikov() {
    KernelSpec k;
    k.kind = Kind::epanechnikov;
    k.name = "epanechnikov";
    k.support_bound = 1.0;
    k.tail_beta = 0.0;
    return k;
}

KernelSpec KernelSpec::custom(std::string name, std::function<double(double)> evaluator, double support_bound,
                              double tail_beta) {
    if (!evaluator) throw std::invalid_argument("custom kernel needs an evaluator");
    if (!(support_bound > 0.0) || !std::isfinite(support_bound))
        throw std::invalid_argument("custom kernel needs a finite positive support bound");
    if (!(tail_beta >= 0.0 && tail_beta < 0.5))
        throw std::invalid_argument("custom kernel tail exponent beta must lie in [0, 1/2)");
    KernelSpec k;
    k.kind = Kind::custom;
    k.name = std::move(name);
    k.evaluator = std::move(evaluator);
    k.support_bound = support_bound;
    k.tail_beta = tail_beta;
    return k;
}

double KernelSpec::operator()(double x) const {
    switch (kind) {
        case Kind::gaussian:
            return gaussian_k(x);
        case Kind::epanechnikov:
            return epanechnikov_k(x);
        case Kind::custom:
            return std::abs(x) <= support_bound ? evaluator(x) : 0.0;
    }
    return 0.0;
}

double eval(const KernelSpec& spec, double x) { return spec(x); }

KernelSpec kernel_from_name(const std::string& name) {
    if (name == "gaussian") return KernelSpec::gaussian();
    if (name == "epanechnikov") return KernelSpec::epanechnikov();
    throw std::invalid_argument("unknown kernel '" + name + "' (expected gaussian or epanechnikov)");
}

double kernel_mass(const KernelSpec& spec, double rel_tol) {
    const double R = spec.support_bound;
    return quad::integrate_pieces([&](double x) { return spec(x); }, -R, R, {0.0}, rel_tol).value;
}

double kernel_k2(const KernelSpec& spec, double rel_tol) {
    if (spec.kind == KernelSpec::Kind::gaussian) return 0.5 / std::sqrt(std::numbers::pi);
    if (spec.kind == KernelSpec::Kind::epanechnikov) return 0.6;
    const double R = spec.support_bound;
    return quad::integrate_pieces([&](double x) { const double k = spec(x); return k * k; }, -R, R, {0.0}, rel_tol)
        .value;
}

double kernel_second_moment(const KernelSpec& spec, double rel_tol) {
    if (spec.kind == KernelSpec::Kind::gaussian) return 1.0;
    if (spec.kind == KernelSpec::Kind::epanechnikov) return 0.2;
    const double R = spec.support_bound;
    return quad::integrate_pieces([&](double x) { return x * x * spec(x); }, -R, R, {0.0}, rel_tol).value;
}

double a_alpha_integrand(const KernelSpec& spec, double alpha, double x, double y, double z) {
    return std::pow(x, -alpha) * std::pow(y, -alpha) * (spec(z) * spec(x + y - z) + spec(z - x) * spec(z - y));
}

namespace {

void check_alpha_open(double alpha, double lo) {
    if (!(alpha > lo && alpha < 1.0)) {
        std::ostringstream msg;
        msg << "alpha must lie in (" << lo << ", 1), got " << alpha;
        throw std::invalid_argument(msg.str());
    }
}

// Tracks convergence over a family of nested integrals.
struct Ledger {
    bool converged = true;
    double worst_rel = 0.0;
    void note(const quad::QuadResult& r) {
        converged = converged && r.converged;
        if (r.value != 0.0) worst_rel = std::max(worst_rel, r.error / std::abs(r.value));
    }
};

// The A_alpha integral over X^3, X = [lo, hi] (hi = inf allowed), reduced by Fubini:
//   T2 = int_X g(z)^2 dz,            g(z) = int_X x^{-a} K(z - x) dx
//   T1 = int_X K(z) H(z) dz,         H(z) = int K(s - z) c(s) ds
// with c(s) = int_{x + y = s; x, y in X} x^{-a} y^{-a}, a Beta integral.
class AlphaIntegral {
public:
    AlphaIntegral(const KernelSpec& k, double alpha, double lo, double hi, double inner_tol)
        : k_(k), a_(alpha), lo_(lo), hi_(hi), tol_(inner_tol), R_(k.support_bound) {
        beta_ = std::exp(2.0 * std::lgamma(1.0 - a_) - std::lgamma(2.0 - 2.0 * a_));
    }

    // g(z) = int_X x^{-a} K(z - x) dx.
    double g(double z) {
        const double xa = std::max(lo_, z - R_);
        const double xb = std::min(hi_, z + R_);
        if (!(xb > xa)) return 0.0;
        quad::QuadResult r;
        if (xa >= 1.0) {
            r = quad::integrate_pieces([&](double x) { return std::pow(x, -a_) * k_(z - x); }, xa, xb, {z}, tol_);
        } else {
            // x = t^p removes the x^{-a} singularity: x^{-a} dx = p dt.
            const double p = 1.0 / (1.0 - a_);
            const double ta = std::pow(xa, 1.0 - a_), tb = std::pow(xb, 1.0 - a_);
            std::vector<double> br;
            if (z > xa && z < xb) br.push_back(std::pow(z, 1.0 - a_));
            r = quad::integrate_pieces([&](double t) { return p * k_(z - std::pow(t, p)); }, ta, tb, br, tol_);
        }
        ledger_.note(r);
        return r.value;
    }

    // int_0^a u^{-a}(1-u)^{-a} du for 0 <= a <= 1/2.
    double lower_beta(double u) const {
        if (u <= 0.0) return 0.0;
        double term = 1.0, sum = 0.0;
        for (int k = 0; k < 400; ++k) {
            const double add = term / (k + 1.0 - a_);
            sum += add;
            if (add < 1e-17 * sum) break;
            term *= (a_ + k) / (k + 1.0) * u;
        }
        return std::pow(u, 1.0 - a_) * sum;
    }

    // c(s) / s^{1-2a}.
    double c_ratio(double s) const {
        if (!std::isfinite(hi_) && lo_ == 0.0) return beta_;
        if (s <= 2.0 * lo_) return 0.0;
        double u = lo_ / s;
        if (std::isfinite(hi_)) u = std::max(u, 1.0 - hi_ / s);
        if (u >= 0.5) return 0.0;
        return beta_ - 2.0 * lower_beta(u);
    }

    double H(double z) {
        const double sa = std::max(2.0 * lo_, z - R_);
        const double sb = std::min(2.0 * hi_, z + R_);
        if (!(sb > sa)) return 0.0;
        std::vector<double> br_s{z};
        if (std::isfinite(hi_)) br_s.push_back(hi_ + lo_);  // where the clipping rule switches
        quad::QuadResult r;
        if (sa >= 1.0) {
            r = quad::integrate_pieces(
                [&](double s) { return std::pow(s, 1.0 - 2.0 * a_) * c_ratio(s) * k_(s - z); }, sa, sb, br_s, tol_);
        } else {
            // s = t^q: s^{1-2a} ds = q dt.
            const double q = 1.0 / (2.0 - 2.0 * a_);
            const double e = 2.0 - 2.0 * a_;
            std::vector<double> br;
            for (double b : br_s)
                if (b > sa && b < sb) br.push_back(std::pow(b, e));
            r = quad::integrate_pieces(
                [&](double t) {
                    const double s = std::pow(t, q);
                    return q * c_ratio(s) * k_(s - z);
                },
                std::pow(sa, e), std::pow(sb, e), br, tol_);
        }
        ledger_.note(r);
        return r.value;
    }

    double t1(double outer_tol, Ledger& outer) {
        const double zb = std::min(hi_, R_);
        auto r = quad::integrate_pieces([&](double z) { return k_(z) * H(z); }, lo_, zb, {std::min(1.0, zb)}, outer_tol);
        outer.note(r);
        return r.value;
    }

    double t2(double outer_tol, Ledger& outer, double m2) {
        auto sq = [&](double z) {
            const double v = g(z);
            return v * v;
        };
        auto sq_log = [&](double u) {
            const double z = std::exp(u);
            const double v = g(z);
            return v * v * z;
        };
        const double zc = std::isfinite(hi_) ? hi_ : 200.0 * R_;
        double total = 0.0;
        // [lo, R] linear.
        const double first = std::min(R_, zc);
        auto r0 = quad::integrate_pieces(sq, lo_, first, {std::min(1.0, first)}, outer_tol);
        outer.note(r0);
        total += r0.value;
        // [R, zc - R] in log z (or up to zc when unbounded), then the right edge linear.
        const double mid_end = std::isfinite(hi_) ? std::max(first, zc - R_) : zc;
        if (mid_end > first) {
            auto r1 = quad::integrate(sq_log, std::log(first), std::log(mid_end), outer_tol);
            outer.note(r1);
            total += r1.value;
        }
        if (zc > mid_end) {
            auto r2 = quad::integrate_pieces(sq, mid_end, zc, {}, outer_tol);
            outer.note(r2);
            total += r2.value;
        }
        if (!std::isfinite(hi_)) {
            // g(z) = z^{-a} (1 + a(a+1) m2 / (2 z^2) + O(z^-4)) once the kernel window clears 0.
            total += std::pow(zc, 1.0 - 2.0 * a_) / (2.0 * a_ - 1.0) +
                     a_ * (a_ + 1.0) * m2 * std::pow(zc, -1.0 - 2.0 * a_) / (2.0 * a_ + 1.0);
        }
        return total;
    }

    const Ledger& inner() const { return ledger_; }

private:
    const KernelSpec& k_;
    double a_, lo_, hi_, tol_, R_;
    double beta_ = 0.0;
    Ledger ledger_;
};

void assert_integrand_symmetry(const KernelSpec& spec, double alpha) {
    static constexpr std::array<double, 5> pts{0.03, 0.4, 1.1, 2.7, 6.5};
    for (double x : pts)
        for (double y : pts)
            for (double z : pts) {
                const double f = a_alpha_integrand(spec, alpha, x, y, z);
                const double g = a_alpha_integrand(spec, alpha, y, x, z);
                if (std::abs(f - g) > 1e-12 * std::max(std::abs(f), 1e-300))
                    throw std::logic_error("kernel '" + spec.name + "': A_alpha integrand is not symmetric in x, y");
            }
}

}  // namespace

double kernel_delta0(const KernelSpec& spec, double alpha, double rel_tol) {
    check_alpha_open(alpha, 0.0);
    const double R = spec.support_bound;
    const double p = 1.0 / (1.0 - alpha);
    std::vector<double> br;
    if (R > 1.0) br.push_back(1.0);
    auto r = quad::integrate_pieces([&](double t) { return p * spec(std::pow(t, p)); }, 0.0, std::pow(R, 1.0 - alpha),
                                    br, rel_tol);
    if (!r.converged) throw QuadratureError("Delta_0 quadrature did not converge", r.value, r.error);
    return r.value;
}

double kernel_a_alpha(const KernelSpec& spec, double alpha, std::size_t n, double tol, double* error_estimate) {
    check_alpha_open(alpha, 0.5);
    if (!(tol > 0.0)) throw std::invalid_argument("quadrature tolerance must be positive");
    if (n == 1) throw std::invalid_argument("A*_alpha needs n >= 2");
    const double lo = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
    const double hi = n == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(n);
    const double inner_tol = tol * 1e-3;
    const double outer_tol = tol * 0.1;
    AlphaIntegral ai(spec, alpha, lo, hi, inner_tol);
    Ledger outer;
    const double m2 = kernel_second_moment(spec);
    const double value = ai.t1(outer_tol, outer) + ai.t2(outer_tol, outer, m2);
    const double rel_err = outer.worst_rel + ai.inner().worst_rel + inner_tol;
    if (error_estimate) *error_estimate = rel_err;
    if (!outer.converged || !ai.inner().converged || rel_err > tol || !(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << (n == 0 ? "A_alpha" : "A*_alpha") << " quadrature failed to reach tolerance " << tol
            << " (estimate " << value << ", relative error " << rel_err << ")";
        throw QuadratureError(msg.str(), value, rel_err);
    }
    return value;
}

KernelConstants compute_constants(const KernelSpec& spec, double alpha, std::size_t n, double tol) {
    check_alpha_open(alpha, 0.5);
    if (n < 2) throw std::invalid_argument("compute_constants needs n >= 2");
    if (!(tol > 0.0)) throw std::invalid_argument("quadrature tolerance must be positive");

    using Key = std::tuple<std::string, long long, std::size_t, double>;
    static std::shared_mutex mutex;
    static std::map<Key, KernelConstants> cache;
    const Key key{spec.name, std::llround(alpha * 1e6), n, tol};
    {
        std::shared_lock lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }

    const double a = static_cast<double>(std::get<1>(key)) * 1e-6;
    assert_integrand_symmetry(spec, a);
    KernelConstants c;
    c.kernel = spec.name;
    c.alpha_used = a;
    c.n_used = n;
    c.quadrature_tolerance = tol;
    c.k2_integral = kernel_k2(spec);
    c.delta0 = kernel_delta0(spec, a, tol * 1e-2);
    c.delta0_error = tol * 1e-2;
    c.a_alpha = kernel_a_alpha(spec, a, 0, tol, &c.a_alpha_error);
    c.a_alpha_star = kernel_a_alpha(spec, a, n, tol, &c.a_alpha_star_error);

    std::unique_lock lock(mutex);
    cache.emplace(key, c);
    return c;
}

AStarTable::AStarTable(const KernelSpec& spec, std::size_t n, double alpha_lo, double alpha_hi, double tol,
                       unsigned threads)
    : kernel_(spec.name), n_(n), lo_(alpha_lo), hi_(alpha_hi) {
    check_alpha_open(alpha_lo, 0.5);
    check_alpha_open(alpha_hi, 0.5);
    if (!(alpha_lo < alpha_hi)) throw std::invalid_argument("AStarTable needs alpha_lo < alpha_hi");
    if (n < 2) throw std::invalid_argument("AStarTable needs n >= 2");
    const auto intervals = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil((hi_ - lo_) / 0.01 - 1e-9)));
    step_ = (hi_ - lo_) / static_cast<double>(intervals);
    log_values_.resize(intervals + 1);
    parallel_for(log_values_.size(), threads, [&](std::size_t i) {
        log_values_[i] = std::log(kernel_a_alpha(spec, lo_ + step_ * static_cast<double>(i), n, tol));
    });
}

double AStarTable::operator()(double alpha) const {
    if (!(alpha >= lo_ - 1e-12 && alpha <= hi_ + 1e-12)) {
        std::ostringstream msg;
        msg << "alpha = " << alpha << " lies outside the A* table range [" << lo_ << ", " << hi_ << "]";
        throw std::out_of_range(msg.str());
    }
    const double u = (alpha - lo_) / step_;
    const auto last = static_cast<long>(log_values_.size()) - 1;
    const long first = std::clamp(static_cast<long>(std::floor(u)) - 1, 0L, last - 3);
    double acc = 0.0;
    for (long i = first; i < first + 4; ++i) {
        double w = 1.0;
        for (long j = first; j < first + 4; ++j)
            if (j != i) w *= (u - static_cast<double>(j)) / static_cast<double>(i - j);
        acc += w * log_values_[i];
    }
    return std::exp(acc);
}

}  // namespace lrdspec
