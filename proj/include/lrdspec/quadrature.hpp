#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace lrdspec::quad {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  ///< sum of |refined - coarse| over accepted panels
    bool converged = true;
    std::size_t panels = 0;
};

/// Gauss-Legendre rule on [-1, 1], nodes found by Newton iteration on P_n.
class GaussLegendre {
public:
    explicit GaussLegendre(std::size_t order) : nodes_(order), weights_(order) {
        if (order == 0) throw std::invalid_argument("GaussLegendre: order must be positive");
        const std::size_t n = order;
        if (n == 1) {
            nodes_[0] = 0.0;
            weights_[0] = 2.0;
            return;
        }
        for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(n) + 0.5));
            double dp = 1.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = x;
                for (std::size_t k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                    p0 = p1;
                    p1 = p2;
                }
                dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes_[i] = -x;
            nodes_[n - 1 - i] = x;
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights_[i] = w;
            weights_[n - 1 - i] = w;
        }
    }

    [[nodiscard]] std::size_t order() const noexcept { return nodes_.size(); }
    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

    template <class F>
    [[nodiscard]] double apply(F&& f, double a, double b) const {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(mid + half * nodes_[i]);
        return half * sum;
    }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

inline const GaussLegendre& default_rule() {
    static const GaussLegendre rule(12);
    return rule;
}

namespace detail {

// Refinement stops (unconverged) once this many panels have been accepted.
inline constexpr std::size_t kMaxPanels = 1u << 15;

template <class F>
void refine(F& f, const GaussLegendre& rule, double a, double b, double whole, double abs_tol,
            int depth, int max_depth, QuadResult& out) {
    const double mid = 0.5 * (a + b);
    const double left = rule.apply(f, a, mid);
    const double right = rule.apply(f, mid, b);
    const double halves = left + right;
    const double diff = std::abs(halves - whole);
    if (diff <= abs_tol || depth >= max_depth || out.panels >= kMaxPanels || !(mid > a && mid < b)) {
        if (diff > abs_tol) out.converged = false;
        out.value += halves;
        out.error += diff;
        out.panels += 2;
        return;
    }
    refine(f, rule, a, mid, left, 0.5 * abs_tol, depth + 1, max_depth, out);
    refine(f, rule, mid, b, right, 0.5 * abs_tol, depth + 1, max_depth, out);
}

}  // namespace detail

/// Adaptive Gauss-Legendre panel refinement on [a, b]: a panel is accepted
/// once its two halves agree with the whole to within its share of the
/// tolerance budget max(abs_tol, rel_tol * |coarse estimate|).
template <class F>
[[nodiscard]] QuadResult integrate(F&& f, double a, double b, double rel_tol, double abs_tol = 0.0,
                                   int max_depth = 40, const GaussLegendre& rule = default_rule()) {
    QuadResult out;
    out.value = 0.0;
    if (a == b) return out;
    constexpr int initial = 8;
    std::vector<double> coarse(initial);
    double total = 0.0;
    const double width = (b - a) / initial;
    for (int i = 0; i < initial; ++i) {
        coarse[i] = rule.apply(f, a + i * width, a + (i + 1) * width);
        total += coarse[i];
    }
    const double budget = std::max(abs_tol, rel_tol * std::abs(total));
    for (int i = 0; i < initial; ++i) {
        const double lo = a + i * width;
        const double hi = (i + 1 == initial) ? b : a + (i + 1) * width;
        detail::refine(f, rule, lo, hi, coarse[i], budget / initial, 0, max_depth, out);
    }
    return out;
}

/// integrate() over [a, b] split at the given interior points (kinks, peaks).
/// Points outside (a, b) are ignored. The tolerance budget is shared
/// proportionally to panel width.
template <class F>
[[nodiscard]] QuadResult integrate_pieces(F&& f, double a, double b, std::vector<double> breaks,
                                          double rel_tol, double abs_tol = 0.0) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    QuadResult out;
    double prev = a;
    for (double x : breaks) {
        if (!(x > prev) || x > b) continue;
        const QuadResult part = integrate(f, prev, x, rel_tol, abs_tol * (x - prev) / (b - a));
        out.value += part.value;
        out.error += part.error;
        out.panels += part.panels;
        out.converged = out.converged && part.converged;
        prev = x;
    }
    return out;
}

/// Integral over [a, inf) by geometric panels [a + s(2^k - 1), a + s(2^{k+1} - 1)],
/// stopping once `quiet_panels` consecutive panels each contribute less than
/// rel_tol * 1e-3 of the running total.
template <class F>
[[nodiscard]] QuadResult integrate_to_infinity(F&& f, double a, double scale, double rel_tol,
                                               int max_panels = 200, int quiet_panels = 3) {
    QuadResult out;
    double lo = a;
    double width = scale;
    int quiet = 0;
    for (int k = 0; k < max_panels; ++k) {
        const double hi = lo + width;
        const QuadResult part = integrate(f, lo, hi, rel_tol * 1e-2, 0.0);
        out.value += part.value;
        out.error += part.error;
        out.panels += part.panels;
        out.converged = out.converged && part.converged;
        if (std::abs(part.value) <= 1e-3 * rel_tol * std::abs(out.value)) {
            if (++quiet >= quiet_panels) return out;
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    out.converged = false;
    return out;
}

}  // namespace lrdspec::quad
