#include "lrdspec/spec_test.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lrdspec/log.hpp"

namespace lrdspec {

std::vector<double> fixed_design_points(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t t = 1; t <= n; ++t) x[t - 1] = static_cast<double>(t) / static_cast<double>(n);
    return x;
}

Dataset Dataset::fixed_design(std::vector<double> y) {
    Dataset d;
    d.design = DesignKind::fixed;
    d.x = fixed_design_points(y.size());
    d.y = std::move(y);
    return d;
}

Dataset Dataset::random_design(std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("random design: x and y lengths differ");
    Dataset d;
    d.design = DesignKind::random;
    d.x = std::move(x);
    d.y = std::move(y);
    return d;
}

ParametricModel ParametricModel::linear() {
    ParametricModel m;
    m.kind = ModelKind::linear;
    m.basis_names = {"1", "x"};
    m.basis = {[](double) { return 1.0; }, [](double x) { return x; }};
    return m;
}

ParametricModel ParametricModel::quadratic() {
    ParametricModel m;
    m.kind = ModelKind::quadratic;
    m.basis_names = {"1", "x", "x^2"};
    m.basis = {[](double) { return 1.0; }, [](double x) { return x; }, [](double x) { return x * x; }};
    return m;
}

ParametricModel ParametricModel::custom(std::vector<std::string> names, std::vector<std::function<double(double)>> basis) {
    if (basis.empty() || names.size() != basis.size())
        throw std::invalid_argument("custom model needs one name per basis function");
    ParametricModel m;
    m.kind = ModelKind::custom;
    m.basis_names = std::move(names);
    m.basis = std::move(basis);
    return m;
}

double ParametricModel::predict(double x) const {
    if (!fitted()) throw std::logic_error("model has not been fitted");
    double v = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j) v += theta[j] * basis[j](x);
    return v;
}

ParametricModel model_from_kind(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear:
            return ParametricModel::linear();
        case ModelKind::quadratic:
            return ParametricModel::quadratic();
        case ModelKind::custom:
            break;
    }
    throw std::invalid_argument("custom models need explicit basis functions");
}

const char* to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::linear:
            return "linear";
        case ModelKind::quadratic:
            return "quadratic";
        case ModelKind::custom:
            return "custom";
    }
    return "?";
}

ParametricModel fit(const Dataset& data, const ParametricModel& model) {
    const std::size_t n = data.n();
    const std::size_t p = model.dimension();
    if (data.x.size() != n) throw std::invalid_argument("dataset x and y lengths differ");
    if (p == 0) throw std::invalid_argument("model has no basis functions");
    if (n < p) throw std::invalid_argument("fewer observations than model parameters");

    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < p; ++j) X(t, j) = model.basis[j](data.x[t]);
        y(t) = data.y[t];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < p) {
        std::ostringstream msg;
        msg << "design matrix is rank deficient (rank " << qr.rank() << " of " << p << "); collinear column(s):";
        const auto& perm = qr.colsPermutation().indices();
        for (std::size_t j = static_cast<std::size_t>(qr.rank()); j < p; ++j)
            msg << " '" << model.basis_names[perm(static_cast<Eigen::Index>(j))] << "' (#" << perm(static_cast<Eigen::Index>(j)) << ")";
        throw std::invalid_argument(msg.str());
    }
    const Eigen::VectorXd theta = qr.solve(y);
    ParametricModel out = model;
    out.theta.assign(theta.data(), theta.data() + p);
    return out;
}

ParametricModel fit(const Dataset& data, ModelKind kind) { return fit(data, model_from_kind(kind)); }

std::vector<double> residuals(const Dataset& data, const ParametricModel& model) {
    if (data.x.size() != data.y.size()) throw std::invalid_argument("dataset x and y lengths differ");
    if (!model.fitted()) throw std::invalid_argument("residuals need a fitted model");
    std::vector<double> e(data.n());
    for (std::size_t t = 0; t < e.size(); ++t) e[t] = data.y[t] - model.predict(data.x[t]);
    return e;
}

long hybrid_threshold(std::size_t n, double h) {
    const double nh = static_cast<double>(n) * h;
    auto thr = static_cast<long>(std::floor(std::cbrt(nh)));
    // Guard floor(cbrt(m^3)) landing just below m.
    while (static_cast<double>(thr + 1) * (thr + 1) * (thr + 1) <= nh) ++thr;
    return thr;
}

double HybridAutocov::operator()(long k) const {
    const long a = std::abs(k);
    if (a <= threshold) return a < static_cast<long>(sample_part.size()) ? sample_part[a] : 0.0;
    return tail.eta * std::pow(static_cast<double>(a), -tail.alpha);
}

HybridAutocov hybrid_autocov(std::span<const double> e, double h, const LrdParams& lambda) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
    validate(lambda);
    HybridAutocov g;
    g.tail = lambda;
    g.threshold = hybrid_threshold(e.size(), h);
    const std::size_t n = e.size();
    const std::size_t upto = std::min<std::size_t>(static_cast<std::size_t>(g.threshold) + 1, n);
    g.sample_part.assign(upto, 0.0);
    for (std::size_t k = 0; k < upto; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += e[i] * e[i + k];
        g.sample_part[k] = s / static_cast<double>(n);
    }
    return g;
}

LagProducts lag_products(std::span<const double> e) {
    LagProducts lp;
    const std::size_t n = e.size();
    lp.s.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += e[i] * e[i + k];
        lp.s[k] = s;
    }
    return lp;
}

const char* to_string(StatKind kind) noexcept {
    switch (kind) {
        case StatKind::L1n:
            return "L1n";
        case StatKind::L2n:
            return "L2n";
        case StatKind::L3n:
            return "L3n";
    }
    return "?";
}

const char* to_string(ReferenceLaw law) noexcept {
    return law == ReferenceLaw::standard_normal ? "standard-normal" : "chi-squared-1";
}

double l3n_numerator(const LagProducts& lags, double h, const LrdParams& lambda, const KernelSpec& kernel) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
    const std::size_t n = lags.n();
    if (n < 2) return 0.0;
    const double nd = static_cast<double>(n);
    const double nh = nd * h;
    const long thr = hybrid_threshold(n, h);
    const auto reach = static_cast<std::size_t>(std::ceil(kernel.support_bound * nh));
    const std::size_t kmax = std::min(n - 1, reach);
    double acc = 0.0;
    for (std::size_t k = 1; k <= kmax; ++k) {
        const double b = kernel(static_cast<double>(k) / nh);
        if (b == 0.0) continue;
        const double count = nd - static_cast<double>(k);
        double g;
        if (static_cast<long>(k) <= thr) g = lags.s[k] / nd;
        else g = lambda.eta * std::pow(static_cast<double>(k), -lambda.alpha);
        acc += b * (lags.s[k] - count * g);
    }
    return 2.0 * acc;
}

double sigma3n(std::size_t n, double h, const LrdParams& lambda, double a_alpha_star) {
    const double nd = static_cast<double>(n);
    const double nh = nd * h;
    return std::sqrt(8.0 * lambda.eta * lambda.eta * nd * std::pow(nh, 3.0 - 2.0 * lambda.alpha) * a_alpha_star);
}

TestResult statistic_L3n(std::span<const double> e, const LrdParams& lambda, double h,
                         const KernelConstants& constants, const KernelSpec& kernel) {
    validate(lambda, /*strict=*/true);
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
    const std::size_t n = e.size();
    if (n < 2) throw std::invalid_argument("L3n needs at least two residuals");
    if (constants.n_used != n || std::abs(constants.alpha_used - lambda.alpha) > 1e-6 || constants.kernel != kernel.name)
        throw std::invalid_argument("kernel constants were computed for a different (kernel, alpha, n)");

    TestResult r;
    r.kind = StatKind::L3n;
    r.h = h;
    r.lambda_used = lambda;
    r.reference_law = ReferenceLaw::standard_normal;
    if (static_cast<double>(n) * h < 5.0) {
        std::ostringstream msg;
        msg << "L3n: nh = " << static_cast<double>(n) * h << " < 5; the normal approximation needs nh large";
        r.warnings.push_back(msg.str());
        warn(msg.str());
    }
    r.numerator = l3n_numerator(lag_products(e), h, lambda, kernel);
    r.sigma_hat = sigma3n(n, h, lambda, constants.a_alpha_star);
    r.statistic = r.numerator / r.sigma_hat;
    return r;
}

TestResult statistic_L3n(const Dataset& data, const ParametricModel& model, const LrdParams& lambda, double h,
                         const KernelConstants& constants, const KernelSpec& kernel) {
    if (data.design != DesignKind::fixed) throw std::invalid_argument("L3n is defined for the fixed design");
    const auto e = residuals(data, model);
    return statistic_L3n(e, lambda, h, constants, kernel);
}

KernelQuadraticForm kernel_quadratic_form(std::span<const double> x, std::span<const double> e, double h,
                                          const KernelSpec& kernel) {
    if (x.size() != e.size()) throw std::invalid_argument("x and residual lengths differ");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
    const std::size_t n = e.size();
    double m = 0.0, ksum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double mt = 0.0;
        for (std::size_t s = t + 1; s < n; ++s) {
            const double k = kernel((x[s] - x[t]) / h);
            mt += e[s] * k;
            ksum += k;
        }
        m += mt * e[t];
    }
    KernelQuadraticForm q;
    q.m_hat = 2.0 * m;
    const double nd = static_cast<double>(n);
    // f^(X_t) = (1/nh) sum_j K((X_t - X_j)/h), self term included.
    q.mean_f_hat = n == 0 ? 0.0 : (nd * kernel(0.0) + 2.0 * ksum) / (nd * nd * h);
    return q;
}

TestResult statistic_L1n_L2n(std::span<const double> x, std::span<const double> e, const LrdParams& lambda, double h,
                             StatKind kind, const KernelSpec& kernel) {
    if (kind == StatKind::L3n) throw std::invalid_argument("statistic_L1n_L2n computes L1n or L2n");
    if (e.empty()) throw std::invalid_argument("empty dataset");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
    validate(lambda);
    const std::size_t n = e.size();
    const double nd = static_cast<double>(n);
    const auto q = kernel_quadratic_form(x, e, h, kernel);

    TestResult r;
    r.kind = kind;
    r.h = h;
    r.lambda_used = lambda;
    r.numerator = q.m_hat;
    const double regime = std::pow(nd, 2.0 * (1.0 - lambda.alpha)) * h;
    std::ostringstream msg;
    if (kind == StatKind::L1n) {
        double mean_e2 = 0.0;
        for (double v : e) mean_e2 += v * v;
        mean_e2 /= nd;
        const double var = 2.0 * nd * nd * h * kernel_k2(kernel) * q.mean_f_hat * mean_e2 * mean_e2;
        r.sigma_hat = std::sqrt(var);
        r.reference_law = ReferenceLaw::standard_normal;
        if (regime > 1.0) msg << "L1n: n^{2(1-alpha)} h = " << regime << " > 1; the normal limit needs it small";
    } else {
        const double a = lambda.alpha;
        r.sigma_hat = 2.0 * std::pow(nd, 2.0 - a) * h * lambda.eta / ((1.0 - a) * (2.0 - a)) * q.mean_f_hat;
        r.reference_law = ReferenceLaw::chi_squared_1;
        if (regime < 1.0) msg << "L2n: n^{2(1-alpha)} h = " << regime << " < 1; the chi-square limit needs it large";
    }
    if (!msg.str().empty()) {
        r.warnings.push_back(msg.str());
        warn(msg.str());
    }
    r.statistic = r.sigma_hat > 0.0 ? r.numerator / r.sigma_hat : 0.0;
    if (!(r.sigma_hat > 0.0)) {
        // All-zero residuals make sigma^_1n vanish; the statistic is then 0 by convention.
        r.warnings.push_back("sigma_hat is zero; statistic set to 0");
    }
    return r;
}

TestResult statistic_L1n_L2n(const Dataset& data, const ParametricModel& model, const LrdParams& lambda, double h,
                             StatKind kind, const KernelSpec& kernel) {
    if (data.design != DesignKind::random) throw std::invalid_argument("L1n/L2n are defined for random designs");
    const auto e = residuals(data, model);
    return statistic_L1n_L2n(data.x, e, lambda, h, kind, kernel);
}

}  // namespace lrdspec
