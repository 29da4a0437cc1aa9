#include <gtest/gtest.h>

#include <cmath>

#include "lrdspec/log.hpp"
#include "lrdspec/spec_test.hpp"

using namespace lrdspec;

namespace {

std::vector<double> noisy(std::size_t n, std::uint64_t seed) {
    Engine eng = make_engine(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (double& x : v) x = nd(eng);
    return v;
}

// Direct O(n^2) double loop over s != t.
double brute_l3n_numerator(const std::vector<double>& e, double h, const LrdParams& lam) {
    const std::size_t n = e.size();
    const double nd = static_cast<double>(n);
    const double thr = std::cbrt(nd * h);
    auto gam = [&](long k) {
        k = std::abs(k);
        if (static_cast<double>(k) <= thr) {
            double s = 0.0;
            for (std::size_t i = 0; i + k < n; ++i) s += e[i] * e[i + k];
            return s / nd;
        }
        return lam.eta * std::pow(static_cast<double>(k), -lam.alpha);
    };
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t s = 0; s < n; ++s) {
            if (s == t) continue;
            const long k = static_cast<long>(s) - static_cast<long>(t);
            const double b = KernelSpec::gaussian()(static_cast<double>(k) / (nd * h));
            acc += b * (e[s] * e[t] - gam(k));
        }
    return acc;
}

double brute_m_hat(const std::vector<double>& x, const std::vector<double>& e, double h) {
    double acc = 0.0;
    for (std::size_t t = 0; t < e.size(); ++t)
        for (std::size_t s = 0; s < e.size(); ++s)
            if (s != t) acc += e[s] * KernelSpec::gaussian()((x[s] - x[t]) / h) * e[t];
    return acc;
}

}  // namespace

TEST(Fit, NoiselessLinearAndQuadratic) {
    const std::size_t n = 200;
    const auto x = fixed_design_points(n);
    std::vector<double> y1(n), y2(n);
    for (std::size_t t = 0; t < n; ++t) {
        y1[t] = 1.0 + x[t];
        y2[t] = 1.0 + x[t] + x[t] * x[t];
    }
    const auto m1 = fit(Dataset::fixed_design(y1), ModelKind::linear);
    EXPECT_NEAR(m1.theta[0], 1.0, 1e-10);
    EXPECT_NEAR(m1.theta[1], 1.0, 1e-10);
    const auto m2 = fit(Dataset::fixed_design(y2), ModelKind::quadratic);
    for (double th : m2.theta) EXPECT_NEAR(th, 1.0, 1e-10);
    for (double r : residuals(Dataset::fixed_design(y2), m2)) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(Fit, DesignPointsAreExact) {
    const auto d = Dataset::fixed_design(std::vector<double>(7, 0.0));
    for (std::size_t t = 1; t <= 7; ++t) EXPECT_EQ(d.x[t - 1], static_cast<double>(t) / 7.0);
}

TEST(Fit, DuplicateColumnNamed) {
    auto m = ParametricModel::custom({"one", "x", "x-again"},
                                     {[](double) { return 1.0; }, [](double x) { return x; }, [](double x) { return x; }});
    const auto d = Dataset::fixed_design(noisy(50, 1));
    try {
        (void)fit(d, m);
        FAIL() << "expected rank-deficiency error";
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("rank deficient"), std::string::npos) << what;
        EXPECT_TRUE(what.find("'x'") != std::string::npos || what.find("'x-again'") != std::string::npos) << what;
    }
}

TEST(Fit, ResidualsOrthogonalToBasis) {
    const std::size_t n = 300;
    auto y = noisy(n, 5);
    const auto d = Dataset::fixed_design(y);
    const auto m = fit(d, ModelKind::quadratic);
    const auto e = residuals(d, m);
    for (const auto& b : m.basis) {
        double dot = 0.0;
        for (std::size_t t = 0; t < n; ++t) dot += e[t] * b(d.x[t]);
        EXPECT_NEAR(dot, 0.0, 1e-8);
    }
}

TEST(Fit, HandComputedThreePoints) {
    const auto d = Dataset::fixed_design({1.0, 3.0, 2.0});  // x = 1/3, 2/3, 1
    const auto m = fit(d, ModelKind::linear);
    EXPECT_NEAR(m.theta[0], 1.0, 1e-12);
    EXPECT_NEAR(m.theta[1], 1.5, 1e-12);
    const auto e = residuals(d, m);
    EXPECT_NEAR(e[0], -0.5, 1e-12);
    EXPECT_NEAR(e[1], 1.0, 1e-12);
    EXPECT_NEAR(e[2], -0.5, 1e-12);
}

TEST(Fit, ConstantShiftLeavesResidualsUnchanged) {
    auto y = noisy(120, 8);
    const auto d1 = Dataset::fixed_design(y);
    for (double& v : y) v += 3.7;
    const auto d2 = Dataset::fixed_design(y);
    const auto e1 = residuals(d1, fit(d1, ModelKind::linear));
    const auto e2 = residuals(d2, fit(d2, ModelKind::linear));
    for (std::size_t t = 0; t < e1.size(); ++t) EXPECT_NEAR(e1[t], e2[t], 1e-12);
}

TEST(Fit, LengthMismatch) {
    auto m = fit(Dataset::fixed_design(noisy(20, 2)), ModelKind::linear);
    Dataset bad;
    bad.x = {0.1, 0.2};
    bad.y = {1.0};
    EXPECT_THROW((void)residuals(bad, m), std::invalid_argument);
    EXPECT_THROW((void)Dataset::random_design({0.1}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Hybrid, ThresholdAndTail) {
    EXPECT_EQ(hybrid_threshold(100, 0.1), 2);
    EXPECT_EQ(hybrid_threshold(27, 1.0), 3);
    EXPECT_EQ(hybrid_threshold(64, 1.0), 4);
    const auto e = noisy(100, 3);
    const auto g = hybrid_autocov(e, 0.1, {0.75, 1.0});
    EXPECT_EQ(g.threshold, 2);
    EXPECT_NEAR(g(5), 0.29907, 1e-5);
    EXPECT_EQ(g(-5), g(5));
    for (long k = 0; k <= 2; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < e.size(); ++i) s += e[i] * e[i + k];
        EXPECT_NEAR(g(k), s / 100.0, 1e-14);
        EXPECT_EQ(g(-k), g(k));
    }
}

TEST(L3n, MatchesBruteForceDoubleLoop) {
    const LrdParams lam{0.75, 0.8};
    for (std::size_t n : {3u, 6u, 10u}) {
        for (double h : {0.05, 0.5, 2.0}) {
            const auto e = noisy(n, n * 100 + static_cast<std::uint64_t>(h * 10));
            const double want = brute_l3n_numerator(e, h, lam);
            const double got = l3n_numerator(lag_products(e), h, lam);
            EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want))) << "n=" << n << " h=" << h;
        }
    }
    // The spec's hand case: n = 6, h = 0.5, fixed residuals.
    const std::vector<double> e{0.3, -1.2, 0.5, 2.0, -0.7, 0.1};
    EXPECT_NEAR(l3n_numerator(lag_products(e), 0.5, lam), brute_l3n_numerator(e, 0.5, lam), 1e-10);
}

TEST(L3n, NormalizationAndErrors) {
    const std::size_t n = 200;
    const auto e = noisy(n, 4);
    const LrdParams lam{0.75, 0.5};
    const auto c = compute_constants(KernelSpec::gaussian(), 0.75, n);
    ScopedWarningSink quiet([](const std::string&) {});
    const auto r = statistic_L3n(e, lam, 0.1, c);
    EXPECT_EQ(r.reference_law, ReferenceLaw::standard_normal);
    EXPECT_NEAR(r.sigma_hat, std::sqrt(8.0 * 0.25 * 200.0 * std::pow(20.0, 1.5) * c.a_alpha_star), 1e-9);
    EXPECT_DOUBLE_EQ(r.statistic, r.numerator / r.sigma_hat);
    EXPECT_THROW((void)statistic_L3n(e, LrdParams{0.4, 0.5}, 0.1, c), std::invalid_argument);
    EXPECT_THROW((void)statistic_L3n(e, LrdParams{0.7, 0.5}, 0.1, c), std::invalid_argument);  // constants for 0.75
    const auto small = statistic_L3n(e, lam, 0.02, c);  // nh = 4
    EXPECT_FALSE(small.warnings.empty());
}

TEST(L3n, LocationInvariance) {
    auto y = noisy(150, 11);
    const auto c = compute_constants(KernelSpec::gaussian(), 0.8, 150);
    const LrdParams lam{0.8, 0.4};
    const auto d1 = Dataset::fixed_design(y);
    for (double& v : y) v -= 12.5;
    const auto d2 = Dataset::fixed_design(y);
    const auto r1 = statistic_L3n(d1, fit(d1, ModelKind::linear), lam, 0.2, c);
    const auto r2 = statistic_L3n(d2, fit(d2, ModelKind::linear), lam, 0.2, c);
    EXPECT_NEAR(r1.statistic, r2.statistic, 1e-9);
}

TEST(L3n, CenteredWithExactAutocovariance) {
    // sum_{s != t} b(s-t)(e_s e_t - gamma(s-t)) with the generating ladder's gamma.
    const std::size_t n = 300;
    const double h = std::pow(static_cast<double>(n), -0.4);
    auto lad = make_ladder(0.75, ScaleRule::sqrt_alpha(), 50 * n, LadderSide::one_sided, LadderShape::fractional);
    const auto gam = autocovariances(lad, n);
    LadderGenerator gen(lad, n);
    const int reps = 400;
    double m = 0.0, m2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto e = gen.values(InnovationDist::standard_normal(), derive_seed(77, {static_cast<std::uint64_t>(r)}));
        const auto lp = lag_products(e);
        double acc = 0.0;
        for (std::size_t k = 1; k < n; ++k)
            acc += KernelSpec::gaussian()(k / (n * h)) * (lp.s[k] - (n - k) * gam[k]);
        m += 2.0 * acc;
        m2 += 4.0 * acc * acc;
    }
    m /= reps;
    const double se = std::sqrt((m2 / reps - m * m) / reps);
    EXPECT_LT(std::abs(m), 3.0 * se) << "mean " << m << " se " << se;
}

TEST(M_hat, MatchesBruteForceAndHalfSum) {
    for (std::size_t n : {2u, 5u, 10u}) {
        Engine eng = make_engine(n);
        std::vector<double> x(n);
        for (double& v : x) v = uniform01(eng);
        const auto e = noisy(n, n + 1);
        for (double h : {0.1, 0.7}) {
            const auto q = kernel_quadratic_form(x, e, h);
            const double want = brute_m_hat(x, e, h);
            EXPECT_NEAR(q.m_hat, want, 1e-10 * std::max(1.0, std::abs(want)));
            double fsum = 0.0;
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t j = 0; j < n; ++j) fsum += KernelSpec::gaussian()((x[t] - x[j]) / h) / (n * h);
            EXPECT_NEAR(q.mean_f_hat, fsum / n, 1e-12);
        }
    }
}

TEST(M_hat, ConstantAndZeroResiduals) {
    const std::size_t n = 40;
    Engine eng = make_engine(9);
    std::vector<double> x(n);
    for (double& v : x) v = uniform01(eng);
    const double c = 1.7, h = 0.2;
    double ksum = 0.0;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < n; ++t)
            if (s != t) ksum += KernelSpec::gaussian()((x[s] - x[t]) / h);
    EXPECT_NEAR(kernel_quadratic_form(x, std::vector<double>(n, c), h).m_hat, c * c * ksum, 1e-9);

    ScopedWarningSink quiet([](const std::string&) {});
    const auto r = statistic_L1n_L2n(x, std::vector<double>(n, 0.0), {0.75, 1.0}, h, StatKind::L1n);
    EXPECT_EQ(r.numerator, 0.0);
    EXPECT_EQ(r.statistic, 0.0);
}

TEST(L1nL2n, NormalizationsAndLaws) {
    const std::size_t n = 100;
    Engine eng = make_engine(21);
    std::vector<double> x(n);
    for (double& v : x) v = uniform01(eng);
    const auto e = noisy(n, 22);
    const double h = 0.3;
    const LrdParams lam{0.7, 0.9};
    ScopedWarningSink quiet([](const std::string&) {});
    const auto q = kernel_quadratic_form(x, e, h);
    double me2 = 0.0;
    for (double v : e) me2 += v * v / n;
    const auto r1 = statistic_L1n_L2n(x, e, lam, h, StatKind::L1n);
    EXPECT_NEAR(r1.sigma_hat, std::sqrt(2.0 * n * n * h * 0.5 / std::sqrt(M_PI) * q.mean_f_hat * me2 * me2), 1e-9);
    EXPECT_EQ(r1.reference_law, ReferenceLaw::standard_normal);
    const auto r2 = statistic_L1n_L2n(x, e, lam, h, StatKind::L2n);
    EXPECT_NEAR(r2.sigma_hat, 2.0 * std::pow(100.0, 1.3) * h * 0.9 / (0.3 * 1.3) * q.mean_f_hat, 1e-9);
    EXPECT_EQ(r2.reference_law, ReferenceLaw::chi_squared_1);
    EXPECT_THROW((void)statistic_L1n_L2n(x, e, lam, 0.0, StatKind::L1n), std::invalid_argument);
    EXPECT_THROW((void)statistic_L1n_L2n(std::vector<double>{}, std::vector<double>{}, lam, h, StatKind::L1n),
                 std::invalid_argument);
}

TEST(L1nL2n, RegimeWarnings) {
    std::vector<std::string> seen;
    ScopedWarningSink capture([&](const std::string& m) { seen.push_back(m); });
    const std::size_t n = 400;
    Engine eng = make_engine(3);
    std::vector<double> x(n);
    for (double& v : x) v = uniform01(eng);
    const auto e = noisy(n, 4);
    (void)statistic_L1n_L2n(x, e, {0.6, 1.0}, 0.5, StatKind::L1n);   // n^0.8 * 0.5 >> 1
    (void)statistic_L1n_L2n(x, e, {0.95, 1.0}, 0.01, StatKind::L2n);  // n^0.1 * 0.01 < 1
    EXPECT_EQ(seen.size(), 2u);
}

TEST(L1nL2n, LocationInvariance) {
    const std::size_t n = 80;
    Engine eng = make_engine(31);
    std::vector<double> x(n);
    for (double& v : x) v = uniform01(eng);
    auto y = noisy(n, 32);
    const auto d1 = Dataset::random_design(x, y);
    for (double& v : y) v += 100.0;
    const auto d2 = Dataset::random_design(x, y);
    ScopedWarningSink quiet([](const std::string&) {});
    for (auto kind : {StatKind::L1n, StatKind::L2n}) {
        const auto a = statistic_L1n_L2n(d1, fit(d1, ModelKind::linear), {0.7, 1.0}, 0.2, kind);
        const auto b = statistic_L1n_L2n(d2, fit(d2, ModelKind::linear), {0.7, 1.0}, 0.2, kind);
        EXPECT_NEAR(a.statistic, b.statistic, 1e-9);
    }
}
