#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "sysrisk/common_factor.hpp"

using namespace sysrisk;

namespace {

HNParams truth() { return {2e-7, 2e-6, 0.88, 150.0, 2.0}; }

// E[exp(phi * sum of the next n log returns)] by nested trapezoid quadrature over eps.
cplx nested_moment(const GarchDynamics& d, double r, double h, int n, cplx phi) {
    if (n == 0) return 1.0;
    const int m = 161;
    const double lo = -9, hi = 9, dx = (hi - lo) / (m - 1);
    cplx acc = 0;
    for (int i = 0; i < m; ++i) {
        const double e = lo + i * dx;
        const double w = (i == 0 || i == m - 1 ? 0.5 : 1.0) * dx * std::exp(-0.5 * e * e) / std::sqrt(2 * M_PI);
        const double x = r + d.lambda * h + std::sqrt(h) * e;
        const double u = e - d.gamma * std::sqrt(h);
        const double hn = d.omega + d.alpha * u * u + d.eta * h;
        acc += w * std::exp(phi * x) * nested_moment(d, r, hn, n - 1, phi);
    }
    return acc;
}

}  // namespace

TEST(CommonFactor, OneStepCoefficientsAreGaussianMgf) {
    const auto d = dynamics(truth());
    for (cplx phi : {cplx(1, 0), cplx(2, 0), cplx(0.3, -4)}) {
        auto c = gen_fn_coeffs(d, 1e-4, 1, phi);
        EXPECT_NEAR(std::abs(c.B[0] - (phi * d.lambda + 0.5 * phi * phi)), 0.0, 1e-9);
        EXPECT_NEAR(std::abs(c.A[0] - phi * 1e-4), 0.0, 1e-15);
        EXPECT_EQ(c.A[1], cplx{});
    }
}

TEST(CommonFactor, RecursionMatchesNestedQuadrature) {
    const auto d = dynamics(truth());
    const double r = 1e-4, h = 1.5e-4;
    for (int n : {2, 3}) {
        for (cplx phi : {cplx(1, 0), cplx(2, 0), cplx(0.5, 3.0)}) {
            const cplx expect = nested_moment(d, r, h, n, phi);
            const cplx got = common_factor_gf(d, r, 1.0, h, n, phi);
            EXPECT_NEAR(std::abs(got - expect) / std::abs(expect), 0.0, 1e-9) << "n=" << n << " phi=" << phi;
        }
    }
}

TEST(CommonFactor, StartOnlyVariantAgreesWithTable) {
    const auto d = dynamics(to_risk_neutral(truth()));
    const cplx phi(0.7, 12.0);
    auto c = gen_fn_coeffs(d, 2e-4, 252, phi);
    auto [A, B] = gen_fn_start(d, 2e-4, 252, phi);
    EXPECT_NEAR(std::abs(A - c.A[0]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(B - c.B[0]), 0.0, 1e-12);
}

TEST(CommonFactor, RiskNeutralFactorIsMartingale) {
    const auto q = dynamics(to_risk_neutral(truth()));
    const double r = 1.5e-4;
    for (int n : {1, 21, 252}) {
        const cplx v = common_factor_gf(q, r, 100.0, 2e-4, n, 1.0);
        EXPECT_NEAR(v.real() / (100.0 * std::exp(r * n)), 1.0, 1e-12);
    }
}

TEST(CommonFactor, MeasureMappingRoundTrips) {
    const auto p = truth();
    const auto q = to_risk_neutral(p);
    EXPECT_DOUBLE_EQ(q.gamma_star, p.gamma + p.lambda_p + 0.5);
    const auto back = from_risk_neutral(q, p.lambda_p);
    EXPECT_DOUBLE_EQ(back.gamma, p.gamma);
    EXPECT_DOUBLE_EQ(back.omega, p.omega);
}

TEST(CommonFactor, BranchGuardThrowsForExplosiveMoment) {
    HNParams p{1e-6, 1e-3, 0.5, 0.0, 0.0};
    EXPECT_THROW(gen_fn_coeffs(dynamics(p), 0.0, 50, 40.0), NumericalError);
}

TEST(CommonFactor, GfInputValidation) {
    const auto d = dynamics(truth());
    EXPECT_THROW(common_factor_gf(d, 0, -1.0, 1e-4, 5, 1.0), DomainError);
    EXPECT_THROW(common_factor_gf(d, 0, 1.0, 0.0, 5, 1.0), DomainError);
    EXPECT_THROW(gen_fn_coeffs(d, 0, -1, 1.0), DomainError);
    EXPECT_EQ(common_factor_gf(d, 0, 5.0, 1e-4, 5, 0.0), cplx(1.0));
}

TEST(CommonFactor, MonteCarloMomentsMatchClosedForm) {
    const auto d = dynamics(truth());
    const double r = 1e-4, h0 = 1.2e-4;
    const int n = 21, paths = 100000;
    auto sim = simulate_factor(d, r, h0, n, paths, Stream(11));
    for (double phi : {1.0, 2.0}) {
        double s = 0, s2 = 0;
        for (int p = 0; p < paths; ++p) {
            double lx = 0;
            for (int t = 0; t < n; ++t) lx += sim.x_at(p, t);
            const double v = std::exp(phi * lx);
            s += v, s2 += v * v;
        }
        const double m = s / paths, se = std::sqrt((s2 / paths - m * m) / paths);
        const double expect = common_factor_gf(d, r, 1.0, h0, n, phi).real();
        EXPECT_LT(std::abs(m - expect), 3 * se) << "phi=" << phi;
    }
}

TEST(CommonFactor, FilterMatchesDirectLikelihood) {
    const auto p = truth();
    auto sim = simulate_factor(dynamics(p), 1e-4, 1e-4, 50, 1, Stream(3));
    auto f = hn_filter(p, sim.x, 1e-4, 1e-4);
    double ll = 0;
    for (int t = 0; t < 50; ++t) {
        EXPECT_NEAR(f.h[t], sim.h[t], 1e-18);
        const double e = (sim.x[t] - 1e-4 - p.lambda_p * sim.h[t]) / std::sqrt(sim.h[t]);
        ll += -0.5 * std::log(2 * M_PI * sim.h[t]) - 0.5 * e * e;
    }
    EXPECT_NEAR(f.loglik, ll, 1e-9);
}

TEST(CommonFactor, SimulationIsPathOrderIndependent) {
    const auto d = dynamics(truth());
    auto a = simulate_factor(d, 0, 1e-4, 10, 5, Stream(9));
    auto b = simulate_factor(d, 0, 1e-4, 10, 3, Stream(9));
    for (int t = 0; t < 10; ++t) EXPECT_EQ(a.x_at(2, t), b.x_at(2, t));
}

TEST(CommonFactor, FitRecoversParameters) {
    const auto p = truth();
    const double r = 1e-4;
    auto sim = simulate_factor(dynamics(p), r, p.unconditional_variance(), 8000, 1, Stream(21));
    HNFitOptions o;
    o.standard_errors = true;
    auto fit = fit_hn_garch(sim.x, r, o);
    const double nat[5] = {p.omega, p.alpha, p.eta, p.gamma, p.lambda_p};
    const double est[5] = {fit.params.omega, fit.params.alpha, fit.params.eta, fit.params.gamma, fit.params.lambda_p};
    for (int i = 0; i < 5; ++i) {
        ASSERT_TRUE(std::isfinite(fit.se[i])) << i;
        EXPECT_LT(std::abs(est[i] - nat[i]), 4 * fit.se[i]) << "param " << i;
    }
    EXPECT_GE(fit.filter.loglik, hn_filter(p, sim.x, r, fit.h1).loglik);
}

TEST(CommonFactor, FitRejectsShortOrDegenerateInput) {
    std::vector<double> x(50, 0.01);
    EXPECT_THROW(fit_hn_garch(x, 0), DataError);
    std::vector<double> flat(500, 0.01);
    EXPECT_THROW(fit_hn_garch(flat, 0), DegenerateInputError);
}
