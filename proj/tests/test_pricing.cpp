#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sysrisk/pricing.hpp"

using namespace sysrisk;

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bs_call(double S, double K, double sigma, double T, double r) {
    const double d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * T) / (sigma * std::sqrt(T));
    return S * norm_cdf(d1) - K * std::exp(-r * T) * norm_cdf(d1 - sigma * std::sqrt(T));
}

HNParams factor() { return {2e-7, 2e-6, 0.88, 150.0, 2.0}; }

PricingContext collapsed(double sigma, double r_day, double debt_T) {
    PricingContext c;
    c.model = AssetModel{factor(), 0.0, sigma * sigma / 252, 0.0, 0.0, 0.0, 252};
    c.r = r_day;
    c.h_next = 1e-4;
    c.debt_T = debt_T;
    return c;
}

PricingContext full(double debt_T) {
    PricingContext c;
    c.model = AssetModel{factor(), 0.8, 1e-4, 0.05, -0.03, 0.04, 252};
    c.r = 1e-4;
    c.h_next = 1.3e-4;
    c.X_t = 1234.5;
    c.debt_T = debt_T;
    return c;
}

// log(V_T / V_t) drawn from the printed asset law, with the factor under the given dynamics.
std::vector<double> simulate_log_assets(const PricingContext& c, bool risk_neutral, int paths, std::uint64_t seed) {
    const AssetModel& m = c.model;
    const GarchDynamics d = risk_neutral ? dynamics(to_risk_neutral(m.factor)) : dynamics(m.factor);
    JumpParams jp{m.lambda, {m.a}, {m.b}};
    Stream root(seed);
    std::vector<double> out(static_cast<std::size_t>(paths));
    for (int p = 0; p < paths; ++p) {
        Stream s = root.child(static_cast<std::uint64_t>(p));
        std::normal_distribution<double> z;
        double h = c.h_next, lx = 0, jumps = 0;
        for (int t = 0; t < m.tau; ++t) {
            auto st = factor_step(d, c.r, h, z(s));
            lx += st.x;
            h = st.h_next;
        }
        if (m.lambda > 0) {
            std::poisson_distribution<int> pois(m.lambda * m.tau);
            const int k = pois(s);
            for (int i = 0; i < k; ++i) jumps += m.a + m.b * z(s);
        }
        out[static_cast<std::size_t>(p)] = (c.r - c.r * m.delta - m.a * m.lambda) * m.tau + m.delta * lx +
                                           std::sqrt(m.xi * m.tau) * z(s) + jumps;
    }
    return out;
}

}  // namespace

TEST(AssetGf, ZeroAndCollapse) {
    auto c = collapsed(0.2, 1e-4, 80);
    EXPECT_EQ(asset_gf(c, 100, 0.0, GfMeasure::physical), cplx(1.0));
    for (double phi : {0.5, 1.0, 2.0}) {
        const double expect = std::pow(100.0, phi) * std::exp(phi * 1e-4 * 252 + phi * phi * c.model.xi * 252 / 2);
        EXPECT_NEAR(asset_gf(c, 100, phi, GfMeasure::physical).real() / expect, 1.0, 1e-12);
    }
}

TEST(AssetGf, FactorLevelCancels) {
    auto c = full(80);
    const cplx a = asset_gf(c, 100, cplx(1, 2), GfMeasure::physical);
    c.X_t = 7.0;
    const cplx b = asset_gf(c, 100, cplx(1, 2), GfMeasure::physical);
    EXPECT_NEAR(std::abs(a - b) / std::abs(a), 0.0, 1e-12);
}

TEST(AssetGf, NormalisedRiskNeutralIsMartingale) {
    auto c = full(80);
    EXPECT_NEAR(asset_gf(c, 100, 1.0, GfMeasure::risk_neutral).real(), 100 * std::exp(1e-4 * 252), 1e-9);
    // the raw printed form is not a martingale
    EXPECT_GT(std::abs(asset_gf(c, 100, 1.0, GfMeasure::risk_neutral_raw).real() / (100 * std::exp(1e-4 * 252)) - 1), 1e-3);
}

TEST(AssetGf, MatchesMonteCarloMoments) {
    auto c = full(80);
    const int n = 100000;
    for (bool rn : {false, true}) {
        auto lv = simulate_log_assets(c, rn, n, rn ? 5 : 6);
        for (double phi : {1.0, 2.0}) {
            double s = 0, s2 = 0;
            for (double v : lv) {
                const double x = std::exp(phi * v);
                s += x, s2 += x * x;
            }
            const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
            const double gf = asset_gf(c, 1.0, phi, rn ? GfMeasure::risk_neutral_raw : GfMeasure::physical).real();
            EXPECT_LT(std::abs(mean - gf), 3 * se) << "rn=" << rn << " phi=" << phi;
        }
    }
}

TEST(EquityPrice, BlackScholesCollapse) {
    EXPECT_NEAR(equity_price(collapsed(0.2, 0.0, 80), 100), bs_call(100, 80, 0.2, 1, 0), 1e-3);
    EXPECT_NEAR(equity_price(collapsed(0.2, 0.0, 80), 100), 21.18, 0.01);
    for (double mny : {0.5, 0.8, 1.0, 1.25, 3.0})
        for (double vol : {0.05, 0.1, 0.2, 0.4, 0.8}) {
            const double r = 0.03 / 252;
            auto c = collapsed(vol, r, 100 / mny);
            EXPECT_NEAR(equity_price(c, 100), bs_call(100, 100 / mny, vol, 1, 0.03), 1e-8) << mny << " " << vol;
            const double d1 = (std::log(mny) + (0.03 + 0.5 * vol * vol)) / vol;
            EXPECT_NEAR(equity_delta(c, 100), norm_cdf(d1), 1e-8);
        }
}

TEST(EquityPrice, TrivialBounds) {
    auto c = full(0);
    EXPECT_EQ(equity_price(c, 57), 57);
    EXPECT_EQ(equity_delta(c, 57), 1);
    EXPECT_EQ(invert_asset_value(c, 57), 57);
    auto deep = collapsed(0.2, 0.0, 1);
    EXPECT_NEAR(equity_price(deep, 1000) / 999, 1.0, 1e-6);
    EXPECT_GE(equity_delta(deep, 1000), 0.999);
}

TEST(EquityPrice, MatchesMonteCarloCallValue) {
    auto c = full(90);
    const int n = 200000;
    auto lv = simulate_log_assets(c, true, n, 8);
    // normalise the raw law exactly as the pricing measure does
    const double shift = std::log(100.0) + c.r * 252 - std::log(asset_gf(c, 100, 1.0, GfMeasure::risk_neutral_raw).real());
    double s = 0, s2 = 0;
    for (double v : lv) {
        const double payoff = std::max(100 * std::exp(v + shift) - c.debt_T, 0.0) * std::exp(-c.r * 252);
        s += payoff, s2 += payoff * payoff;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(equity_price(c, 100) - mean), 3 * se) << "mc " << mean << " se " << se;
}

TEST(EquityPrice, MonotoneAndBounded) {
    double prev = 0;
    for (double V = 40; V <= 300; V += 10) {
        auto c = full(90);
        const double S = equity_price(c, V);
        EXPECT_GT(S, prev);
        EXPECT_GE(S, std::max(0.0, V - c.debt_t()));
        EXPECT_LE(S, V);
        prev = S;
    }
    double prevd = 1e300;
    for (double D = 20; D <= 200; D += 20) {
        const double S = equity_price(full(D), 100);
        EXPECT_LT(S, prevd);
        prevd = S;
    }
}

TEST(EquityDelta, MatchesFiniteDifferences) {
    // V/D from 0.57 to 5.2; far out of the money the price itself is ~1e-9 and the
    // difference quotient is dominated by rounding.
    for (double V : {80.0, 100.0, 130.0, 180.0, 260.0})
        for (double D : {50.0, 70.0, 90.0, 110.0, 140.0}) {
            auto c = full(D);
            const double h = 1e-4 * V;
            const double fd = (equity_price(c, V + h) - equity_price(c, V - h)) / (2 * h);
            const double d = equity_delta(c, V);
            EXPECT_NEAR(d / fd, 1.0, 1e-5) << V << " " << D;
            EXPECT_GT(d, 0);
            EXPECT_LE(d, 1 + 1e-12);
        }
}

TEST(Inversion, RoundTrip) {
    for (double V : {60.0, 100.0, 150.0, 400.0}) {
        auto c = full(100);
        const double S = equity_price(c, V);
        EXPECT_NEAR(invert_asset_value(c, S) / V, 1.0, 1e-8);
    }
}

TEST(Inversion, AgreesWithBlackScholesImpliedAsset) {
    auto c = collapsed(0.3, 0.02 / 252, 80);
    const double S = 30.0;
    double lo = S, hi = S + 80;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (bs_call(mid, 80, 0.3, 1, 0.02) > S ? hi : lo) = mid;
    }
    EXPECT_NEAR(invert_asset_value(c, S) / lo, 1.0, 1e-6);
}

TEST(Inversion, KernelWarmStartAndErrors) {
    auto c = full(100);
    PricingKernel k(c.model, {}, c.h_next);
    auto day = k.day(c.r, c.h_next, c.debt_T);
    const double S = day.price(130);
    EXPECT_NEAR(day.invert(S, 129.0), 130, 1e-7);
    EXPECT_THROW(day.invert(-1), DomainError);
    EXPECT_THROW(day.price(0), DomainError);
}

TEST(Quadrature, DegenerateTailRaises) {
    auto c = collapsed(0.0, 0.0, 80);
    c.model.xi = 1e-14;
    EXPECT_THROW(equity_price(c, 100), NumericalError);
}
