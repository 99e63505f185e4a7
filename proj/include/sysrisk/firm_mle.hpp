#pragma once

// Per-firm structural estimation: asset values implied from equity, the
// likelihood of the implied asset returns, and the idiosyncratic residuals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sysrisk/common_factor.hpp"
#include "sysrisk/error.hpp"
#include "sysrisk/jumps.hpp"
#include "sysrisk/optim.hpp"
#include "sysrisk/pricing.hpp"

namespace sysrisk {

inline double cond_variance(const FirmParams& fp, double lambda, double a, double b, double h) {
    return fp.delta * fp.delta * h + fp.xi + lambda * (a * a + b * b);
}

// Inputs for one firm over one estimation window, aligned day by day.
struct FirmWindow {
    std::vector<double> equity;  // S_t
    std::vector<double> debt;    // D_t, the face value today; D_T = D_t e^{r tau}
    std::vector<double> x;       // factor log return on day t
    std::vector<double> r;       // risk-free rate per day
    std::vector<double> h;       // h[t] is the factor variance of day t; h[n] is the next-day forecast

    std::size_t size() const { return equity.size(); }

    void validate() const {
        const std::size_t n = equity.size();
        if (n < 3) throw DataError("firm window: at least 3 days required");
        if (debt.size() != n || x.size() != n || r.size() != n || h.size() != n + 1)
            throw DataError("firm window: series lengths do not match");
        for (std::size_t t = 0; t < n; ++t) {
            if (!(equity[t] > 0)) throw DataError("firm window: non-positive equity on day " + std::to_string(t));
            if (!(debt[t] >= 0)) throw DataError("firm window: negative debt on day " + std::to_string(t));
        }
    }
};

// Jump inputs for one firm; zero for the benchmark.
struct FirmJumps {
    double lambda = 0;
    double a = 0;
    double b = 0;
};

struct FirmFit {
    FirmParams params;
    std::array<double, 3> se{};  // (mu, delta, xi); NaN when unavailable
    std::vector<double> assets;      // V_t
    std::vector<double> returns;     // v_t, t = 1..n-1
    std::vector<double> residuals;   // w_t, t = 1..n-1
    std::vector<double> deltas;      // dS/dV
    double loglik = -std::numeric_limits<double>::infinity();
    bool benchmark = false;
    bool converged = false;
    int evals = 0;
};

// Evaluates the likelihood for one firm window. Holds a warm-start cache of the
// implied asset path, so successive evaluations invert in a few Newton steps.
class FirmLikelihood {
public:
    FirmLikelihood(const FirmWindow& w, const HNParams& factor, const FirmJumps& jumps, const QuadratureSpec& q = {},
                   int tau = 252)
        : w_(w), factor_(factor), jumps_(jumps), quad_(q), tau_(tau) {
        w_.validate();
        double span = 0;
        for (std::size_t t = 0; t < w_.size(); ++t)
            if (w_.debt[t] > 0) span = std::max(span, std::log((w_.equity[t] + w_.debt[t]) / w_.debt[t]));
        quad_.y_span = std::clamp(span + 1.0, q.y_span, 12.0);
        h_ref_ = *std::max_element(w_.h.begin(), w_.h.end());
        warm_.assign(w_.size(), 0.0);
    }

    struct Eval {
        double loglik = -std::numeric_limits<double>::infinity();
        double mu = 0;  // profiled
        std::vector<double> V, dSdV;
        std::string failure;
    };

    // Implied assets and the likelihood with mu at its closed-form optimum.
    Eval profile(double delta, double xi) { return evaluate(delta, xi, nullptr); }

    double loglik(const FirmParams& p) { return evaluate(p.delta, p.xi, &p.mu).loglik; }

    const FirmWindow& window() const { return w_; }
    const FirmJumps& jumps() const { return jumps_; }

    double variance(const FirmParams& p, std::size_t t) const {
        return cond_variance(p, jumps_.lambda, jumps_.a, jumps_.b, w_.h[t]);
    }

private:
    Eval evaluate(double delta, double xi, const double* mu_fixed) {
        Eval e;
        if (!(xi > 0) || !std::isfinite(delta)) {
            e.failure = "invalid parameters";
            return e;
        }
        const std::size_t n = w_.size();
        try {
            PricingKernel k(AssetModel{factor_, delta, xi, jumps_.lambda, jumps_.a, jumps_.b, tau_}, quad_, h_ref_);
            e.V.resize(n);
            e.dSdV.resize(n);
            for (std::size_t t = 0; t < n; ++t) {
                auto day = k.day(w_.r[t], w_.h[t + 1], w_.debt[t] * std::exp(w_.r[t] * tau_));
                e.V[t] = day.invert(w_.equity[t], warm_[t]);
                e.dSdV[t] = day.delta(e.V[t]);
                if (!(e.dSdV[t] > 0)) {
                    e.failure = "non-positive equity delta on day " + std::to_string(t);
                    return e;
                }
            }
        } catch (const NumericalError& ex) {
            e.failure = ex.what();
            return e;
        }
        warm_ = e.V;

        const FirmParams p{0.0, delta, xi};
        const double q_bar = jumps_.a;
        double sw = 0, swr = 0;
        std::vector<double> v(n), var(n);
        for (std::size_t t = 1; t < n; ++t) {
            v[t] = std::log(e.V[t]) - std::log(e.V[t - 1]);
            var[t] = std::max(variance(p, t), kVarianceFloor);
            const double centred = v[t] - (delta * (w_.x[t] - w_.r[t]) + jumps_.a * jumps_.lambda - q_bar * jumps_.lambda);
            sw += 1.0 / var[t];
            swr += centred / var[t];
        }
        e.mu = mu_fixed ? *mu_fixed : swr / sw;
        constexpr double log2pi = 1.8378770664093453;
        double ll = -0.5 * static_cast<double>(n - 1) * log2pi;
        for (std::size_t t = 1; t < n; ++t) {
            const double m = e.mu + delta * (w_.x[t] - w_.r[t]) + jumps_.a * jumps_.lambda - q_bar * jumps_.lambda;
            ll += -std::log(e.V[t]) - 0.5 * std::log(var[t]) - std::log(e.dSdV[t]) -
                  0.5 * (v[t] - m) * (v[t] - m) / var[t];
        }
        e.loglik = std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
        return e;
    }

    FirmWindow w_;
    HNParams factor_;
    FirmJumps jumps_;
    QuadratureSpec quad_;
    int tau_;
    double h_ref_ = 0;
    std::vector<double> warm_;
};

struct FirmFitOptions {
    bool benchmark = false;
    bool standard_errors = false;
    int max_evals = 400;
    QuadratureSpec quad{};
};

namespace detail {

// Starting values from a regression of equity returns on the factor, scaled by leverage.
inline std::pair<double, double> firm_start(const FirmWindow& w, const FirmJumps& j) {
    const std::size_t n = w.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, lev = 0;
    for (std::size_t t = 1; t < n; ++t) {
        const double xe = w.x[t] - w.r[t];
        const double y = std::log(w.equity[t] / w.equity[t - 1]);
        sx += xe, sy += y, sxx += xe * xe, sxy += xe * y;
        lev += w.equity[t] / (w.equity[t] + w.debt[t]);
    }
    const double m = static_cast<double>(n - 1);
    lev /= m;
    const double vx = sxx / m - (sx / m) * (sx / m);
    const double beta = vx > 0 ? (sxy / m - sx / m * sy / m) / vx : 0.0;
    double ss = 0;
    for (std::size_t t = 1; t < n; ++t) {
        const double y = std::log(w.equity[t] / w.equity[t - 1]);
        const double e = y - sy / m - beta * (w.x[t] - w.r[t] - sx / m);
        ss += e * e;
    }
    const double xi = std::max(ss / m * lev * lev - j.lambda * (j.a * j.a + j.b * j.b), 1e-8);
    return {beta * lev, xi};
}

}  // namespace detail

inline FirmFit fit_firm(const FirmWindow& w, const HNParams& factor, const FirmJumps& jumps,
                        const FirmFitOptions& opt = {}) {
    const FirmJumps j = opt.benchmark ? FirmJumps{} : jumps;
    FirmLikelihood like(w, factor, j, opt.quad);
    auto [d0, xi0] = detail::firm_start(like.window(), j);

    auto objective = [&](const optim::Vec& th) {
        const double xi = std::exp(th[1]);
        if (xi < kVarianceFloor) return std::numeric_limits<double>::infinity();
        return -like.profile(th[0], xi).loglik;
    };
    optim::SimplexOptions so;
    so.max_evals = opt.max_evals;
    so.ftol = 1e-10;
    so.xtol = 1e-5;
    auto res = optim::nelder_mead(objective, {d0, std::log(xi0)}, {0.2, 0.7}, so);
    if (!std::isfinite(res.f)) {
        // retry from a conservative start
        res = optim::nelder_mead(objective, {0.0, std::log(1e-4)}, {0.5, 1.0}, so);
    }

    FirmFit fit;
    fit.benchmark = opt.benchmark;
    fit.evals = res.evals;
    fit.converged = res.converged;
    fit.se.fill(std::nan(""));
    auto best = like.profile(res.x[0], std::exp(res.x[1]));
    fit.params = {best.mu, res.x[0], std::exp(res.x[1])};
    if (!std::isfinite(best.loglik))
        throw EstimationError<FirmParams>("fit_firm: no finite likelihood (" + best.failure + ")", fit.params);
    fit.loglik = best.loglik;
    fit.assets = best.V;
    fit.deltas = best.dSdV;
    const std::size_t n = w.size();
    for (std::size_t t = 1; t < n; ++t) {
        const double v = std::log(best.V[t] / best.V[t - 1]);
        fit.returns.push_back(v);
        fit.residuals.push_back(v - fit.params.mu - fit.params.delta * (w.x[t] - w.r[t]));
    }
    if (opt.standard_errors) {
        const FirmParams& p = fit.params;
        double mean_var = 0;
        for (std::size_t t = 1; t < n; ++t) mean_var += like.variance(p, t);
        mean_var /= static_cast<double>(n - 1);
        const optim::Vec x{p.mu, p.delta, p.xi};
        const optim::Vec step{0.05 * std::sqrt(mean_var / static_cast<double>(n)), 1e-3 * std::max(std::abs(p.delta), 0.1),
                              0.01 * p.xi};
        auto negll = [&](const optim::Vec& v) { return -like.loglik(FirmParams{v[0], v[1], v[2]}); };
        auto se = optim::standard_errors_from_hessian(optim::numerical_hessian(negll, x, step));
        for (std::size_t i = 0; i < 3; ++i) fit.se[i] = se[i];
    }
    return fit;
}

// Idiosyncratic residuals with the compensated jump term replaced by its mean, zero.
inline std::vector<double> firm_residuals(const FirmFit& fit, std::span<const double> x, std::span<const double> r) {
    std::vector<double> w;
    w.reserve(fit.returns.size());
    for (std::size_t t = 0; t < fit.returns.size(); ++t)
        w.push_back(fit.returns[t] - fit.params.mu - fit.params.delta * (x[t + 1] - r[t + 1]));
    return w;
}

}  // namespace sysrisk
