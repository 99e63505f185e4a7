#pragma once

// Heston–Nandi GARCH(1,1) common factor: estimation under the physical measure,
// the risk-neutral mapping, the generating-function recursion and path simulation.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sysrisk/error.hpp"
#include "sysrisk/optim.hpp"
#include "sysrisk/rng.hpp"

namespace sysrisk {

using cplx = std::complex<double>;

// Physical-measure parameters, per trading day.
struct HNParams {
    double omega = 0;
    double alpha = 0;
    double eta = 0;
    double gamma = 0;
    double lambda_p = 0;

    double persistence() const { return eta + alpha * gamma * gamma; }
    double unconditional_variance() const { return (omega + alpha) / (1.0 - persistence()); }
};

struct RNParams {
    double omega = 0;
    double alpha = 0;
    double eta = 0;
    double gamma_star = 0;
};

// The recursion only needs the excess-drift loading and the asymmetry; both measures
// are instances of this form (risk-neutral: lambda = -1/2, gamma = gamma*).
struct GarchDynamics {
    double omega = 0;
    double alpha = 0;
    double eta = 0;
    double gamma = 0;
    double lambda = 0;
};

inline RNParams to_risk_neutral(const HNParams& p) {
    return {p.omega, p.alpha, p.eta, p.gamma + p.lambda_p + 0.5};
}

inline HNParams from_risk_neutral(const RNParams& q, double lambda_p) {
    return {q.omega, q.alpha, q.eta, q.gamma_star - lambda_p - 0.5, lambda_p};
}

inline GarchDynamics dynamics(const HNParams& p) { return {p.omega, p.alpha, p.eta, p.gamma, p.lambda_p}; }
inline GarchDynamics dynamics(const RNParams& q) { return {q.omega, q.alpha, q.eta, q.gamma_star, -0.5}; }

// ---------------------------------------------------------------------------
// Generating function E_t[X_T^phi] = X_t^phi exp(A(t;T,phi) + B(t;T,phi) h_{t+1})

struct GfCoefficients {
    // Index k holds A(t+k; T, phi); the last element is the terminal A(T;T,phi) = 0.
    std::vector<cplx> A;
    std::vector<cplx> B;
};

namespace detail {

// 1 - 2 alpha B must stay in the right half-plane so the principal log is the
// continuous branch along the recursion.
inline cplx guarded_log_denominator(double alpha, cplx B, cplx phi) {
    cplx z = 1.0 - 2.0 * alpha * B;
    if (std::abs(z) < 1e-12 || !(z.real() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw NumericalError("generating-function recursion left the principal branch (1-2*alpha*B = " +
                             std::to_string(z.real()) + (z.imag() < 0 ? "" : "+") + std::to_string(z.imag()) +
                             "i at phi = " + std::to_string(phi.real()) + "+" + std::to_string(phi.imag()) + "i)");
    return z;
}

}  // namespace detail

inline GfCoefficients gen_fn_coeffs(const GarchDynamics& d, double r, int steps, cplx phi) {
    if (steps < 0) throw DomainError("gen_fn_coeffs: t must not exceed T");
    GfCoefficients c;
    c.A.assign(static_cast<std::size_t>(steps) + 1, cplx{});
    c.B.assign(static_cast<std::size_t>(steps) + 1, cplx{});
    const cplx b_const = phi * (d.lambda + d.gamma) - 0.5 * d.gamma * d.gamma;
    const cplx half_sq = 0.5 * (phi - d.gamma) * (phi - d.gamma);
    for (int k = steps - 1; k >= 0; --k) {
        const cplx Bn = c.B[static_cast<std::size_t>(k) + 1];
        const cplx An = c.A[static_cast<std::size_t>(k) + 1];
        const cplx z = detail::guarded_log_denominator(d.alpha, Bn, phi);
        c.A[static_cast<std::size_t>(k)] = An + phi * r + Bn * d.omega - 0.5 * std::log(z);
        c.B[static_cast<std::size_t>(k)] = b_const + d.eta * Bn + half_sq / z;
    }
    return c;
}

// Only the (A, B) pair at time t; avoids the per-step storage.
inline std::pair<cplx, cplx> gen_fn_start(const GarchDynamics& d, double r, int steps, cplx phi) {
    if (steps < 0) throw DomainError("gen_fn_coeffs: t must not exceed T");
    cplx A{}, B{};
    const cplx b_const = phi * (d.lambda + d.gamma) - 0.5 * d.gamma * d.gamma;
    const cplx half_sq = 0.5 * (phi - d.gamma) * (phi - d.gamma);
    for (int k = 0; k < steps; ++k) {
        const cplx z = detail::guarded_log_denominator(d.alpha, B, phi);
        A = A + phi * r + B * d.omega - 0.5 * std::log(z);
        B = b_const + d.eta * B + half_sq / z;
    }
    return {A, B};
}

inline cplx common_factor_gf(const GarchDynamics& d, double r, double X_t, double h_next, int steps, cplx phi) {
    if (!(X_t > 0)) throw DomainError("common_factor_gf: X_t must be positive");
    if (!(h_next > 0)) throw DomainError("common_factor_gf: h_{t+1} must be positive");
    if (phi == cplx{}) return 1.0;
    auto [A, B] = gen_fn_start(d, r, steps, phi);
    return std::exp(phi * std::log(X_t) + A + B * h_next);
}

// ---------------------------------------------------------------------------
// Filtering and estimation

struct FactorFilter {
    std::vector<double> h;    // h[t] is the variance of x[t]; h.back() is the one-step-ahead forecast
    std::vector<double> eps;  // standardized shocks
    double loglik = -std::numeric_limits<double>::infinity();
};

inline FactorFilter hn_filter(const HNParams& p, std::span<const double> x, double r, double h1) {
    FactorFilter f;
    const std::size_t n = x.size();
    f.h.resize(n + 1);
    f.eps.resize(n);
    f.h[0] = h1;
    double ll = 0;
    constexpr double log2pi = 1.8378770664093453;
    for (std::size_t t = 0; t < n; ++t) {
        const double h = f.h[t];
        if (!(h > 0) || !std::isfinite(h)) {
            f.loglik = -std::numeric_limits<double>::infinity();
            return f;
        }
        const double sh = std::sqrt(h);
        const double e = (x[t] - r - p.lambda_p * h) / sh;
        f.eps[t] = e;
        ll += -0.5 * (log2pi + std::log(h) + e * e);
        const double u = e - p.gamma * sh;
        f.h[t + 1] = p.omega + p.alpha * u * u + p.eta * h;
    }
    f.loglik = std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    return f;
}

inline double sample_variance(std::span<const double> x) {
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

struct HNFitOptions {
    int restarts = 5;
    std::uint64_t seed = 0x5eed;
    bool standard_errors = false;
};

struct HNFit {
    HNParams params;
    FactorFilter filter;
    double h1 = 0;
    std::array<double, 5> se{};  // (omega, alpha, eta, gamma, lambda_p); NaN when unavailable
    bool converged = false;
    int evals = 0;
};

namespace detail {

// Unconstrained coordinates: (log omega, log alpha, gamma, logit persistence, lambda_p).
inline HNParams hn_from_theta(const optim::Vec& th) {
    HNParams p;
    p.omega = std::exp(th[0]);
    p.alpha = std::exp(th[1]);
    p.gamma = th[2];
    const double pers = 1.0 / (1.0 + std::exp(-th[3]));
    p.eta = pers - p.alpha * p.gamma * p.gamma;
    p.lambda_p = th[4];
    return p;
}

inline optim::Vec hn_to_theta(const HNParams& p) {
    const double pers = std::clamp(p.persistence(), 1e-6, 1 - 1e-9);
    return {std::log(p.omega), std::log(p.alpha), p.gamma, std::log(pers / (1 - pers)), p.lambda_p};
}

}  // namespace detail

inline HNFit fit_hn_garch(std::span<const double> x, double r, const HNFitOptions& opt = {}) {
    if (x.size() < 100) throw DataError("fit_hn_garch: at least 100 observations required");
    for (double v : x)
        if (!std::isfinite(v)) throw DataError("fit_hn_garch: non-finite factor return");
    const double var = sample_variance(x);
    if (!(var > 1e-20)) throw DegenerateInputError("fit_hn_garch: factor returns have zero variance");

    auto objective = [&](const optim::Vec& th) {
        const HNParams p = detail::hn_from_theta(th);
        return -hn_filter(p, x, r, var).loglik;
    };

    HNParams guess;
    guess.alpha = 0.5 * 0.1 * var;
    guess.omega = 0.5 * 0.1 * var;
    guess.gamma = std::sqrt(0.05 / guess.alpha);
    guess.eta = 0.9 - guess.alpha * guess.gamma * guess.gamma;
    guess.lambda_p = 0.0;
    std::vector<optim::Vec> starts{detail::hn_to_theta(guess)};
    Stream rng = Stream(opt.seed).child("hn-restarts");
    std::normal_distribution<double> z;
    for (int k = 1; k < std::max(opt.restarts, 1); ++k) {
        optim::Vec th = starts.front();
        th[0] += z(rng);
        th[1] += z(rng);
        th[2] *= std::exp(0.5 * z(rng)) * (k % 4 == 3 ? -1.0 : 1.0);
        th[3] += z(rng);
        th[4] += 2.0 * z(rng);
        starts.push_back(th);
    }
    const optim::Vec step{1.0, 1.0, 0.25 * std::abs(guess.gamma), 1.0, 2.0};
    optim::SimplexOptions so;
    so.max_evals = 3000;
    so.ftol = 1e-12;
    so.xtol = 1e-7;
    auto best = optim::nelder_mead_multistart(objective, starts, step, so);

    HNFit fit;
    fit.params = detail::hn_from_theta(best.x);
    fit.h1 = var;
    fit.filter = hn_filter(fit.params, x, r, var);
    fit.evals = best.evals;
    fit.converged = best.converged && std::isfinite(fit.filter.loglik);
    fit.se.fill(std::nan(""));
    if (!std::isfinite(fit.filter.loglik))
        throw EstimationError<HNParams>("fit_hn_garch: no finite likelihood found", fit.params);
    if (opt.standard_errors) {
        const HNParams& p = fit.params;
        optim::Vec nat{p.omega, p.alpha, p.eta, p.gamma, p.lambda_p};
        optim::Vec hstep(5);
        const optim::Vec floor{1e-9, 1e-9, 1e-6, 1e-3, 1e-3};
        for (std::size_t i = 0; i < 5; ++i) hstep[i] = std::max(1e-3 * std::abs(nat[i]), floor[i] * 1e-2);
        auto negll = [&](const optim::Vec& v) {
            return -hn_filter(HNParams{v[0], v[1], v[2], v[3], v[4]}, x, r, var).loglik;
        };
        auto se = optim::standard_errors_from_hessian(optim::numerical_hessian(negll, nat, hstep));
        for (std::size_t i = 0; i < 5; ++i) fit.se[i] = se[i];
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Simulation

// One step of the discrete recursion: returns x_t and the next variance.
struct FactorStep {
    double x;
    double h_next;
};

inline FactorStep factor_step(const GarchDynamics& d, double r, double h, double eps) {
    const double sh = std::sqrt(h);
    const double u = eps - d.gamma * sh;
    return {r + d.lambda * h + sh * eps, d.omega + d.alpha * u * u + d.eta * h};
}

struct FactorPaths {
    int n_paths = 0;
    int horizon = 0;
    std::vector<double> x;  // [path * horizon + day]
    std::vector<double> h;  // variance used for x on that day

    double x_at(int path, int day) const { return x[static_cast<std::size_t>(path) * horizon + day]; }
    double h_at(int path, int day) const { return h[static_cast<std::size_t>(path) * horizon + day]; }
};

// Each path draws from its own child stream, so results do not depend on path order.
inline FactorPaths simulate_factor(const GarchDynamics& d, double r, double h_start, int horizon, int n_paths,
                                   Stream stream) {
    if (!(h_start > 0)) throw ConfigError("simulate_factor: h_start must be positive");
    if (n_paths < 1) throw ConfigError("simulate_factor: n_paths must be at least 1");
    if (horizon < 0) throw ConfigError("simulate_factor: negative horizon");
    FactorPaths out;
    out.n_paths = n_paths;
    out.horizon = horizon;
    out.x.resize(static_cast<std::size_t>(n_paths) * horizon);
    out.h.resize(out.x.size());
    for (int p = 0; p < n_paths; ++p) {
        Stream s = stream.child(static_cast<std::uint64_t>(p));
        std::normal_distribution<double> z;
        double h = h_start;
        for (int t = 0; t < horizon; ++t) {
            auto st = factor_step(d, r, h, z(s));
            out.x[static_cast<std::size_t>(p) * horizon + t] = st.x;
            out.h[static_cast<std::size_t>(p) * horizon + t] = h;
            h = st.h_next;
        }
    }
    return out;
}

}  // namespace sysrisk
