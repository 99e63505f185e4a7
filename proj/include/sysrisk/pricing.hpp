#pragma once

// Equity as a European call on firm assets: the asset generating function,
// Fourier-inversion price and delta, and inversion of observed equity into V.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "sysrisk/common_factor.hpp"
#include "sysrisk/error.hpp"
#include "sysrisk/jumps.hpp"

namespace sysrisk {

// Structural parameters of one firm.
struct FirmParams {
    double mu = 0;     // mean log asset return per day
    double delta = 0;  // common-factor loading
    double xi = 0;     // idiosyncratic variance per day
};

// Everything the asset law depends on apart from the day's state.
struct AssetModel {
    HNParams factor;
    double delta = 0;
    double xi = 0;
    double lambda = 0;
    double a = 0;
    double b = 0;
    int tau = 252;  // days to maturity
};

inline AssetModel asset_model(const HNParams& factor, const FirmParams& fp, const JumpParams& jp, std::size_t j,
                              int tau = 252) {
    return {factor, fp.delta, fp.xi, jp.lambda, jp.a[j], jp.b[j], tau};
}

inline AssetModel no_jump_model(const HNParams& factor, const FirmParams& fp, int tau = 252) {
    return {factor, fp.delta, fp.xi, 0.0, 0.0, 0.0, tau};
}

struct PricingContext {
    AssetModel model;
    double r = 0;       // per day
    double h_next = 0;  // h_{t+1}
    double X_t = 1;     // factor level; cancels from the asset law
    double debt_T = 0;  // face value at maturity

    double debt_t() const { return std::exp(-r * model.tau) * debt_T; }
};

enum class GfMeasure {
    physical,          // printed form with the physical factor law
    risk_neutral_raw,  // printed form with the risk-neutral factor law
    risk_neutral,      // raw form rescaled so that e^{-r tau} E[V_T] = V
};

namespace detail {

inline cplx log_asset_gf_raw(const PricingContext& c, double V, cplx phi, bool risk_neutral) {
    const AssetModel& m = c.model;
    const GarchDynamics d = risk_neutral ? dynamics(to_risk_neutral(m.factor)) : dynamics(m.factor);
    const double tau = m.tau;
    cplx out = phi * std::log(V) - m.delta * phi * std::log(c.X_t) +
               phi * (c.r - c.r * m.delta - m.a * m.lambda) * tau + phi * phi * m.xi * tau / 2.0;
    if (m.delta != 0.0) {
        auto [A, B] = gen_fn_start(d, c.r, m.tau, m.delta * phi);
        out += m.delta * phi * std::log(c.X_t) + A + B * c.h_next;
    }
    // log of the jump MGF, kept unexponentiated to stay on the principal branch
    return out + m.lambda * tau * (std::exp(m.a * phi + 0.5 * m.b * m.b * phi * phi) - 1.0);
}

}  // namespace detail

// E_t[V_T^phi] under the chosen measure.
inline cplx asset_gf(const PricingContext& c, double V, cplx phi, GfMeasure measure) {
    if (!(V > 0)) throw DomainError("asset_gf: V must be positive");
    if (phi == cplx{}) return 1.0;
    if (measure == GfMeasure::physical) return std::exp(detail::log_asset_gf_raw(c, V, phi, false));
    cplx lg = detail::log_asset_gf_raw(c, V, phi, true);
    if (measure == GfMeasure::risk_neutral) {
        const double l1 = detail::log_asset_gf_raw(c, V, 1.0, true).real();
        lg += phi * (std::log(V) + c.r * c.model.tau - l1);
    }
    return std::exp(lg);
}

// ---------------------------------------------------------------------------
// Fourier inversion

struct QuadratureSpec {
    double phi_max = 200;        // initial truncation, doubled while the tail is still large
    double phi_max_cap = 12800;  // give up beyond this
    double step = 0;             // node spacing; 0 picks it from y_span
    double y_span = 8;           // largest |log(V e^{r tau} / D_T)| handled without aliasing
    double tail_tol = 1e-15;     // envelope level treated as zero
};

struct InversionOptions {
    double rel_tol = 1e-10;
    int max_iter = 200;
};

// Node tables for one AssetModel under the normalised risk-neutral law. With
// L(phi) = phi r tau + M(phi) + h N(phi), the tables hold M and N at phi = i u_k
// (G0) and phi = 1 + i u_k (G1). Neither depends on V, r or the day.
class PricingKernel {
public:
    PricingKernel() = default;

    PricingKernel(const AssetModel& m, const QuadratureSpec& q = {}, double h_ref = 0) : model_(m), spec_(q) {
        if (m.tau <= 0) throw DomainError("pricing: maturity must be positive");
        if (m.xi < 0 || m.lambda < 0 || m.b < 0) throw DomainError("pricing: negative variance parameter");
        dyn_ = dynamics(to_risk_neutral(m.factor));
        const double tau = m.tau;
        double hbar = h_ref;
        const double pers = m.factor.persistence();
        if (pers < 1 && pers > -1) hbar = std::max(hbar, m.factor.unconditional_variance());
        const double var_T = m.xi * tau + m.delta * m.delta * tau * std::max(hbar, 0.0) +
                             m.lambda * tau * (m.a * m.a + m.b * m.b);
        sd_T_ = std::sqrt(var_T);
        step_ = q.step > 0 ? q.step : std::min(0.5, 2 * std::numbers::pi / (q.y_span + 12 * sd_T_ + 2));

        // A(delta) and B(delta) at phi = 1 for the normalisation.
        if (m.delta != 0.0) {
            auto [A1, B1] = gen_fn_start(dyn_, 0.0, m.tau, cplx(m.delta, 0));
            A1_ = A1;
            B1_ = B1;
        }
        jump1_ = m.lambda * tau * (std::exp(m.a + 0.5 * m.b * m.b) - 1.0);

        const double eps = 1e-8;
        auto [m0e, n0e] = mn(cplx(0, eps));
        auto [m1e, n1e] = mn(cplx(1, eps));
        dm0_ = m0e.imag() / eps;
        dn0_ = n0e.imag() / eps;
        dm1_ = m1e.imag() / eps;
        dn1_ = n1e.imag() / eps;

        const double h_env = 4 * std::max(hbar, 0.0);
        double phi_max = q.phi_max;
        std::size_t k = 1;
        int quiet = 0;
        for (;;) {
            const double u = static_cast<double>(k) * step_;
            if (u > phi_max) {
                if (phi_max * 2 > q.phi_max_cap)
                    throw NumericalError("pricing quadrature did not converge: tail envelope " +
                                         std::to_string(last_envelope_) + " at phi = " + std::to_string(phi_max) +
                                         " (delta=" + std::to_string(m.delta) + ", xi=" + std::to_string(m.xi) + ")");
                phi_max *= 2;
            }
            auto [M0, N0] = mn(cplx(0, u));
            auto [M1, N1] = mn(cplx(1, u));
            m0_.push_back(M0), n0_.push_back(N0), m1_.push_back(M1), n1_.push_back(N1);
            last_envelope_ = std::max({std::exp(M0.real()), (1 + u) * std::exp(M1.real()),
                                       std::exp((M0 + h_env * N0).real()), (1 + u) * std::exp((M1 + h_env * N1).real())});
            if (last_envelope_ < q.tail_tol) {
                if (++quiet >= 3) break;
            } else {
                quiet = 0;
            }
            ++k;
        }
    }

    const AssetModel& model() const { return model_; }
    double step() const { return step_; }
    std::size_t nodes() const { return m0_.size(); }
    double total_sd() const { return sd_T_; }

    // Per-day state: r and h_{t+1}. Cheap; everything V-dependent happens in evaluate().
    class Day {
    public:
        struct Eval {
            double price;
            double delta;
            double p1;
            double p0;
        };

        double debt_t() const { return debt_t_; }

        Eval evaluate(double V) const {
            if (!(V > 0)) throw DomainError("equity_price: V must be positive");
            if (debt_t_ <= 0) return {V, 1.0, 1.0, 1.0};
            const double y = std::log(V / debt_t_);
            if (std::abs(y) > k_->spec_.y_span + 6 * k_->sd_T_)
                return y > 0 ? Eval{V - debt_t_, 1.0, 1.0, 1.0} : Eval{0.0, 0.0, 0.0, 0.0};
            const double du = k_->step_;
            const cplx w(std::cos(du * y), std::sin(du * y));
            cplx z = 1.0;
            double j0 = 0.5 * (y + d0_), j1 = 0.5 * (y + d1_), k0 = 0.5, k1 = 0.5;
            const std::size_t n = g0_.size();
            for (std::size_t i = 0; i < n; ++i) {
                z *= w;
                const double u = static_cast<double>(i + 1) * du;
                const cplx a0 = z * g0_[i], a1 = z * g1_[i];
                j0 += a0.imag() / u;
                j1 += a1.imag() / u;
                k0 += a0.real();
                k1 += a1.real();
            }
            j0 *= du, j1 *= du, k0 *= du, k1 *= du;
            const double pi = std::numbers::pi;
            const double p1 = 0.5 + j1 / pi, p0 = 0.5 + j0 / pi;
            double price = V * p1 - debt_t_ * p0;
            price = std::clamp(price, std::max(0.0, V - debt_t_), V);
            const double delta = p1 + k1 / pi - debt_t_ / V * k0 / pi;
            return {price, delta, p1, p0};
        }

        double price(double V) const { return evaluate(V).price; }
        double delta(double V) const { return evaluate(V).delta; }

        // Safeguarded Newton on [S, S + 10 D_t]; `guess` is used when it lies in the bracket.
        double invert(double S_obs, double guess = 0, const InversionOptions& o = {}) const {
            if (!(S_obs > 0)) throw DomainError("invert_asset_value: observed equity must be positive");
            if (debt_t_ <= 0) return S_obs;
            double lo = S_obs, hi = S_obs + 10 * debt_t_;
            const double tol = o.rel_tol * S_obs;
            double V = (guess > lo && guess < hi) ? guess : S_obs + debt_t_;
            for (int it = 0; it < o.max_iter; ++it) {
                const Eval e = evaluate(V);
                const double f = e.price - S_obs;
                if (std::abs(f) <= tol) return V;
                if (f > 0) hi = V;
                else lo = V;
                double next = e.delta > 1e-12 ? V - f / e.delta : 0.5 * (lo + hi);
                if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
                if (hi - lo <= 1e-15 * hi) return V;
                V = next;
            }
            throw InversionError("invert_asset_value: no convergence for S = " + std::to_string(S_obs) +
                                 ", D_t = " + std::to_string(debt_t_) + " (bracket [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "])");
        }

    private:
        friend class PricingKernel;
        const PricingKernel* k_ = nullptr;
        double debt_t_ = 0;
        double d0_ = 0, d1_ = 0;
        std::vector<cplx> g0_, g1_;
    };

    // debt_T is the face at maturity; y uses D_t = e^{-r tau} D_T.
    Day day(double r, double h_next, double debt_T) const {
        if (!(h_next > 0)) throw DomainError("pricing: h_{t+1} must be positive");
        if (debt_T < 0) throw DomainError("pricing: negative debt");
        Day d;
        d.k_ = this;
        d.debt_t_ = std::exp(-r * model_.tau) * debt_T;
        d.d0_ = dm0_ + h_next * dn0_;
        d.d1_ = dm1_ + h_next * dn1_;
        d.g0_.reserve(m0_.size());
        d.g1_.reserve(m0_.size());
        int quiet = 0;
        for (std::size_t i = 0; i < m0_.size(); ++i) {
            const double u = static_cast<double>(i + 1) * step_;
            const cplx g0 = std::exp(m0_[i] + h_next * n0_[i]);
            const cplx g1 = std::exp(m1_[i] + h_next * n1_[i]);
            d.g0_.push_back(g0);
            d.g1_.push_back(g1);
            if (std::max(std::abs(g0), (1 + u) * std::abs(g1)) < spec_.tail_tol) {
                if (++quiet >= 3) break;
            } else {
                quiet = 0;
            }
        }
        return d;
    }

private:
    // V- and r-free parts of the log generating function at phi.
    std::pair<cplx, cplx> mn(cplx phi) const {
        const AssetModel& m = model_;
        const double tau = m.tau;
        cplx M = m.xi * tau * (phi * phi - phi) / 2.0;
        cplx N = 0;
        if (m.delta != 0.0) {
            auto [A, B] = gen_fn_start(dyn_, 0.0, m.tau, m.delta * phi);
            M += A - phi * A1_;
            N = B - phi * B1_;
        }
        if (m.lambda > 0) M += m.lambda * tau * (std::exp(m.a * phi + 0.5 * m.b * m.b * phi * phi) - 1.0) - phi * jump1_;
        return {M, N};
    }

    AssetModel model_;
    QuadratureSpec spec_;
    GarchDynamics dyn_;
    double sd_T_ = 0;
    double step_ = 0.5;
    cplx A1_ = 0, B1_ = 0;
    double jump1_ = 0;
    double dm0_ = 0, dn0_ = 0, dm1_ = 0, dn1_ = 0;
    double last_envelope_ = 0;
    std::vector<cplx> m0_, n0_, m1_, n1_;
};

// ---------------------------------------------------------------------------
// Single-shot wrappers

inline double equity_price(const PricingContext& c, double V, const QuadratureSpec& q = {}) {
    if (c.debt_T <= 0) return V;
    QuadratureSpec qq = q;
    qq.y_span = std::max(q.y_span, std::abs(std::log(V / c.debt_t())) + 1);
    PricingKernel k(c.model, qq, c.h_next);
    return k.day(c.r, c.h_next, c.debt_T).price(V);
}

inline double equity_delta(const PricingContext& c, double V, const QuadratureSpec& q = {}) {
    if (c.debt_T <= 0) return 1.0;
    QuadratureSpec qq = q;
    qq.y_span = std::max(q.y_span, std::abs(std::log(V / c.debt_t())) + 1);
    PricingKernel k(c.model, qq, c.h_next);
    return k.day(c.r, c.h_next, c.debt_T).delta(V);
}

inline double invert_asset_value(const PricingContext& c, double S_obs, const QuadratureSpec& q = {},
                                 const InversionOptions& o = {}) {
    if (c.debt_T <= 0) return S_obs;
    QuadratureSpec qq = q;
    qq.y_span = std::max(q.y_span, std::abs(std::log((S_obs + c.debt_t()) / c.debt_t())) + 3);
    PricingKernel k(c.model, qq, c.h_next);
    return k.day(c.r, c.h_next, c.debt_T).invert(S_obs, 0, o);
}

}  // namespace sysrisk
