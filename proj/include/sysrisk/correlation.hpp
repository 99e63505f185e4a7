#pragma once

// DCC(1,1) on idiosyncratic residuals (Engle two-step) and multivariate normal
// sampling of residual shocks.

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/error.hpp"
#include "sysrisk/optim.hpp"
#include "sysrisk/rng.hpp"

namespace sysrisk {

struct DCCParams {
    double a = 0;
    double b = 0;
    Eigen::MatrixXd r_bar;      // unconditional correlation of standardised residuals
    Eigen::VectorXd variances;  // per-firm residual variance (1/T)
};

struct DCCFit {
    DCCParams params;
    std::vector<Eigen::MatrixXd> omega;  // Omega_t for each in-sample day
    Eigen::MatrixXd omega_last;          // one-step-ahead forecast after the last day
    double quasi_loglik = 0;
    bool constant_fallback = false;
    double psd_shift = 0;  // largest eigenvalue change made by the PSD projection
    std::string warning;
};

// Symmetric eigenvalue clip at zero. Returns the projected matrix with unit diagonal
// preserved and reports the largest eigenvalue change.
inline Eigen::MatrixXd nearest_psd_correlation(const Eigen::MatrixXd& R, double* shift = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (R + R.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    double moved = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) < 0) moved = std::max(moved, -ev(i)), ev(i) = 0;
    if (shift) *shift = moved;
    if (moved == 0) return 0.5 * (R + R.transpose());
    Eigen::MatrixXd P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = P.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    P = d.asDiagonal() * P * d.asDiagonal();
    return P;
}

namespace detail {

inline Eigen::MatrixXd corr_from_q(const Eigen::MatrixXd& Q) {
    const Eigen::VectorXd d = Q.diagonal().cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * Q * d.asDiagonal();
}

// Quasi log-likelihood of the correlation step; optionally records R_t.
inline double dcc_qll(const Eigen::MatrixXd& z, const Eigen::MatrixXd& r_bar, double a, double b,
                      std::vector<Eigen::MatrixXd>* rs = nullptr, Eigen::MatrixXd* q_next = nullptr) {
    const Eigen::Index T = z.rows();
    Eigen::MatrixXd Q = r_bar;
    double ll = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
        if (t > 0) {
            const Eigen::VectorXd zp = z.row(t - 1).transpose();
            Q = (1 - a - b) * r_bar + a * zp * zp.transpose() + b * Q;
        }
        const Eigen::MatrixXd R = corr_from_q(Q);
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        const Eigen::VectorXd zt = z.row(t).transpose();
        const Eigen::VectorXd y = llt.matrixL().solve(zt);
        double logdet = 0;
        for (Eigen::Index i = 0; i < R.rows(); ++i) logdet += 2 * std::log(llt.matrixL()(i, i));
        ll += -0.5 * (logdet + y.squaredNorm() - zt.squaredNorm());
        if (rs) rs->push_back(R);
    }
    if (q_next) {
        const Eigen::VectorXd zl = z.row(T - 1).transpose();
        *q_next = (1 - a - b) * r_bar + a * zl * zl.transpose() + b * Q;
    }
    return ll;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

struct DCCOptions {
    bool fix_zero = false;  // impose a = b = 0
};

// residuals: rows are days, columns are firms.
inline DCCFit fit_dcc(const Eigen::MatrixXd& residuals, const DCCOptions& opt = {}) {
    const Eigen::Index T = residuals.rows(), m = residuals.cols();
    if (m < 1) throw DataError("fit_dcc: no firms");
    if (!residuals.allFinite()) throw DataError("fit_dcc: non-finite residual");
    DCCFit fit;
    const Eigen::RowVectorXd mean = residuals.colwise().mean();
    const Eigen::MatrixXd c = residuals.rowwise() - mean;
    fit.params.variances = c.array().square().colwise().sum().transpose() / static_cast<double>(T);
    for (Eigen::Index j = 0; j < m; ++j)
        if (!(fit.params.variances(j) > 0)) throw DegenerateInputError("fit_dcc: residual series with zero variance");
    const Eigen::VectorXd sd = fit.params.variances.cwiseSqrt();
    const Eigen::MatrixXd D = sd.asDiagonal();

    if (m == 1) {
        fit.params.r_bar = Eigen::MatrixXd::Ones(1, 1);
        fit.omega.assign(static_cast<std::size_t>(T), fit.params.variances.asDiagonal());
        fit.omega_last = fit.params.variances.asDiagonal();
        return fit;
    }
    if (T <= 10 * m) throw DataError("fit_dcc: need more than 10 days per firm");

    const Eigen::MatrixXd z = c * sd.cwiseInverse().asDiagonal();
    Eigen::MatrixXd rbar = z.transpose() * z / static_cast<double>(T);
    rbar = nearest_psd_correlation(rbar, &fit.psd_shift);
    if (fit.psd_shift > 0) fit.warning = "unconditional correlation projected to the PSD cone";
    fit.params.r_bar = rbar;

    double a = 0, b = 0;
    if (!opt.fix_zero) {
        // theta = (logit persistence, logit news share)
        auto unpack = [](const optim::Vec& th, double& aa, double& bb) {
            const double p = 0.999 * detail::logistic(th[0]);
            aa = p * detail::logistic(th[1]);
            bb = p - aa;
        };
        auto obj = [&](const optim::Vec& th) {
            double aa, bb;
            unpack(th, aa, bb);
            return -detail::dcc_qll(z, rbar, aa, bb);
        };
        auto logit = [](double p) { return std::log(p / (1 - p)); };
        std::vector<optim::Vec> starts{{logit(0.93 / 0.999), logit(0.03 / 0.93)},
                                       {logit(0.98 / 0.999), logit(0.01 / 0.98)},
                                       {logit(0.5 / 0.999), logit(0.2)}};
        optim::SimplexOptions so;
        so.max_evals = 600;
        so.ftol = 1e-10;
        so.xtol = 1e-6;
        auto res = optim::nelder_mead_multistart(obj, starts, {0.7, 0.7}, so);
        if (!std::isfinite(res.f)) {
            fit.constant_fallback = true;
            fit.warning = "DCC optimisation failed; constant correlation used";
        } else {
            unpack(res.x, a, b);
        }
    }
    fit.params.a = a;
    fit.params.b = b;
    std::vector<Eigen::MatrixXd> rs;
    Eigen::MatrixXd q_next;
    fit.quasi_loglik = detail::dcc_qll(z, rbar, a, b, &rs, &q_next);
    fit.omega.reserve(rs.size());
    for (const auto& R : rs) fit.omega.push_back(D * R * D);
    fit.omega_last = D * detail::corr_from_q(q_next) * D;
    return fit;
}

// ---------------------------------------------------------------------------
// Sampling

// Lower-triangular factor of a PSD matrix. Directions with zero variance get a zero
// column, so a rank-deficient matrix still factors.
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& S, double tol = 1e-12) {
    const Eigen::Index n = S.rows();
    if (S.cols() != n) throw DomainError("psd_cholesky: matrix not square");
    const double scale = std::max(S.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double d = S(k, k) - L.row(k).head(k).squaredNorm();
        if (d < -tol * scale) throw DomainError("psd_cholesky: matrix is not positive semi-definite");
        if (d <= tol * scale) continue;
        L(k, k) = std::sqrt(d);
        for (Eigen::Index i = k + 1; i < n; ++i) L(i, k) = (S(i, k) - L.row(i).head(k).dot(L.row(k).head(k))) / L(k, k);
    }
    // A skipped pivot must leave nothing unexplained in its column.
    const double err = (L * L.transpose() - S).cwiseAbs().maxCoeff();
    if (err > 1e-9 * scale) throw DomainError("psd_cholesky: matrix is not positive semi-definite");
    return L;
}

class MvnSampler {
public:
    MvnSampler() = default;
    explicit MvnSampler(const Eigen::MatrixXd& omega) : L_(psd_cholesky(omega)), z_(omega.rows()) {}

    Eigen::Index dim() const { return L_.rows(); }

    void draw(Stream& s, std::span<double> out) {
        std::normal_distribution<double> nd;
        for (Eigen::Index i = 0; i < z_.size(); ++i) z_(i) = nd(s);
        for (Eigen::Index i = 0; i < L_.rows(); ++i) {
            double v = 0;
            for (Eigen::Index k = 0; k <= i; ++k) v += L_(i, k) * z_(k);
            out[static_cast<std::size_t>(i)] = v;
        }
    }

private:
    Eigen::MatrixXd L_;
    Eigen::VectorXd z_;
};

// [(path * horizon + day) * m + firm]
inline std::vector<double> sample_residual_shocks(const Eigen::MatrixXd& omega, int horizon, int n_paths, Stream stream) {
    MvnSampler mvn(omega);
    const std::size_t m = static_cast<std::size_t>(omega.rows());
    std::vector<double> out(static_cast<std::size_t>(std::max(horizon, 0)) * static_cast<std::size_t>(n_paths) * m);
    for (int p = 0; p < n_paths; ++p) {
        Stream s = stream.child(static_cast<std::uint64_t>(p));
        for (int t = 0; t < horizon; ++t)
            mvn.draw(s, std::span<double>(out).subspan((static_cast<std::size_t>(p) * horizon + t) * m, m));
    }
    return out;
}

}  // namespace sysrisk
