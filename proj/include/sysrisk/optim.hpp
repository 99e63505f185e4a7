#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace sysrisk::optim {

using Vec = std::vector<double>;

struct SimplexOptions {
    int max_evals = 4000;
    double ftol = 1e-10;  // relative spread of simplex values
    double xtol = 1e-6;   // absolute spread of simplex vertices
};

struct SimplexResult {
    Vec x;
    double f = std::numeric_limits<double>::infinity();
    int evals = 0;
    bool converged = false;
};

// Nelder–Mead minimiser. Non-finite objective values are treated as +inf.
template <class F>
SimplexResult nelder_mead(F&& f, const Vec& x0, const Vec& step, const SimplexOptions& opt = {}) {
    const std::size_t n = x0.size();
    std::vector<Vec> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    int evals = 0;
    auto eval = [&](const Vec& x) {
        ++evals;
        double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    SimplexResult res;
    while (evals < opt.max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double fspread = std::abs(vals[worst] - vals[best]);
        double xspread = 0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k) xspread = std::max(xspread, std::abs(pts[i][k] - pts[best][k]));
        if (std::isfinite(vals[worst]) && fspread <= opt.ftol * (std::abs(vals[best]) + 1e-12) &&
            xspread <= opt.xtol) {
            res.converged = true;
            break;
        }

        Vec centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);
        auto along = [&](double t) {
            Vec x(n);
            for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
            return x;
        };
        Vec xr = along(-1.0);
        double fr = eval(xr);
        if (fr < vals[best]) {
            Vec xe = along(-2.0);
            double fe = eval(xe);
            if (fe < fr) pts[worst] = xe, vals[worst] = fe;
            else pts[worst] = xr, vals[worst] = fr;
        } else if (fr < vals[second]) {
            pts[worst] = xr, vals[worst] = fr;
        } else {
            bool outside = fr < vals[worst];
            Vec xc = along(outside ? -0.5 : 0.5);
            double fc = eval(xc);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = xc, vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
                    vals[i] = eval(pts[i]);
                }
            }
        }
    }
    auto it = std::min_element(vals.begin(), vals.end());
    res.x = pts[static_cast<std::size_t>(it - vals.begin())];
    res.f = *it;
    res.evals = evals;
    return res;
}

// Restarted simplex: each start is polished by a second simplex around its optimum,
// and the best result over all starts wins (first start on ties).
template <class F>
SimplexResult nelder_mead_multistart(F&& f, const std::vector<Vec>& starts, const Vec& step,
                                     const SimplexOptions& opt = {}) {
    SimplexResult best;
    for (const auto& s : starts) {
        auto r = nelder_mead(f, s, step, opt);
        Vec small(step.size());
        for (std::size_t k = 0; k < step.size(); ++k) small[k] = 0.1 * step[k];
        auto r2 = nelder_mead(f, r.x, small, opt);
        r2.evals += r.evals;
        if (r2.f > r.f) r2.x = r.x, r2.f = r.f;
        if (r2.f < best.f) best = r2;
    }
    return best;
}

struct LeastSquaresOptions {
    int max_iter = 200;
    double gtol = 1e-12;
    double ftol = 1e-14;
};

struct LeastSquaresResult {
    Vec x;
    double cost = 0;  // 0.5 * ||r||^2
    int iterations = 0;
    bool converged = false;
};

// Levenberg–Marquardt with forward-difference Jacobian. `resid(x, out)` fills out.
template <class R>
LeastSquaresResult levenberg_marquardt(R&& resid, const Vec& x0, const LeastSquaresOptions& opt = {}) {
    const Eigen::Index n = static_cast<Eigen::Index>(x0.size());
    Vec x = x0, r0, r1;
    resid(x, r0);
    const Eigen::Index m = static_cast<Eigen::Index>(r0.size());
    auto cost_of = [](const Vec& r) {
        double c = 0;
        for (double v : r) c += v * v;
        return std::isfinite(c) ? 0.5 * c : std::numeric_limits<double>::infinity();
    };
    double cost = cost_of(r0);
    double mu = 1e-3;
    LeastSquaresResult res;
    Eigen::MatrixXd J(m, n);
    for (int it = 0; it < opt.max_iter; ++it) {
        res.iterations = it + 1;
        for (Eigen::Index k = 0; k < n; ++k) {
            Vec xp = x;
            double h = 1e-7 * std::max(1.0, std::abs(x[static_cast<std::size_t>(k)]));
            xp[static_cast<std::size_t>(k)] += h;
            resid(xp, r1);
            for (Eigen::Index i = 0; i < m; ++i) J(i, k) = (r1[static_cast<std::size_t>(i)] - r0[static_cast<std::size_t>(i)]) / h;
        }
        Eigen::Map<const Eigen::VectorXd> rv(r0.data(), m);
        Eigen::VectorXd g = J.transpose() * rv;
        if (g.lpNorm<Eigen::Infinity>() < opt.gtol) {
            res.converged = true;
            break;
        }
        Eigen::MatrixXd A = J.transpose() * J;
        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd Ad = A;
            for (Eigen::Index k = 0; k < n; ++k) Ad(k, k) += mu * std::max(A(k, k), 1e-12);
            Eigen::VectorXd dx = Ad.ldlt().solve(-g);
            Vec xn = x;
            for (Eigen::Index k = 0; k < n; ++k) xn[static_cast<std::size_t>(k)] += dx(k);
            resid(xn, r1);
            double cn = cost_of(r1);
            if (cn < cost) {
                double rel = (cost - cn) / std::max(cost, 1e-300);
                x = xn, r0 = r1, cost = cn;
                mu = std::max(mu / 3.0, 1e-12);
                improved = true;
                if (rel < opt.ftol) res.converged = true;
                break;
            }
            mu *= 4.0;
        }
        if (!improved) {
            res.converged = true;  // no descent available at any damping: stationary to working precision
            break;
        }
        if (res.converged) break;
    }
    res.x = x;
    res.cost = cost;
    return res;
}

// Central-difference Hessian with per-coordinate absolute steps.
template <class F>
Eigen::MatrixXd numerical_hessian(F&& f, const Vec& x, const Vec& h) {
    const std::size_t n = x.size();
    Eigen::MatrixXd H(n, n);
    const double f0 = f(x);
    for (std::size_t i = 0; i < n; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        H(i, i) = (f(xp) - 2 * f0 + f(xm)) / (h[i] * h[i]);
        for (std::size_t j = 0; j < i; ++j) {
            Vec pp = x, pm = x, mp = x, mm = x;
            pp[i] += h[i], pp[j] += h[j];
            pm[i] += h[i], pm[j] -= h[j];
            mp[i] -= h[i], mp[j] += h[j];
            mm[i] -= h[i], mm[j] -= h[j];
            H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h[i] * h[j]);
        }
    }
    return H;
}

// Standard errors from the inverse of the negative log-likelihood Hessian.
// Entries are NaN where the matrix is not positive definite.
inline Vec standard_errors_from_hessian(const Eigen::MatrixXd& neg_hessian) {
    Vec se(static_cast<std::size_t>(neg_hessian.rows()), std::nan(""));
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hessian);
    if (ldlt.info() != Eigen::Success) return se;
    Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(neg_hessian.rows(), neg_hessian.cols()));
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        if (cov(i, i) > 0) se[static_cast<std::size_t>(i)] = std::sqrt(cov(i, i));
    return se;
}

}  // namespace sysrisk::optim
