#pragma once

// Correlated jumps: one Poisson arrival process shared by every firm, with
// firm-specific Gaussian marks. Moment-matching calibration, MGF, simulation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/error.hpp"
#include "sysrisk/optim.hpp"
#include "sysrisk/rng.hpp"

namespace sysrisk {

struct JumpParams {
    double lambda = 0;       // arrivals per day, shared
    std::vector<double> a;   // mean log-jump size per firm
    std::vector<double> b;   // jump-size std per firm

    std::size_t n_firms() const { return a.size(); }
    double q_bar(std::size_t j) const { return a[j]; }
    double b_hat_sq(std::size_t j) const { return a[j] * a[j] + b[j] * b[j]; }
    double jump_variance(std::size_t j) const { return lambda * b_hat_sq(j); }
};

struct MomentTargets {
    Eigen::VectorXd variance;         // per firm, 1/n
    Eigen::VectorXd excess_kurtosis;  // per firm
    Eigen::MatrixXd coskew;           // (i, j) -> E[(r_i - mean_i)^2 (r_j - mean_j)]
};

inline constexpr double kVarianceFloor = 1e-10;

// returns: rows are days, columns are firms.
inline MomentTargets sample_moments(const Eigen::MatrixXd& returns) {
    const Eigen::Index n = returns.rows(), m = returns.cols();
    if (n < 30) throw DataError("sample_moments: at least 30 days required");
    if (m < 1) throw DataError("sample_moments: at least one firm required");
    if (!returns.allFinite()) throw DataError("sample_moments: non-finite return");
    const Eigen::MatrixXd c = returns.rowwise() - returns.colwise().mean();
    const double inv_n = 1.0 / static_cast<double>(n);
    MomentTargets t;
    t.variance = c.array().square().colwise().sum().transpose() * inv_n;
    for (Eigen::Index j = 0; j < m; ++j) {
        const double scale = returns.col(j).cwiseAbs().maxCoeff();
        if (!(t.variance(j) > 1e-24 * scale * scale))
            throw DegenerateInputError("sample_moments: firm column " + std::to_string(j) + " has zero variance");
    }
    const Eigen::VectorXd m4 = c.array().pow(4).colwise().sum().transpose() * inv_n;
    t.excess_kurtosis = m4.array() / t.variance.array().square() - 3.0;
    t.coskew = c.array().square().matrix().transpose() * c * inv_n;
    return t;
}

// Per-day cumulants of the compound-Poisson-plus-Gaussian return.
inline MomentTargets model_moments(const JumpParams& jp, std::span<const double> diffusion_var) {
    const std::size_t m = jp.n_firms();
    if (diffusion_var.size() != m || jp.b.size() != m) throw DomainError("model_moments: size mismatch");
    MomentTargets t;
    t.variance.resize(static_cast<Eigen::Index>(m));
    t.excess_kurtosis.resize(static_cast<Eigen::Index>(m));
    t.coskew.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    const double L = jp.lambda;
    for (std::size_t j = 0; j < m; ++j) {
        const Eigen::Index J = static_cast<Eigen::Index>(j);
        if (!(diffusion_var[j] > 0)) throw DomainError("model_moments: diffusion variance must be positive");
        const double a = jp.a[j], b2 = jp.b[j] * jp.b[j];
        t.variance(J) = diffusion_var[j] + L * (a * a + b2);
        const double k4 = L * (a * a * a * a + 6 * a * a * b2 + 3 * b2 * b2);
        t.excess_kurtosis(J) = k4 / (t.variance(J) * t.variance(J));
        for (std::size_t i = 0; i < m; ++i) {
            const Eigen::Index I = static_cast<Eigen::Index>(i);
            t.coskew(I, J) = i == j ? L * (a * a * a + 3 * a * b2) : L * jp.b_hat_sq(i) * a;
        }
    }
    return t;
}

inline std::complex<double> jump_mgf(std::complex<double> phi, double lambda, double a, double b, double tau) {
    if (tau < 0) throw DomainError("jump_mgf: negative horizon");
    return std::exp(lambda * tau * (std::exp(a * phi + 0.5 * b * b * phi * phi) - 1.0));
}

// ---------------------------------------------------------------------------
// Calibration

// Standardised fourth cross-cumulant cum(r_i, r_i, r_j, r_j) / (Var_i Var_j); the
// diagonal is the excess kurtosis.
inline Eigen::MatrixXd sample_cokurtosis(const Eigen::MatrixXd& returns) {
    const Eigen::MatrixXd c = returns.rowwise() - returns.colwise().mean();
    const double inv_n = 1.0 / static_cast<double>(returns.rows());
    const Eigen::MatrixXd sq = c.array().square().matrix();
    const Eigen::MatrixXd m22 = sq.transpose() * sq * inv_n;
    const Eigen::MatrixXd cov = c.transpose() * c * inv_n;
    const Eigen::VectorXd var = cov.diagonal();
    const Eigen::MatrixXd vv = var * var.transpose();
    return (m22.array() - vv.array() - 2 * cov.array().square()) / vv.array();
}

inline Eigen::MatrixXd model_cokurtosis(const JumpParams& jp, const Eigen::VectorXd& variance) {
    const Eigen::Index m = static_cast<Eigen::Index>(jp.n_firms());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            const double a = jp.a[static_cast<std::size_t>(i)], b2 = jp.b[static_cast<std::size_t>(i)] * jp.b[static_cast<std::size_t>(i)];
            const double cum = i == j ? jp.lambda * (a * a * a * a + 6 * a * a * b2 + 3 * b2 * b2)
                                      : jp.lambda * jp.b_hat_sq(static_cast<std::size_t>(i)) * jp.b_hat_sq(static_cast<std::size_t>(j));
            k(i, j) = cum / (variance(i) * variance(j));
        }
    return k;
}

struct JumpCalibration {
    JumpParams params;
    std::vector<double> diffusion_var;
    double objective = 0;       // mean squared normalised error, summed over metric groups
    double zero_objective = 0;  // same objective with no jumps
    std::vector<std::pair<double, double>> profile;  // (lambda, objective) along the search
};

namespace detail {

inline double normaliser(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0, q = 0;
    for (double x : v) s += (x - m) * (x - m), q += x * x;
    s = std::sqrt(s / static_cast<double>(v.size()));
    q = std::sqrt(q / static_cast<double>(v.size()));
    if (s > 1e-8 * std::max(q, 1e-300)) return s;
    return q > 0 ? q : 1.0;
}

}  // namespace detail

struct JumpCalibrationOptions {
    double lambda_min = 1e-3;
    double lambda_max = 2.0;
    int grid = 25;
    // Jumps are kept only if they remove at least this share of the no-jump objective.
    double min_explained = 0.5;
};

inline JumpCalibration calibrate_jumps(const Eigen::MatrixXd& returns, const JumpCalibrationOptions& opt = {}) {
    const Eigen::Index n = returns.rows();
    const std::size_t m = static_cast<std::size_t>(returns.cols());
    if (m < 2) throw DataError("calibrate_jumps: at least two firms required");
    if (n < 60) throw DataError("calibrate_jumps: at least 60 days required");
    const MomentTargets s = sample_moments(returns);
    const Eigen::MatrixXd sk4 = sample_cokurtosis(returns);

    auto I = [](std::size_t i) { return static_cast<Eigen::Index>(i); };
    std::vector<double> kurt(m), cokurt, cosk;
    for (std::size_t j = 0; j < m; ++j) kurt[j] = s.excess_kurtosis(I(j));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) cosk.push_back(s.coskew(I(i), I(j)));
            if (i < j) cokurt.push_back(sk4(I(i), I(j)));
        }
    const double nk = detail::normaliser(kurt), nck = detail::normaliser(cokurt), nc = detail::normaliser(cosk);
    const double wk = 1.0 / std::sqrt(static_cast<double>(kurt.size()));
    const double wck = 1.0 / std::sqrt(static_cast<double>(cokurt.size()));
    const double wc = 1.0 / std::sqrt(static_cast<double>(cosk.size()));

    auto diffusion = [&](const JumpParams& jp) {
        std::vector<double> dv(m);
        for (std::size_t j = 0; j < m; ++j) dv[j] = std::max(s.variance(I(j)) - jp.jump_variance(j), kVarianceFloor);
        return dv;
    };
    auto residuals = [&](const JumpParams& jp, optim::Vec& out) {
        const auto dv = diffusion(jp);
        const MomentTargets mm = model_moments(jp, dv);
        const Eigen::MatrixXd mk4 = model_cokurtosis(jp, mm.variance);
        out.clear();
        for (std::size_t j = 0; j < m; ++j) out.push_back(wk * (mm.excess_kurtosis(I(j)) - kurt[j]) / nk);
        // zero unless the jump variance alone exceeds the sample variance
        for (std::size_t j = 0; j < m; ++j) out.push_back(wk * (mm.variance(I(j)) / s.variance(I(j)) - 1));
        std::size_t c = 0, ck = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (i != j) out.push_back(wc * (mm.coskew(I(i), I(j)) - cosk[c++]) / nc);
                if (i < j) out.push_back(wck * (mk4(I(i), I(j)) - cokurt[ck++]) / nck);
            }
    };
    auto cost = [&](const JumpParams& jp) {
        optim::Vec r;
        residuals(jp, r);
        double c = 0;
        for (double v : r) c += v * v;
        return c;
    };

    // For fixed lambda, x = (a_1..a_m, sqrt(b_1)..sqrt(b_m)).
    auto unpack = [m](double lambda, const optim::Vec& x) {
        JumpParams jp;
        jp.lambda = lambda;
        jp.a.assign(x.begin(), x.begin() + static_cast<long>(m));
        jp.b.resize(m);
        for (std::size_t j = 0; j < m; ++j) jp.b[j] = x[m + j] * x[m + j];
        return jp;
    };
    auto moment_start = [&](double lambda) {
        optim::Vec x(2 * m);
        for (std::size_t j = 0; j < m; ++j) {
            const double var = s.variance(I(j));
            const double k4 = std::max(kurt[j], 0.1) * var * var;
            const double bj = std::pow(k4 / (3 * lambda), 0.25);
            double lean = 0;
            for (std::size_t i = 0; i < m; ++i)
                if (i != j) lean += s.coskew(I(i), I(j));
            x[j] = (lean < 0 ? -0.5 : 0.5) * bj;
            x[m + j] = std::sqrt(bj);
        }
        return x;
    };
    optim::LeastSquaresOptions lso;
    lso.max_iter = 300;
    auto fit_at = [&](double lambda, const optim::Vec* warm) {
        auto resid = [&](const optim::Vec& x, optim::Vec& out) { residuals(unpack(lambda, x), out); };
        auto best = optim::levenberg_marquardt(resid, moment_start(lambda), lso);
        if (warm) {
            auto alt = optim::levenberg_marquardt(resid, *warm, lso);
            if (alt.cost < best.cost) best = alt;
        }
        return best;
    };

    JumpCalibration out;
    out.zero_objective = cost(JumpParams{0.0, std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)});
    const double lo = std::log(opt.lambda_min), hi = std::log(opt.lambda_max);
    std::vector<optim::LeastSquaresResult> fits;
    std::vector<double> grid;
    for (int g = 0; g < opt.grid; ++g) {
        const double lambda = std::exp(lo + (hi - lo) * g / (opt.grid - 1));
        fits.push_back(fit_at(lambda, fits.empty() ? nullptr : &fits.back().x));
        grid.push_back(lambda);
        out.profile.emplace_back(lambda, 2 * fits.back().cost);
    }
    std::size_t k = 0;
    for (std::size_t g = 1; g < fits.size(); ++g)
        if (fits[g].cost < fits[k].cost) k = g;

    // Golden-section refinement on log lambda between the neighbouring grid points.
    double a = std::log(grid[k > 0 ? k - 1 : 0]), b = std::log(grid[std::min(k + 1, grid.size() - 1)]);
    optim::Vec warm = fits[k].x;
    double best_lambda = grid[k], best_cost = fits[k].cost;
    optim::Vec best_x = fits[k].x;
    const double gr = 0.5 * (std::sqrt(5.0) - 1);
    auto probe = [&](double loglam) {
        auto f = fit_at(std::exp(loglam), &warm);
        out.profile.emplace_back(std::exp(loglam), 2 * f.cost);
        if (f.cost < best_cost) best_cost = f.cost, best_lambda = std::exp(loglam), best_x = f.x;
        return f.cost;
    };
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = probe(c), fd = probe(d);
    for (int it = 0; it < 20 && b - a > 1e-3; ++it) {
        if (fc < fd) b = d, d = c, fd = fc, c = b - gr * (b - a), fc = probe(c);
        else a = c, c = d, fc = fd, d = a + gr * (b - a), fd = probe(d);
    }

    out.params = unpack(best_lambda, best_x);
    out.objective = 2 * best_cost;
    if (!std::isfinite(out.objective))
        throw EstimationError<JumpParams>("calibrate_jumps: no finite objective along the intensity profile", out.params);
    if (!(out.objective <= (1 - opt.min_explained) * out.zero_objective)) {
        out.params = JumpParams{0.0, std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
        out.objective = out.zero_objective;
    }
    out.diffusion_var = diffusion(out.params);
    return out;
}

// ---------------------------------------------------------------------------
// Simulation

// Draws one (path, day) cell: the shared arrival count, and for each firm the
// compensated jump term Q_j N - a_j lambda written into `out`.
inline int draw_jump_cell(const JumpParams& jp, Stream& s, std::span<double> out) {
    const std::size_t m = jp.n_firms();
    if (jp.lambda <= 0) {
        std::fill(out.begin(), out.begin() + static_cast<long>(m), 0.0);
        return 0;
    }
    std::poisson_distribution<int> pois(jp.lambda);
    const int k = pois(s);
    std::normal_distribution<double> z;
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0;
        for (int i = 0; i < k; ++i) sum += jp.a[j] + jp.b[j] * z(s);
        out[j] = sum - jp.a[j] * jp.lambda;
    }
    return k;
}

struct JumpPaths {
    int n_paths = 0;
    int horizon = 0;
    std::size_t n_firms = 0;
    std::vector<int> count;     // [path * horizon + day]
    std::vector<double> term;   // [(path * horizon + day) * n_firms + firm]

    int count_at(int p, int t) const { return count[static_cast<std::size_t>(p) * horizon + t]; }
    double term_at(int p, int t, std::size_t j) const {
        return term[(static_cast<std::size_t>(p) * horizon + t) * n_firms + j];
    }
};

inline JumpPaths simulate_jumps(const JumpParams& jp, int horizon, int n_paths, Stream stream) {
    if (jp.lambda < 0) throw DomainError("simulate_jumps: negative intensity");
    JumpPaths out;
    out.n_paths = n_paths;
    out.horizon = horizon;
    out.n_firms = jp.n_firms();
    out.count.resize(static_cast<std::size_t>(n_paths) * horizon);
    out.term.resize(out.count.size() * out.n_firms);
    for (int p = 0; p < n_paths; ++p) {
        Stream s = stream.child(static_cast<std::uint64_t>(p));
        for (int t = 0; t < horizon; ++t) {
            const std::size_t cell = static_cast<std::size_t>(p) * horizon + t;
            out.count[cell] = draw_jump_cell(jp, s, std::span<double>(out.term).subspan(cell * out.n_firms, out.n_firms));
        }
    }
    return out;
}

}  // namespace sysrisk
