#pragma once

// Lead-lag analysis of monthly series: OLS, BIC lag choice, Granger tests with
// Newey-West covariance, and the nested predictive regressions with their
// incremental F-test.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "sysrisk/error.hpp"

namespace sysrisk {

inline std::vector<double> first_difference(std::span<const double> y) {
    if (y.size() < 2) throw DataError("first_difference: need at least 2 observations");
    std::vector<double> d(y.size() - 1);
    for (std::size_t t = 1; t < y.size(); ++t) d[t - 1] = y[t] - y[t - 1];
    return d;
}

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd resid;
    double rss = 0;
    double tss = 0;
    double r2 = 0;
    Eigen::Index n = 0;
    Eigen::Index k = 0;  // columns, including the constant
    Eigen::Index rank = 0;
};

// Least squares by column-pivoted QR. With allow_deficient the fit is still
// returned when columns are collinear; the fitted values are then unique even
// though beta is not.
inline OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool allow_deficient = false) {
    if (y.size() != X.rows()) throw DataError("ols: dimension mismatch");
    if (X.rows() <= X.cols()) throw DataError("ols: not enough observations");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.rows(), X.cols());
    qr.setThreshold(1e-10);
    qr.compute(X);
    OlsFit f;
    f.n = X.rows();
    f.k = X.cols();
    f.rank = qr.rank();
    if (f.rank < f.k && !allow_deficient) throw RankError("ols: collinear regressors");
    // Basic solution on the leading rank columns; the rest are set to zero.
    const Eigen::Index r = f.rank;
    Eigen::VectorXd c = y;
    c.applyOnTheLeft(qr.householderQ().transpose());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(f.k);
    z.head(r) = qr.matrixR().topLeftCorner(r, r).triangularView<Eigen::Upper>().solve(c.head(r));
    f.beta = qr.colsPermutation() * z;
    f.resid = y - X * f.beta;
    f.rss = f.resid.squaredNorm();
    f.tss = (y.array() - y.mean()).square().sum();
    f.r2 = f.tss > 0 ? 1.0 - f.rss / f.tss : 0.0;
    return f;
}

// Rows t = first..T-1 of [1, lags 1..k_i of each series]. `lags` gives k_i per series.
inline Eigen::MatrixXd lag_design(const std::vector<std::span<const double>>& series, const std::vector<int>& lags,
                                  std::size_t first) {
    const std::size_t T = series.front().size();
    Eigen::Index cols = 1;
    for (int k : lags) cols += k;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(T - first), cols);
    for (std::size_t t = first; t < T; ++t) {
        const auto row = static_cast<Eigen::Index>(t - first);
        X(row, 0) = 1.0;
        Eigen::Index c = 1;
        for (std::size_t s = 0; s < series.size(); ++s)
            for (int l = 1; l <= lags[s]; ++l) X(row, c++) = series[s][t - static_cast<std::size_t>(l)];
    }
    return X;
}

inline Eigen::VectorXd tail_vector(std::span<const double> y, std::size_t first) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(y.size() - first));
    for (std::size_t t = first; t < y.size(); ++t) v(static_cast<Eigen::Index>(t - first)) = y[t];
    return v;
}

inline double bic(const OlsFit& f) {
    const double n = static_cast<double>(f.n);
    return n * std::log(f.rss / n) + static_cast<double>(f.k) * std::log(n);
}

// Common lag for y and every regressor, chosen by BIC on the sample that
// starts after max_lag so all candidates see the same observations.
inline int select_lag_bic(std::span<const double> y, const std::vector<std::span<const double>>& regressors,
                          int max_lag) {
    if (max_lag < 1) throw DomainError("select_lag_bic: max_lag must be at least 1");
    const std::size_t first = static_cast<std::size_t>(max_lag);
    const std::size_t vars = regressors.size() + 1;
    if (y.size() <= first + 1 + vars * first + 2) throw DataError("select_lag_bic: not enough observations");
    for (auto r : regressors)
        if (r.size() != y.size()) throw DataError("select_lag_bic: series lengths differ");
    std::vector<std::span<const double>> all{y};
    all.insert(all.end(), regressors.begin(), regressors.end());
    const Eigen::VectorXd yy = tail_vector(y, first);
    int best = 1;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= max_lag; ++k) {
        const OlsFit f = ols(yy, lag_design(all, std::vector<int>(vars, k), first), true);
        const double b = bic(f);
        if (b < best_bic) best_bic = b, best = k;
    }
    return best;
}

inline int newey_west_bandwidth(std::size_t T) {
    return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

// Bartlett-kernel HAC covariance of the OLS coefficients, with an n/(n-k) scale.
inline Eigen::MatrixXd hac_covariance(const Eigen::MatrixXd& X, const Eigen::VectorXd& u, int bandwidth) {
    const Eigen::Index n = X.rows(), k = X.cols();
    const Eigen::MatrixXd Xu = X.array().colwise() * u.array();
    Eigen::MatrixXd S = Xu.transpose() * Xu;
    for (int l = 1; l <= bandwidth && l < n; ++l) {
        const double w = 1.0 - static_cast<double>(l) / static_cast<double>(bandwidth + 1);
        const Eigen::MatrixXd G = Xu.bottomRows(n - l).transpose() * Xu.topRows(n - l);
        S += w * (G + G.transpose());
    }
    S *= static_cast<double>(n) / static_cast<double>(n - k);
    const Eigen::MatrixXd XtXi = (X.transpose() * X).inverse();
    return XtXi * S * XtXi;
}

struct GCResult {
    std::string direction;
    int lag = 0;
    double stat = 0;  // Wald statistic divided by the number of restrictions
    double pvalue = 1;
    bool robust = true;
    Eigen::Index n = 0;
};

inline double f_upper_tail(double F, double v1, double v2) {
    if (!(F > 0)) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(v1, v2), F));
}

inline void standardise(Eigen::VectorXd& v) {
    const double m = v.mean();
    v.array() -= m;
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
    if (sd > 0) v /= sd;
}

// Tests whether lags 1..lag of x help predict y given lags of y.
inline GCResult granger_test(std::span<const double> y, std::span<const double> x, int lag, bool robust = true) {
    if (lag < 1) throw DomainError("granger_test: lag must be at least 1");
    if (x.size() != y.size()) throw AlignmentError("granger_test: series lengths differ");
    const std::size_t first = static_cast<std::size_t>(lag);
    if (y.size() <= first + 2 * first + 2) throw DataError("granger_test: not enough observations");
    Eigen::MatrixXd X = lag_design({y, x}, {lag, lag}, first);
    Eigen::VectorXd yy = tail_vector(y, first);
    // Standardising y and the lag columns leaves the slope Wald statistic unchanged
    // and keeps X'X well conditioned under large affine shifts.
    standardise(yy);
    for (Eigen::Index c = 1; c < X.cols(); ++c) {
        Eigen::VectorXd col = X.col(c);
        standardise(col);
        X.col(c) = col;
    }
    const OlsFit f = ols(yy, X);
    const Eigen::Index n = f.n, k = f.k;
    Eigen::MatrixXd V;
    if (robust) {
        V = hac_covariance(X, f.resid, newey_west_bandwidth(static_cast<std::size_t>(n)));
    } else {
        V = f.rss / static_cast<double>(n - k) * (X.transpose() * X).inverse();
    }
    const Eigen::VectorXd b = f.beta.tail(lag);
    const Eigen::MatrixXd Vb = V.bottomRightCorner(lag, lag);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Vb);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all())
        throw RankError("granger_test: singular covariance of the tested coefficients");
    const double wald = b.dot(ldlt.solve(b));
    GCResult g;
    g.lag = lag;
    g.robust = robust;
    g.n = n;
    g.stat = wald / lag;
    g.pvalue = f_upper_tail(g.stat, lag, static_cast<double>(n - k));
    return g;
}

struct FTest {
    double F = 0;
    double pvalue = 1;
};

// Incremental F with v1 = (k1+k2+k3) - (k1+k2) and v2 = N - (k1+k2+k3) - 1.
inline FTest incremental_f(double r2_restricted, double r2_unrestricted, double v1, double v2) {
    if (!(v2 > 0) || !(v1 > 0)) throw DomainError("incremental_f: degrees of freedom must be positive");
    FTest out;
    const double num = (r2_unrestricted - r2_restricted) / v1;
    if (!(num > 0)) return out;
    out.F = num / ((1.0 - r2_unrestricted) / v2);
    out.pvalue = f_upper_tail(out.F, v1, v2);
    return out;
}

struct PredictiveResult {
    double r2_restricted = 0;
    double r2_unrestricted = 0;
    double F = 0;
    double pvalue = 1;
    int k1 = 0, k2 = 0, k3 = 0;
    Eigen::Index N = 0;
    double rss_restricted = 0, rss_unrestricted = 0;
};

// Stress on its own lags and benchmark-measure lags (restricted), then adding
// full-measure lags (unrestricted). (k1, k2) minimise the restricted BIC and k3
// the unrestricted BIC given (k1, k2); ties go to fewer lags.
inline PredictiveResult predictive_regressions(std::span<const double> stress, std::span<const double> benchmark,
                                               std::span<const double> full, int max_lag) {
    if (max_lag < 1) throw DomainError("predictive_regressions: max_lag must be at least 1");
    if (stress.size() != benchmark.size() || stress.size() != full.size())
        throw AlignmentError("predictive_regressions: series lengths differ");
    const std::size_t first = static_cast<std::size_t>(max_lag);
    if (stress.size() <= first + 3 * first + 6) throw DataError("predictive_regressions: not enough observations");
    const Eigen::VectorXd y = tail_vector(stress, first);
    PredictiveResult res;
    double best = std::numeric_limits<double>::infinity();
    OlsFit restricted;
    for (int k1 = 1; k1 <= max_lag; ++k1)
        for (int k2 = 1; k2 <= max_lag; ++k2) {
            OlsFit f = ols(y, lag_design({stress, benchmark}, {k1, k2}, first), true);
            const double b = bic(f);
            if (b < best) best = b, res.k1 = k1, res.k2 = k2, restricted = std::move(f);
        }
    best = std::numeric_limits<double>::infinity();
    OlsFit unrestricted;
    for (int k3 = 1; k3 <= max_lag; ++k3) {
        OlsFit f = ols(y, lag_design({stress, benchmark, full}, {res.k1, res.k2, k3}, first), true);
        const double b = bic(f);
        if (b < best) best = b, res.k3 = k3, unrestricted = std::move(f);
    }
    res.N = restricted.n;
    res.r2_restricted = restricted.r2;
    res.rss_restricted = restricted.rss;
    // Redundant columns add nothing; clamp rounding so R^2 cannot fall.
    if (unrestricted.rss > restricted.rss) {
        if (unrestricted.rss - restricted.rss > 1e-10 * std::max(restricted.tss, 1e-300))
            throw NumericalError("predictive_regressions: R^2 fell when regressors were added");
        unrestricted.rss = restricted.rss;
        unrestricted.r2 = restricted.r2;
    }
    res.r2_unrestricted = unrestricted.r2;
    res.rss_unrestricted = unrestricted.rss;
    const double v1 = (res.k1 + res.k2 + res.k3) - (res.k1 + res.k2);
    const double v2 = static_cast<double>(res.N) - (res.k1 + res.k2 + res.k3) - 1;
    const FTest ft = incremental_f(res.r2_restricted, res.r2_unrestricted, v1, v2);
    res.F = ft.F;
    res.pvalue = ft.pvalue;
    return res;
}

// ---------------------------------------------------------------------------
// Monthly alignment

struct MonthlyPoint {
    long month = 0;  // month index
    double value = 0;
};

struct AlignedPair {
    std::vector<long> months;
    std::vector<double> a, b;
};

inline AlignedPair align_monthly(const std::vector<MonthlyPoint>& a, const std::vector<MonthlyPoint>& b,
                                 std::size_t min_overlap = 24) {
    std::map<long, double> mb;
    for (const auto& p : b) {
        if (!mb.emplace(p.month, p.value).second) throw AlignmentError("align_monthly: duplicate month in series");
    }
    AlignedPair out;
    std::map<long, double> ma;
    for (const auto& p : a)
        if (!ma.emplace(p.month, p.value).second) throw AlignmentError("align_monthly: duplicate month in series");
    for (const auto& [m, v] : ma) {
        auto it = mb.find(m);
        if (it == mb.end()) continue;
        out.months.push_back(m);
        out.a.push_back(v);
        out.b.push_back(it->second);
    }
    if (out.months.size() < min_overlap)
        throw AlignmentError("series overlap in " + std::to_string(out.months.size()) + " months; at least " +
                             std::to_string(min_overlap) + " required");
    for (std::size_t i = 1; i < out.months.size(); ++i)
        if (out.months[i] != out.months[i - 1] + 1) throw AlignmentError("aligned months are not contiguous");
    return out;
}

}  // namespace sysrisk
