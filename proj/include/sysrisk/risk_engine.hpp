#pragma once

// Monte Carlo of joint asset paths and the three sector measures (DD, NoD, PIR)
// for the full and benchmark models, on monthly rolling one-year windows.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "sysrisk/common_factor.hpp"
#include "sysrisk/correlation.hpp"
#include "sysrisk/error.hpp"
#include "sysrisk/firm_mle.hpp"
#include "sysrisk/jumps.hpp"
#include "sysrisk/market_data.hpp"
#include "sysrisk/rng.hpp"

namespace sysrisk {

enum class DdPooling { all, terminal };

struct SimConfig {
    int n_paths = 10000;
    int horizon = 126;  // days
    int tau = 252;      // option maturity used in pricing, days
    std::uint64_t seed = 1;
    QuadratureSpec quad{};
    DdPooling dd_pooling = DdPooling::all;

    void validate() const {
        if (n_paths < 1) throw ConfigError("n_paths must be at least 1");
        if (horizon < 1) throw ConfigError("horizon_days must be at least 1");
        if (tau < 1) throw ConfigError("tau must be at least 1");
    }
};

// ---------------------------------------------------------------------------
// Simulation

struct SimFirm {
    double mu = 0;
    double delta = 0;
    double V0 = 0;
    double D0 = 0;  // debt face at the start; grows at r
    double book_assets = 0;
};

struct SimInputs {
    HNParams factor;
    double r = 0;       // per day
    double h_next = 0;  // factor variance of the first simulated day
    std::vector<SimFirm> firms;
    JumpParams jumps;       // lambda = 0 for the benchmark
    Eigen::MatrixXd omega;  // idiosyncratic covariance held fixed over the horizon

    std::size_t n_firms() const { return firms.size(); }

    void validate() const {
        const auto m = static_cast<Eigen::Index>(firms.size());
        if (m < 1) throw ConfigError("simulation: no firms");
        if (omega.rows() != m || omega.cols() != m) throw ConfigError("simulation: covariance size mismatch");
        if (jumps.lambda > 0 && jumps.n_firms() != firms.size()) throw ConfigError("simulation: jump size mismatch");
        if (!(h_next >= 0)) throw ConfigError("simulation: negative factor variance");
        for (const auto& f : firms)
            if (!(f.V0 > 0) || !(f.D0 >= 0)) throw ConfigError("simulation: V0 must be positive and D0 non-negative");
    }
};

// Debt on day t of the horizon (t = 0..horizon), [t * m + firm].
inline std::vector<double> debt_paths(const SimInputs& in, int horizon) {
    const std::size_t m = in.n_firms();
    std::vector<double> d(static_cast<std::size_t>(horizon + 1) * m);
    for (int t = 0; t <= horizon; ++t)
        for (std::size_t j = 0; j < m; ++j) d[static_cast<std::size_t>(t) * m + j] = in.firms[j].D0 * std::exp(in.r * t);
    return d;
}

// Streams each path's asset values, (horizon + 1) x m with day 0 the starting value,
// to `on_path(path, values)`. Factor, jump and idiosyncratic draws use separate
// substreams of the path stream, so two models sharing a seed see the same factor
// and idiosyncratic shocks.
template <class OnPath>
void simulate_asset_paths(const SimInputs& in, int horizon, int n_paths, const Stream& stream, OnPath&& on_path) {
    in.validate();
    const std::size_t m = in.n_firms();
    const auto dyn = dynamics(in.factor);
    MvnSampler mvn(in.omega);
    JumpParams jp = in.jumps;
    if (jp.lambda <= 0) jp = JumpParams{0.0, std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
    std::vector<double> V(static_cast<std::size_t>(horizon + 1) * m);
    std::vector<double> w(m), jump(m), lv(m);
    for (int p = 0; p < n_paths; ++p) {
        const Stream ps = stream.child(static_cast<std::uint64_t>(p));
        Stream fs = ps.child("factor"), js = ps.child("jumps"), is = ps.child("idio");
        std::normal_distribution<double> z;
        double h = in.h_next;
        for (std::size_t j = 0; j < m; ++j) {
            lv[j] = std::log(in.firms[j].V0);
            V[j] = in.firms[j].V0;
        }
        for (int t = 1; t <= horizon; ++t) {
            const auto st = factor_step(dyn, in.r, h, z(fs));
            h = std::max(st.h_next, 0.0);
            draw_jump_cell(jp, js, jump);
            mvn.draw(is, w);
            for (std::size_t j = 0; j < m; ++j) {
                const SimFirm& f = in.firms[j];
                lv[j] += f.mu + f.delta * (st.x - in.r) + w[j] + jump[j];
                V[static_cast<std::size_t>(t) * m + j] = std::exp(lv[j]);
            }
        }
        on_path(p, std::span<const double>(V));
    }
}

struct AssetPaths {
    int n_paths = 0;
    int horizon = 0;
    std::size_t n_firms = 0;
    std::vector<double> V;  // [(path * (horizon + 1) + day) * m + firm]

    std::span<const double> path(int p) const {
        const std::size_t len = static_cast<std::size_t>(horizon + 1) * n_firms;
        return std::span<const double>(V).subspan(static_cast<std::size_t>(p) * len, len);
    }
};

inline AssetPaths simulate_assets(const SimInputs& in, int horizon, int n_paths, const Stream& stream) {
    AssetPaths out{n_paths, horizon, in.n_firms(), {}};
    out.V.reserve(static_cast<std::size_t>(n_paths) * (horizon + 1) * in.n_firms());
    simulate_asset_paths(in, horizon, n_paths, stream,
                         [&](int, std::span<const double> v) { out.V.insert(out.V.end(), v.begin(), v.end()); });
    return out;
}

// ---------------------------------------------------------------------------
// Measures

struct Measures {
    double dd = std::nan("");
    double nod = std::nan("");
    double pir = std::nan("");  // scaled by 1e6
    std::vector<double> dd_firm;
    std::vector<double> pi_firm;
    std::vector<double> default_prob;
    bool degenerate = false;
};

// Accumulates the three measures path by path.
class MeasureAccumulator {
public:
    MeasureAccumulator(std::vector<double> debt, std::vector<double> book_assets, double r, int horizon,
                       DdPooling pooling = DdPooling::all)
        : debt_(std::move(debt)), book_(std::move(book_assets)), r_(r), horizon_(horizon), pooling_(pooling),
          m_(book_.size()), mean_(m_, 0.0), m2_(m_, 0.0), count_(m_, 0), put_(m_, 0.0), defaults_(m_, 0) {
        if (debt_.size() != static_cast<std::size_t>(horizon + 1) * m_)
            throw ConfigError("measures: debt path size mismatch");
    }

    void add_path(std::span<const double> V) {
        int n_default = 0;
        for (std::size_t j = 0; j < m_; ++j) {
            bool defaulted = false;
            for (int t = 0; t <= horizon_; ++t) {
                const std::size_t k = static_cast<std::size_t>(t) * m_ + j;
                if (V[k] - debt_[k] < 0) defaulted = true;
                if (t == 0 || (pooling_ == DdPooling::terminal && t != horizon_)) continue;
                const double g = std::log(V[k]) - std::log(debt_[k]);
                const double d = g - mean_[j];
                mean_[j] += d / static_cast<double>(++count_[j]);
                m2_[j] += d * (g - mean_[j]);
            }
            const std::size_t k = static_cast<std::size_t>(horizon_) * m_ + j;
            put_[j] += std::max(debt_[k] - V[k], 0.0);
            if (defaulted) ++defaults_[j], ++n_default;
        }
        nod_sum_ += n_default;
        ++paths_;
    }

    Measures result() const {
        Measures out;
        if (paths_ == 0) throw ConfigError("measures: no paths");
        double wsum = 0;
        for (double b : book_) wsum += b;
        out.dd = 0;
        const double disc = std::exp(-r_ * horizon_);
        double pi = 0;
        for (std::size_t j = 0; j < m_; ++j) {
            const double sd = std::sqrt(m2_[j] / static_cast<double>(count_[j]));
            double dd = mean_[j] / sd;
            if (!(sd > 0)) {
                out.degenerate = true;
                dd = mean_[j] >= 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            }
            out.dd_firm.push_back(dd);
            out.dd += (wsum > 0 ? book_[j] / wsum : 1.0 / static_cast<double>(m_)) * dd;
            out.pi_firm.push_back(disc * put_[j] / static_cast<double>(paths_));
            pi += out.pi_firm.back();
            out.default_prob.push_back(static_cast<double>(defaults_[j]) / static_cast<double>(paths_));
        }
        out.nod = static_cast<double>(nod_sum_) / static_cast<double>(paths_);
        out.pir = wsum > 0 ? pi / wsum * 1e6 : 0.0;
        return out;
    }

private:
    std::vector<double> debt_, book_;
    double r_;
    int horizon_;
    DdPooling pooling_;
    std::size_t m_;
    std::vector<double> mean_, m2_;
    std::vector<long> count_;
    std::vector<double> put_;
    std::vector<long> defaults_;
    long nod_sum_ = 0;
    long paths_ = 0;
};

inline Measures compute_measures(const AssetPaths& paths, const std::vector<double>& debt,
                                 const std::vector<double>& book_assets, double r, DdPooling pooling = DdPooling::all) {
    if (paths.n_paths < 1) throw ConfigError("measures: no paths");
    MeasureAccumulator acc(debt, book_assets, r, paths.horizon, pooling);
    for (int p = 0; p < paths.n_paths; ++p) acc.add_path(paths.path(p));
    return acc.result();
}

inline double dd_measure(const AssetPaths& paths, const std::vector<double>& debt, const std::vector<double>& book_assets,
                         DdPooling pooling = DdPooling::all) {
    return compute_measures(paths, debt, book_assets, 0.0, pooling).dd;
}

inline double nod_measure(const AssetPaths& paths, const std::vector<double>& debt) {
    return compute_measures(paths, debt, std::vector<double>(paths.n_firms, 1.0), 0.0).nod;
}

inline double pir_measure(const AssetPaths& paths, const std::vector<double>& debt, const std::vector<double>& book_assets,
                          double r) {
    return compute_measures(paths, debt, book_assets, r).pir;
}

// Simulates and measures in one streaming pass.
inline Measures simulate_measures(const SimInputs& in, const SimConfig& cfg, const Stream& stream) {
    cfg.validate();
    std::vector<double> book;
    for (const auto& f : in.firms) book.push_back(f.book_assets);
    MeasureAccumulator acc(debt_paths(in, cfg.horizon), book, in.r, cfg.horizon, cfg.dd_pooling);
    simulate_asset_paths(in, cfg.horizon, cfg.n_paths, stream, [&](int, std::span<const double> v) { acc.add_path(v); });
    return acc.result();
}

// ---------------------------------------------------------------------------
// Rolling windows

struct Window {
    Date start;      // first trading day of the first month
    Date end;        // last trading day of the last month
    long month = 0;  // month index of the last month
};

// One window per month-end with twelve months of data behind it. A partially
// observed first or last month counts as a month.
inline std::vector<Window> enumerate_windows(const std::vector<Date>& calendar, int months = 12) {
    std::vector<Window> out;
    if (calendar.empty()) return out;
    std::map<long, std::pair<Date, Date>> span;
    for (Date d : calendar) {
        auto [it, fresh] = span.try_emplace(d.month_index(), d, d);
        if (!fresh) it->second.second = d;
    }
    const long first = span.begin()->first, last = span.rbegin()->first;
    for (long mth = first + months - 1; mth <= last; ++mth) {
        auto lo = span.find(mth - months + 1), hi = span.find(mth);
        if (lo == span.end() || hi == span.end()) continue;
        out.push_back({lo->second.first, hi->second.second, mth});
    }
    return out;
}

inline std::string month_label(long month_index) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04ld-%02ld", month_index / 12, month_index % 12 + 1);
    return buf;
}

struct RunConfig {
    SimConfig sim{};
    std::vector<std::string> sectors{sector_names()};
    long first_month = std::numeric_limits<long>::min();  // inclusive month-index bounds on window ends
    long last_month = std::numeric_limits<long>::max();
    int threads = 1;
    bool benchmark_only = false;
    int hn_restarts = 5;
    int firm_max_evals = 400;
    int firms_per_window = 10;
};

struct ModelEstimates {
    std::vector<FirmFit> fits;
    JumpParams jumps;  // lambda = 0 for the benchmark
    DCCFit dcc;
    Measures measures;
};

struct WindowEstimates {
    std::string sector;
    Window window;
    Date month_end;
    std::vector<std::string> firms;
    HNFit factor;
    JumpCalibration jump_fit;
    ModelEstimates full, benchmark;
    std::vector<double> debt_end, book_assets;
    double r = 0;
    double h_next = 0;
    bool has_full = false;
};

struct MeasureRow {
    Date month_end;
    std::string sector;
    double dd = std::nan(""), nod = std::nan(""), pir = std::nan("");
    double dd_ben = std::nan(""), nod_ben = std::nan(""), pir_ben = std::nan("");
    std::string flag;  // empty when the window ran cleanly
    int failure = 0;   // exit class of the error that stopped the window, 0 if none
};

struct WindowResult {
    MeasureRow row;
    WindowEstimates estimates;
};

namespace detail {

inline Stream window_stream(std::uint64_t seed, const std::string& sector, long month) {
    return Stream(seed).child(sector).child(static_cast<std::uint64_t>(month));
}

inline ModelEstimates fit_model(const std::vector<FirmWindow>& windows, const HNParams& factor, const JumpParams& jp,
                                bool benchmark, const RunConfig& cfg) {
    ModelEstimates out;
    const std::size_t m = windows.size();
    out.jumps = benchmark || jp.lambda <= 0 ? JumpParams{0.0, std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)}
                                            : jp;
    FirmFitOptions fo;
    fo.benchmark = benchmark;
    fo.max_evals = cfg.firm_max_evals;
    fo.quad = cfg.sim.quad;
    for (std::size_t j = 0; j < m; ++j) {
        const FirmJumps fj{out.jumps.lambda, out.jumps.a[j], out.jumps.b[j]};
        out.fits.push_back(fit_firm(windows[j], factor, fj, fo));
    }
    const std::size_t n = windows.front().size();
    Eigen::MatrixXd resid(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const auto w = firm_residuals(out.fits[j], windows[j].x, windows[j].r);
        for (std::size_t t = 0; t < w.size(); ++t) resid(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = w[t];
    }
    out.dcc = fit_dcc(resid);
    return out;
}

inline SimInputs sim_inputs(const WindowEstimates& we, const ModelEstimates& me) {
    SimInputs in;
    in.factor = we.factor.params;
    in.r = we.r;
    in.h_next = we.h_next;
    in.jumps = me.jumps;
    in.omega = me.dcc.omega_last;
    for (std::size_t j = 0; j < me.fits.size(); ++j)
        in.firms.push_back({me.fits[j].params.mu, me.fits[j].params.delta, me.fits[j].assets.back(), we.debt_end[j],
                            we.book_assets[j]});
    return in;
}

}  // namespace detail

inline SimInputs sim_inputs(const WindowEstimates& we, bool benchmark) {
    return detail::sim_inputs(we, benchmark ? we.benchmark : we.full);
}

// Three-step estimation, DCC and both models' measures for one sector-window.
// Estimation failures are reported in the row flag, not thrown.
inline WindowResult run_window(const Panels& p, const std::string& sector, const Window& win, const RunConfig& cfg) {
    cfg.sim.validate();
    WindowResult res;
    WindowEstimates& we = res.estimates;
    we.sector = sector;
    we.window = win;
    res.row.sector = sector;
    auto days = window_days(p, win.start, win.end);
    if (days.empty() || days.front().month_index() != win.month - 11 || days.back().month_index() != win.month)
        throw DataError("window ending " + month_label(win.month) + " does not have 12 months of data");
    we.month_end = res.row.month_end = days.back();
    try {
        if (p.factor.empty() && days.front() == p.calendar.front()) days.erase(days.begin());
        we.firms = select_top10(p, sector, days.front(), days.back(), static_cast<std::size_t>(cfg.firms_per_window));
        const auto x = factor_returns(p, days);
        const auto r = daily_rates(p, days);
        double r_mean = 0;
        for (double v : r) r_mean += v / static_cast<double>(r.size());

        HNFitOptions ho;
        ho.restarts = cfg.hn_restarts;
        ho.seed = detail::window_stream(cfg.sim.seed, sector, win.month).child("hn").key();
        we.factor = fit_hn_garch(x, r_mean, ho);
        we.r = r.back();
        we.h_next = we.factor.filter.h.back();

        const std::size_t m = we.firms.size(), n = days.size();
        std::vector<FirmWindow> fw;
        for (std::size_t j = 0; j < m; ++j) {
            const FirmSeries s = build_firm_series(p, we.firms[j], days.front(), days.back());
            fw.push_back(FirmWindow{s.equity_value, s.debt_face, x, r, we.factor.filter.h});
            we.debt_end.push_back(s.debt_face.back());
            we.book_assets.push_back(s.book_assets.back());
        }

        const Stream sim_stream = detail::window_stream(cfg.sim.seed, sector, win.month).child("simulate");
        we.benchmark = detail::fit_model(fw, we.factor.params, {}, true, cfg);
        we.benchmark.measures = simulate_measures(detail::sim_inputs(we, we.benchmark), cfg.sim, sim_stream);
        res.row.dd_ben = we.benchmark.measures.dd;
        res.row.nod_ben = we.benchmark.measures.nod;
        res.row.pir_ben = we.benchmark.measures.pir;
        if (!cfg.benchmark_only) {
            // Jump moments are matched on the benchmark-implied asset returns, the scale
            // on which the jump terms enter the asset equation.
            Eigen::MatrixXd ret(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(m));
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t t = 1; t < n; ++t)
                    ret(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(j)) = we.benchmark.fits[j].returns[t - 1];
            we.jump_fit = calibrate_jumps(ret);
            we.full = detail::fit_model(fw, we.factor.params, we.jump_fit.params, false, cfg);
            we.full.measures = simulate_measures(detail::sim_inputs(we, we.full), cfg.sim, sim_stream);
            we.has_full = true;
            res.row.dd = we.full.measures.dd;
            res.row.nod = we.full.measures.nod;
            res.row.pir = we.full.measures.pir;
        }
        if (we.benchmark.measures.degenerate || (we.has_full && we.full.measures.degenerate))
            res.row.flag = "degenerate_dd";
    } catch (const Error& e) {
        res.row.flag = e.what();
        res.row.failure = e.exit_code();
        res.row.dd = res.row.nod = res.row.pir = std::nan("");
        res.row.dd_ben = res.row.nod_ben = res.row.pir_ben = std::nan("");
    }
    return res;
}

struct RollingResult {
    std::vector<WindowResult> windows;  // ordered by (sector order in config, month)

    std::vector<MeasureRow> rows() const {
        std::vector<MeasureRow> out;
        for (const auto& w : windows) out.push_back(w.row);
        return out;
    }
};

// Windows run on a worker pool; each writes only its own slot, so the result does not
// depend on the thread count or the order in which windows finish.
inline RollingResult rolling_run(const Panels& p, const RunConfig& cfg) {
    cfg.sim.validate();
    if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
    for (const auto& s : cfg.sectors)
        if (std::find(sector_names().begin(), sector_names().end(), s) == sector_names().end())
            throw ConfigError("unknown sector '" + s + "'");
    std::vector<Window> wins;
    for (const auto& w : enumerate_windows(p.calendar))
        if (w.month >= cfg.first_month && w.month <= cfg.last_month) wins.push_back(w);
    if (wins.empty()) throw CoverageError("no complete 12-month window in the requested range");

    std::vector<std::pair<std::string, Window>> tasks;
    for (const auto& s : cfg.sectors)
        for (const auto& w : wins) tasks.emplace_back(s, w);
    RollingResult out;
    out.windows.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
            out.windows[i] = run_window(p, tasks[i].first, tasks[i].second, cfg);
    };
    const int nt = std::min<int>(cfg.threads, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace sysrisk
