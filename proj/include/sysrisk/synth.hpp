#pragma once

// Synthetic market panels with known ground truth: a GARCH factor, shared
// compensated jumps with regime switches, equicorrelated idiosyncratic noise,
// equity priced from the structural model and quarterly balance sheets.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sysrisk/common_factor.hpp"
#include "sysrisk/csv.hpp"
#include "sysrisk/date.hpp"
#include "sysrisk/error.hpp"
#include "sysrisk/jumps.hpp"
#include "sysrisk/market_data.hpp"
#include "sysrisk/pricing.hpp"
#include "sysrisk/rng.hpp"

namespace sysrisk {

struct RegimeSegment {
    int begin = 0;  // first day, inclusive
    int end = 0;    // last day, exclusive
    double lambda_mult = 1;
    double a_scale = 1;
};

struct SynthConfig {
    int firms_per_sector = 12;
    std::vector<std::string> sectors{"depositories"};
    int n_days = 756;
    Date start = Date::parse("1996-01-01");
    HNParams factor{2e-7, 2e-6, 0.88, 150.0, 2.0};
    double annual_rate = 0.03;
    FirmParams firm{2e-4, 0.6, 4e-5};
    double lambda = 0.02;     // base daily intensity
    double jump_a = -0.01;    // base mean jump size
    double jump_b = 0.02;     // base jump-size std
    double idio_corr = 0.3;   // equicorrelation of idiosyncratic noise within a sector
    double debt_ratio = 0.8;  // debt proxy over asset value at each report
    double short_share = 0.8; // short-term share of total debt
    double heterogeneity = 0.2;
    std::vector<RegimeSegment> regimes;  // empty: one segment with unit scaling
    int tau = 252;
    std::uint64_t seed = 1;

    int n_firms() const { return firms_per_sector * static_cast<int>(sectors.size()); }

    std::vector<RegimeSegment> segments() const {
        if (regimes.empty()) return {RegimeSegment{0, n_days, 1, 1}};
        return regimes;
    }

    void validate() const {
        if (firms_per_sector < 1) throw ConfigError("synth: firms_per_sector must be at least 1");
        if (sectors.empty()) throw ConfigError("synth: no sectors");
        for (const auto& s : sectors)
            if (std::find(sector_names().begin(), sector_names().end(), s) == sector_names().end())
                throw ConfigError("synth: unknown sector '" + s + "'");
        if (n_days < 2) throw ConfigError("synth: n_days must be at least 2");
        if (!(factor.omega > 0) || !(factor.alpha >= 0) || !(factor.eta >= 0) || !(factor.persistence() < 1))
            throw ConfigError("synth: factor variance parameters must give a positive stationary variance");
        if (!(firm.xi > 0)) throw ConfigError("synth: idiosyncratic variance must be positive");
        if (lambda < 0 || jump_b < 0) throw ConfigError("synth: jump intensity and size std must be non-negative");
        if (!(debt_ratio > 0 && debt_ratio < 1)) throw ConfigError("synth: debt_ratio must lie in (0, 1)");
        if (!(short_share >= 0 && short_share <= 1)) throw ConfigError("synth: short_share must lie in [0, 1]");
        if (!(idio_corr >= 0 && idio_corr < 1)) throw ConfigError("synth: idio_corr must lie in [0, 1)");
        if (heterogeneity < 0 || heterogeneity >= 1) throw ConfigError("synth: heterogeneity must lie in [0, 1)");
        if (std::min(debt_ratio * (1 + 0.5 * heterogeneity), 0.95) >= 0.5 * (1 + short_share))
            throw ConfigError("synth: debt_ratio too high for short_share; book equity would be negative");
        if (tau < 1) throw ConfigError("synth: tau must be positive");
        int next = 0;
        for (const auto& s : segments()) {
            if (s.begin != next || s.end <= s.begin) throw ConfigError("synth: regimes must partition [0, n_days)");
            if (s.lambda_mult < 0) throw ConfigError("synth: negative lambda multiplier");
            next = s.end;
        }
        if (next != n_days) throw ConfigError("synth: regimes must partition [0, n_days)");
    }
};

struct SynthFirm {
    std::string id;
    std::string sector;
    FirmParams params;
    double a = 0;
    double b = 0;
    double V0 = 0;
    double debt_ratio = 0;
    double shares = 0;
};

struct SynthReport {
    Date report_date;
    std::string firm_id;
    double long_term_debt, short_term_debt, book_assets, book_equity;
};

struct SynthMarket {
    SynthConfig config;
    std::vector<Date> calendar;
    std::vector<SynthFirm> firms;
    std::vector<double> x;       // factor log return per day
    std::vector<double> h;       // factor variance per day, plus the next-day value
    std::vector<int> jump_count; // shared arrivals per day
    std::vector<std::vector<double>> assets;  // [firm][day]
    std::vector<std::vector<double>> debt;    // lagged, interpolated proxy [firm][day]
    std::vector<std::vector<double>> equity;  // market equity [firm][day]
    std::vector<SynthReport> reports;
    std::vector<std::pair<Date, double>> stress;  // month-end stress index

    double r_day() const { return config.annual_rate / 252.0; }
    std::size_t segment_of(int day) const {
        const auto seg = config.segments();
        for (std::size_t i = 0; i < seg.size(); ++i)
            if (day >= seg[i].begin && day < seg[i].end) return i;
        return seg.size() - 1;
    }
};

namespace detail {

inline std::vector<Date> weekday_calendar(Date start, int n) {
    std::vector<Date> out;
    for (Date d = start; static_cast<int>(out.size()) < n; d = d.add_days(1))
        if (d.weekday() != 0 && d.weekday() != 6) out.push_back(d);
    return out;
}

inline Date quarter_end_on_or_before(Date d) {
    const int q_month = static_cast<int>((d.month() - 1) / 3 * 3 + 3);
    Date first = Date::parse(std::to_string(d.year()) + (q_month < 10 ? "-0" : "-") + std::to_string(q_month) + "-01");
    Date end = first.add_months(1).add_days(-1);
    if (end <= d) return end;
    return first.add_months(-2).add_days(-1);
}

}  // namespace detail

inline SynthMarket synth_market(const SynthConfig& cfg) {
    cfg.validate();
    SynthMarket m;
    m.config = cfg;
    const int n = cfg.n_days;
    const double r = cfg.annual_rate / 252.0;
    const Stream root(cfg.seed);
    m.calendar = detail::weekday_calendar(cfg.start, n);

    // Firms
    {
        Stream s = root.child("firms");
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double het = cfg.heterogeneity;
        int k = 0;
        for (const auto& sector : cfg.sectors) {
            for (int i = 0; i < cfg.firms_per_sector; ++i, ++k) {
                SynthFirm f;
                char id[16];
                std::snprintf(id, sizeof id, "F%03d", k + 1);
                f.id = id;
                f.sector = sector;
                f.params.mu = cfg.firm.mu;
                f.params.delta = cfg.firm.delta * (1 + het * u(s));
                f.params.xi = cfg.firm.xi * (1 + het * u(s));
                f.a = cfg.jump_a * (1 + het * u(s));
                f.b = cfg.jump_b * (1 + het * u(s));
                f.V0 = 1000.0 * std::exp(1.5 * u(s));
                f.debt_ratio = std::min(cfg.debt_ratio * (1 + 0.5 * het * u(s)), 0.95);
                f.shares = f.V0 * (1 - f.debt_ratio) / 50.0;
                m.firms.push_back(f);
            }
        }
    }
    const std::size_t nf = m.firms.size();

    // Common factor under the physical law
    {
        Stream s = root.child("factor");
        std::normal_distribution<double> z;
        const auto d = dynamics(cfg.factor);
        double hv = cfg.factor.unconditional_variance();
        for (int t = 0; t < n; ++t) {
            auto st = factor_step(d, r, hv, z(s));
            m.x.push_back(st.x);
            m.h.push_back(hv);
            hv = st.h_next;
        }
        m.h.push_back(hv);
    }

    // Asset paths
    const auto segs = cfg.segments();
    m.assets.assign(nf, std::vector<double>(static_cast<std::size_t>(n)));
    {
        Stream s = root.child("assets");
        std::normal_distribution<double> z;
        std::vector<double> cell(nf);
        std::vector<double> common(cfg.sectors.size());
        std::vector<double> lv(nf);
        for (std::size_t j = 0; j < nf; ++j) lv[j] = std::log(m.firms[j].V0);
        for (int t = 0; t < n; ++t) {
            const auto& seg = segs[m.segment_of(t)];
            JumpParams jp;
            jp.lambda = cfg.lambda * seg.lambda_mult;
            for (const auto& f : m.firms) jp.a.push_back(f.a * seg.a_scale), jp.b.push_back(f.b);
            const int count = draw_jump_cell(jp, s, cell);
            for (auto& c : common) c = z(s);
            m.jump_count.push_back(t > 0 ? count : 0);
            for (std::size_t j = 0; j < nf; ++j) {
                const double e = std::sqrt(cfg.idio_corr) * common[j / static_cast<std::size_t>(cfg.firms_per_sector)] +
                                 std::sqrt(1 - cfg.idio_corr) * z(s);
                if (t > 0) {
                    const auto& p = m.firms[j].params;
                    lv[j] += p.mu + p.delta * (m.x[t] - r) + std::sqrt(p.xi) * e + cell[j];
                }
                m.assets[j][static_cast<std::size_t>(t)] = std::exp(lv[j]);
            }
        }
    }

    // Quarterly reports, starting two quarters before the first day so the lagged
    // debt exists from day 0. A report carries the asset value on its date.
    const Date first_q = detail::quarter_end_on_or_before(cfg.start.add_months(-6));
    std::vector<Date> qends;
    for (Date q = first_q; q <= m.calendar.back(); q = detail::quarter_end_on_or_before(q.add_months(4)))
        qends.push_back(q);
    const double proxy_per_total = 0.5 * (1 - cfg.short_share) + cfg.short_share;
    for (std::size_t j = 0; j < nf; ++j) {
        for (Date q : qends) {
            auto it = std::upper_bound(m.calendar.begin(), m.calendar.end(), q);
            const double v = it == m.calendar.begin()
                                 ? m.firms[j].V0
                                 : m.assets[j][static_cast<std::size_t>(it - m.calendar.begin() - 1)];
            const double total = m.firms[j].debt_ratio * v / proxy_per_total;
            m.reports.push_back({q, m.firms[j].id, (1 - cfg.short_share) * total, cfg.short_share * total, v, v - total});
        }
    }

    // Daily debt: each report takes effect three months later on the next trading day,
    // with linear interpolation in calendar days between effective dates.
    m.debt.assign(nf, std::vector<double>(static_cast<std::size_t>(n)));
    for (std::size_t j = 0; j < nf; ++j) {
        std::vector<std::pair<Date, double>> eff;
        for (const auto& rep : m.reports) {
            if (rep.firm_id != m.firms[j].id) continue;
            Date e = rep.report_date.add_months(3);
            if (e >= m.calendar.front() && e <= m.calendar.back())
                while (e.weekday() == 0 || e.weekday() == 6) e = e.add_days(1);
            eff.emplace_back(e, 0.5 * rep.long_term_debt + rep.short_term_debt);
        }
        for (int t = 0; t < n; ++t) {
            const Date d = m.calendar[static_cast<std::size_t>(t)];
            std::size_t k = 0;
            while (k + 1 < eff.size() && eff[k + 1].first <= d) ++k;
            if (eff[k].first > d) throw ConfigError("synth: no lagged report before the first day");
            double D = eff[k].second;
            if (k + 1 < eff.size() && eff[k].first < d) {
                const double w = static_cast<double>(d - eff[k].first) / static_cast<double>(eff[k + 1].first - eff[k].first);
                D += w * (eff[k + 1].second - eff[k].second);
            }
            m.debt[j][static_cast<std::size_t>(t)] = D;
        }
    }

    // Equity from the structural model under each regime's jump law
    m.equity.assign(nf, std::vector<double>(static_cast<std::size_t>(n)));
    const double h_ref = *std::max_element(m.h.begin(), m.h.end());
    for (std::size_t j = 0; j < nf; ++j) {
        const auto& f = m.firms[j];
        for (const auto& seg : segs) {
            AssetModel am{cfg.factor, f.params.delta, f.params.xi, cfg.lambda * seg.lambda_mult, f.a * seg.a_scale, f.b,
                          cfg.tau};
            double span = 8;
            for (int t = seg.begin; t < seg.end; ++t)
                span = std::max(span, std::abs(std::log(m.assets[j][t] / m.debt[j][t])) + 1);
            QuadratureSpec q;
            q.y_span = std::min(span, 12.0);
            PricingKernel k(am, q, h_ref);
            for (int t = seg.begin; t < seg.end; ++t) {
                const auto ts = static_cast<std::size_t>(t);
                const double V = m.assets[j][ts];
                const double S = k.day(r, m.h[ts + 1], m.debt[j][ts] * std::exp(r * cfg.tau)).price(V);
                m.equity[j][ts] = std::max(S, 1e-6 * V);
            }
        }
    }

    // Monthly stress index: AR(1) noise lifted while jumps are elevated
    {
        Stream s = root.child("stress");
        std::normal_distribution<double> z;
        double level = 0;
        for (int t = 0; t < n; ++t) {
            const bool month_end = t + 1 == n || m.calendar[static_cast<std::size_t>(t) + 1].month() !=
                                                     m.calendar[static_cast<std::size_t>(t)].month();
            if (!month_end) continue;
            const double lift = segs[m.segment_of(t)].lambda_mult - 1.0;
            level = 0.7 * level + 0.3 * lift + 0.3 * z(s);
            m.stress.emplace_back(m.calendar[static_cast<std::size_t>(t)], level);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Writers

inline void write_synth_csvs(const SynthMarket& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw UsageError("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("equity.csv");
        csv::Writer w(f);
        w.row("date", "firm_id", "price", "shares_outstanding");
        for (std::size_t j = 0; j < m.firms.size(); ++j)
            for (std::size_t t = 0; t < m.calendar.size(); ++t)
                w.row(m.calendar[t].str(), m.firms[j].id, m.equity[j][t] / m.firms[j].shares, m.firms[j].shares);
    }
    {
        auto f = open("fundamentals.csv");
        csv::Writer w(f);
        w.row("report_date", "firm_id", "long_term_debt", "short_term_debt", "book_assets", "book_equity");
        for (const auto& r : m.reports)
            w.row(r.report_date.str(), r.firm_id, r.long_term_debt, r.short_term_debt, r.book_assets, r.book_equity);
    }
    {
        auto f = open("rates.csv");
        csv::Writer w(f);
        w.row("date", "annual_rate");
        for (Date d : m.calendar) w.row(d.str(), m.config.annual_rate);
    }
    {
        auto f = open("sectors.csv");
        csv::Writer w(f);
        w.row("firm_id", "sector");
        for (const auto& firm : m.firms) w.row(firm.id, firm.sector);
    }
    {
        auto f = open("factor.csv");
        csv::Writer w(f);
        w.row("date", "factor_return");
        for (std::size_t t = 0; t < m.calendar.size(); ++t) w.row(m.calendar[t].str(), m.x[t]);
    }
    {
        auto f = open("stress.csv");
        csv::Writer w(f);
        w.row("month_end", "stress_value");
        for (const auto& [d, v] : m.stress) w.row(d.str(), v);
    }
}

inline nlohmann::ordered_json synth_truth(const SynthMarket& m) {
    const auto& c = m.config;
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["n_days"] = c.n_days;
    j["start"] = c.start.str();
    j["annual_rate"] = c.annual_rate;
    j["factor"] = {{"omega", c.factor.omega}, {"alpha", c.factor.alpha}, {"eta", c.factor.eta},
                   {"gamma", c.factor.gamma}, {"lambda_p", c.factor.lambda_p}};
    j["jumps"] = {{"lambda", c.lambda}, {"a", c.jump_a}, {"b", c.jump_b}};
    j["idio_corr"] = c.idio_corr;
    auto segs = nlohmann::ordered_json::array();
    for (const auto& s : c.segments())
        segs.push_back({{"begin", s.begin},
                        {"end", s.end},
                        {"first_date", m.calendar[static_cast<std::size_t>(s.begin)].str()},
                        {"last_date", m.calendar[static_cast<std::size_t>(s.end - 1)].str()},
                        {"lambda_mult", s.lambda_mult},
                        {"a_scale", s.a_scale}});
    j["regimes"] = segs;
    auto firms = nlohmann::ordered_json::array();
    for (const auto& f : m.firms)
        firms.push_back({{"firm_id", f.id},
                         {"sector", f.sector},
                         {"mu", f.params.mu},
                         {"delta", f.params.delta},
                         {"xi", f.params.xi},
                         {"a", f.a},
                         {"b", f.b},
                         {"V0", f.V0},
                         {"debt_ratio", f.debt_ratio}});
    j["firms"] = firms;
    return j;
}

inline void write_synth(const SynthMarket& m, const std::filesystem::path& dir) {
    write_synth_csvs(m, dir);
    std::ofstream f(dir / "truth.json", std::ios::binary);
    if (!f) throw UsageError("cannot write " + (dir / "truth.json").string());
    f << synth_truth(m).dump(2) << '\n';
}

}  // namespace sysrisk
