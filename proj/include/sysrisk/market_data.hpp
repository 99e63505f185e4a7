#pragma once

// Panel ingestion, the lagged and interpolated debt proxy, aligned per-firm
// series, top-10 selection and sector descriptors.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sysrisk/csv.hpp"
#include "sysrisk/date.hpp"
#include "sysrisk/error.hpp"

namespace sysrisk {

inline const std::vector<std::string>& sector_names() {
    static const std::vector<std::string> names{"depositories", "broker_dealers", "insurance", "others"};
    return names;
}

struct EquityObs {
    Date date;
    double price = 0;
    double shares = 0;
    double market_equity() const { return price * shares; }
};

struct FundamentalsObs {
    Date report_date;
    double long_term_debt = std::nan("");
    double short_term_debt = std::nan("");
    double book_assets = std::nan("");
    double book_equity = std::nan("");
};

struct DatedValue {
    Date date;
    double value = 0;
};

struct Panels {
    std::map<std::string, std::vector<EquityObs>> equity;              // per firm, increasing dates
    std::map<std::string, std::vector<FundamentalsObs>> fundamentals;  // per firm, increasing report dates
    std::vector<DatedValue> rates;                                      // annual fraction
    std::vector<DatedValue> factor;                                     // optional external factor log returns
    std::map<std::string, std::string> sectors;
    std::vector<Date> calendar;  // union of equity dates
    std::size_t equity_rows = 0;
    std::size_t fundamentals_rows = 0;

    std::size_t calendar_index(Date d) const {
        auto it = std::lower_bound(calendar.begin(), calendar.end(), d);
        if (it == calendar.end() || *it != d) throw DataError("date " + d.str() + " is not a trading day");
        return static_cast<std::size_t>(it - calendar.begin());
    }
};

inline double debt_proxy(double long_term_debt, double short_term_debt) {
    if (long_term_debt < 0 || short_term_debt < 0) throw DomainError("debt_proxy: negative debt");
    return 0.5 * long_term_debt + short_term_debt;
}

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline Date parse_date_field(const csv::Table& t, std::size_t row, std::size_t col) {
    Date d;
    if (!Date::try_parse(t.rows[row][col], d))
        throw ParseError(t.source, row + 2, t.header[col], "invalid date '" + t.rows[row][col] + "'");
    return d;
}

inline std::string firm_field(const csv::Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    if (s.empty()) throw ParseError(t.source, row + 2, t.header[col], "empty firm_id");
    return s;
}

}  // namespace detail

// Equity rows must appear in increasing date order within each firm.
inline void parse_equity(const csv::Table& t, Panels& p) {
    const auto cd = t.column("date"), cf = t.column("firm_id"), cp = t.column("price"), cs = t.column("shares_outstanding");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EquityObs o;
        o.date = detail::parse_date_field(t, r, cd);
        const std::string firm = detail::firm_field(t, r, cf);
        o.price = csv::parse_double(t, r, cp);
        o.shares = csv::parse_double(t, r, cs);
        if (!(o.price > 0)) throw ParseError(t.source, r + 2, "price", "price must be positive");
        if (!(o.shares > 0)) throw ParseError(t.source, r + 2, "shares_outstanding", "shares must be positive");
        auto& v = p.equity[firm];
        if (!v.empty() && v.back().date == o.date)
            throw DataError(t.source + ": duplicate (firm, date) row (" + firm + ", " + o.date.str() + ") at row " +
                            std::to_string(r + 2));
        if (!v.empty() && v.back().date > o.date)
            throw DataError(t.source + ": dates for firm " + firm + " are not increasing at row " + std::to_string(r + 2));
        v.push_back(o);
    }
    p.equity_rows += t.rows.size();
    std::set<Date> days(p.calendar.begin(), p.calendar.end());
    for (const auto& [firm, v] : p.equity)
        for (const auto& o : v) days.insert(o.date);
    p.calendar.assign(days.begin(), days.end());
}

// Empty fields are filled with the firm's most recent prior report.
inline void parse_fundamentals(const csv::Table& t, Panels& p) {
    const auto cd = t.column("report_date"), cf = t.column("firm_id");
    const std::size_t cols[4] = {t.column("long_term_debt"), t.column("short_term_debt"), t.column("book_assets"),
                                 t.column("book_equity")};
    std::map<std::string, std::vector<FundamentalsObs>> by_firm;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        FundamentalsObs o;
        o.report_date = detail::parse_date_field(t, r, cd);
        const std::string firm = detail::firm_field(t, r, cf);
        double* fields[4] = {&o.long_term_debt, &o.short_term_debt, &o.book_assets, &o.book_equity};
        for (int k = 0; k < 4; ++k) {
            *fields[k] = csv::parse_double(t, r, cols[k], true);
            if (k < 3 && *fields[k] < 0) throw ParseError(t.source, r + 2, t.header[cols[k]], "must be non-negative");
        }
        by_firm[firm].push_back(o);
    }
    for (auto& [firm, v] : by_firm) {
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.report_date < b.report_date; });
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i].report_date == v[i - 1].report_date)
                throw DataError(t.source + ": duplicate (firm, report_date) row (" + firm + ", " +
                                v[i].report_date.str() + ")");
            double* cur[4] = {&v[i].long_term_debt, &v[i].short_term_debt, &v[i].book_assets, &v[i].book_equity};
            const double prev[4] = {v[i - 1].long_term_debt, v[i - 1].short_term_debt, v[i - 1].book_assets,
                                    v[i - 1].book_equity};
            for (int k = 0; k < 4; ++k)
                if (std::isnan(*cur[k])) *cur[k] = prev[k];
        }
        auto& dst = p.fundamentals[firm];
        dst.insert(dst.end(), v.begin(), v.end());
    }
    p.fundamentals_rows += t.rows.size();
}

inline std::vector<DatedValue> parse_dated_series(const csv::Table& t, const std::string& date_col,
                                                  const std::string& value_col) {
    const auto cd = t.column(date_col), cv = t.column(value_col);
    std::vector<DatedValue> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        out.push_back({detail::parse_date_field(t, r, cd), csv::parse_double(t, r, cv)});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].date == out[i - 1].date) throw DataError(t.source + ": duplicate date " + out[i].date.str());
    return out;
}

inline void parse_rates(const csv::Table& t, Panels& p) {
    p.rates = parse_dated_series(t, "date", "annual_rate");
    for (std::size_t i = 0; i < p.rates.size(); ++i)
        if (!(p.rates[i].value > -0.05)) throw ParseError(t.source, i + 2, "annual_rate", "rate below -5%");
}

inline void parse_sectors(const csv::Table& t, Panels& p) {
    const auto cf = t.column("firm_id"), cs = t.column("sector");
    const auto& names = sector_names();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string firm = detail::firm_field(t, r, cf);
        const std::string& s = t.rows[r][cs];
        if (std::find(names.begin(), names.end(), s) == names.end())
            throw ParseError(t.source, r + 2, "sector", "unknown sector '" + s + "'");
        if (!p.sectors.emplace(firm, s).second) throw DataError(t.source + ": firm " + firm + " listed twice");
    }
}

inline void parse_factor(const csv::Table& t, Panels& p) { p.factor = parse_dated_series(t, "date", "factor_return"); }

inline Panels load_panels(const std::string& equity_csv, const std::string& fundamentals_csv,
                          const std::string& rates_csv) {
    Panels p;
    parse_equity(csv::read_file(equity_csv), p);
    parse_fundamentals(csv::read_file(fundamentals_csv), p);
    parse_rates(csv::read_file(rates_csv), p);
    return p;
}

// ---------------------------------------------------------------------------
// Aligned per-firm series

struct FirmSeries {
    std::string firm_id;
    std::vector<Date> dates;
    std::vector<double> equity_value;  // price x shares
    std::vector<double> price;
    std::vector<double> debt_face;
    std::vector<double> book_assets;
    std::vector<double> book_equity;
    std::vector<double> log_equity_return;  // first entry uses the previous trading day when available, else NaN

    std::size_t size() const { return dates.size(); }
};

struct LaggedAnchor {
    Date effective;
    double debt = 0;
    double book_assets = 0;
    double book_equity = 0;
};

// Reports shifted by three calendar months and snapped to the next trading day.
inline std::vector<LaggedAnchor> lagged_anchors(const Panels& p, const std::string& firm) {
    std::vector<LaggedAnchor> out;
    auto it = p.fundamentals.find(firm);
    if (it == p.fundamentals.end()) return out;
    for (const auto& f : it->second) {
        if (std::isnan(f.long_term_debt) || std::isnan(f.short_term_debt) || std::isnan(f.book_assets)) continue;
        Date eff = f.report_date.add_months(3);
        // Dates outside the observed calendar have no trading day to snap to.
        if (!p.calendar.empty() && eff >= p.calendar.front() && eff <= p.calendar.back())
            eff = *std::lower_bound(p.calendar.begin(), p.calendar.end(), eff);
        LaggedAnchor a{eff, debt_proxy(f.long_term_debt, f.short_term_debt), f.book_assets,
                       std::isnan(f.book_equity) ? 0.0 : f.book_equity};
        if (!out.empty() && out.back().effective == eff) out.back() = a;
        else out.push_back(a);
    }
    return out;
}

// Linear interpolation in calendar days between anchors; carried forward after the last.
inline std::optional<LaggedAnchor> interpolate_anchor(const std::vector<LaggedAnchor>& anchors, Date d) {
    auto it = std::upper_bound(anchors.begin(), anchors.end(), d,
                               [](Date x, const LaggedAnchor& a) { return x < a.effective; });
    if (it == anchors.begin()) return std::nullopt;
    const LaggedAnchor& lo = *(it - 1);
    if (it == anchors.end() || lo.effective == d) return lo;
    const LaggedAnchor& hi = *it;
    const double w = static_cast<double>(d - lo.effective) / static_cast<double>(hi.effective - lo.effective);
    return LaggedAnchor{d, lo.debt + w * (hi.debt - lo.debt), lo.book_assets + w * (hi.book_assets - lo.book_assets),
                        lo.book_equity + w * (hi.book_equity - lo.book_equity)};
}

// Trading days of the calendar in [start, end].
inline std::vector<Date> window_days(const Panels& p, Date start, Date end) {
    auto a = std::lower_bound(p.calendar.begin(), p.calendar.end(), start);
    auto b = std::upper_bound(p.calendar.begin(), p.calendar.end(), end);
    return {a, b};
}

inline FirmSeries build_firm_series(const Panels& p, const std::string& firm, Date start, Date end) {
    const auto days = window_days(p, start, end);
    if (days.empty()) throw CoverageError("no trading days in window " + start.str() + ".." + end.str());
    auto eq = p.equity.find(firm);
    if (eq == p.equity.end()) throw CoverageError("firm " + firm + " has no equity data");
    const auto& obs = eq->second;
    auto first = std::lower_bound(obs.begin(), obs.end(), days.front(),
                                  [](const EquityObs& o, Date d) { return o.date < d; });
    if (static_cast<std::size_t>(obs.end() - first) < days.size())
        throw CoverageError("firm " + firm + " equity does not cover the window ending " + end.str());
    for (std::size_t i = 0; i < days.size(); ++i)
        if (first[static_cast<long>(i)].date != days[i])
            throw CoverageError("firm " + firm + " has an equity gap at " + days[i].str());
    const auto anchors = lagged_anchors(p, firm);
    FirmSeries s;
    s.firm_id = firm;
    s.dates = days;
    for (std::size_t i = 0; i < days.size(); ++i) {
        const EquityObs& o = first[static_cast<long>(i)];
        auto a = interpolate_anchor(anchors, days[i]);
        if (!a) throw CoverageError("firm " + firm + " has no lagged fundamentals at " + days[i].str());
        s.price.push_back(o.price);
        s.equity_value.push_back(o.market_equity());
        s.debt_face.push_back(a->debt);
        s.book_assets.push_back(a->book_assets);
        s.book_equity.push_back(a->book_equity);
        if (i > 0) {
            s.log_equity_return.push_back(std::log(o.price / s.price[i - 1]));
        } else {
            const bool has_prev = first != obs.begin() && days.front() != p.calendar.front() &&
                                  (first - 1)->date == p.calendar[p.calendar_index(days.front()) - 1];
            s.log_equity_return.push_back(has_prev ? std::log(o.price / (first - 1)->price) : std::nan(""));
        }
    }
    return s;
}

// Daily rate per trading day (annual / 252), carrying the last observation forward.
inline std::vector<double> daily_rates(const Panels& p, const std::vector<Date>& days) {
    std::vector<double> out;
    out.reserve(days.size());
    for (Date d : days) {
        auto it = std::upper_bound(p.rates.begin(), p.rates.end(), d, [](Date x, const DatedValue& v) { return x < v.date; });
        if (it == p.rates.begin()) throw CoverageError("no interest rate observed on or before " + d.str());
        out.push_back((it - 1)->value / 252.0);
    }
    return out;
}

// Factor log returns on the given days: the external series when present, else the
// value-weighted return of every firm in the panel.
inline std::vector<double> factor_returns(const Panels& p, const std::vector<Date>& days) {
    std::vector<double> out;
    out.reserve(days.size());
    if (!p.factor.empty()) {
        for (Date d : days) {
            auto it = std::lower_bound(p.factor.begin(), p.factor.end(), d,
                                       [](const DatedValue& v, Date x) { return v.date < x; });
            if (it == p.factor.end() || it->date != d) throw CoverageError("factor series has no value on " + d.str());
            out.push_back(it->value);
        }
        return out;
    }
    for (Date d : days) {
        const std::size_t k = p.calendar_index(d);
        if (k == 0) throw CoverageError("value-weighted factor undefined on the first calendar day");
        const Date prev = p.calendar[k - 1];
        double num = 0, den = 0;
        for (const auto& [firm, obs] : p.equity) {
            auto it = std::lower_bound(obs.begin(), obs.end(), d, [](const EquityObs& o, Date x) { return o.date < x; });
            if (it == obs.end() || it->date != d || it == obs.begin() || (it - 1)->date != prev) continue;
            const double w = (it - 1)->market_equity();
            num += w * (it->price / (it - 1)->price - 1.0);
            den += w;
        }
        if (den <= 0) throw CoverageError("value-weighted factor undefined on " + d.str());
        out.push_back(std::log1p(num / den));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Universe selection

// The ten largest sector firms by lagged book assets at window start, among firms
// with complete equity and fundamentals coverage over [start, end].
inline std::vector<std::string> select_top10(const Panels& p, const std::string& sector, Date start, Date end,
                                             std::size_t count = 10) {
    std::vector<std::pair<double, std::string>> ranked;
    const auto days = window_days(p, start, end);
    if (days.empty()) throw UniverseError("no trading days in window");
    for (const auto& [firm, sec] : p.sectors) {
        if (sec != sector) continue;
        auto eq = p.equity.find(firm);
        if (eq == p.equity.end()) continue;
        const auto& obs = eq->second;
        auto first = std::lower_bound(obs.begin(), obs.end(), days.front(),
                                      [](const EquityObs& o, Date d) { return o.date < d; });
        if (static_cast<std::size_t>(obs.end() - first) < days.size()) continue;
        bool listed = true;
        for (std::size_t i = 0; i < days.size() && listed; ++i) listed = first[static_cast<long>(i)].date == days[i];
        if (!listed) continue;
        auto a = interpolate_anchor(lagged_anchors(p, firm), days.front());
        if (!a) continue;
        ranked.emplace_back(a->book_assets, firm);
    }
    if (ranked.size() < count)
        throw UniverseError("sector " + sector + " has " + std::to_string(ranked.size()) + " eligible firms for the window " +
                            start.str() + ".." + end.str() + " (need " + std::to_string(count) + ")");
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(ranked[i].second);
    return out;
}

// ---------------------------------------------------------------------------
// Sector descriptors

struct FirmMonth {
    double book_assets = 0;
    double book_equity = 0;
    double market_equity = 0;
    double ret = 0;
};

struct SectorStats {
    double size = 0;  // log of summed book assets
    double lvg = 0;   // market-equity weighted quasi-market leverage
    double ret = 0;   // market-equity weighted return
};

inline double firm_leverage(double book_assets, double book_equity, double market_equity) {
    if (!(market_equity > 0)) throw DomainError("leverage: market equity must be positive");
    return (book_assets - book_equity + market_equity) / market_equity;
}

inline SectorStats sector_stats(const std::vector<FirmMonth>& firms) {
    SectorStats s;
    double ba = 0, me = 0;
    for (const auto& f : firms) {
        if (!(f.market_equity > 0)) throw DomainError("sector_stats: zero market equity");
        ba += f.book_assets;
        me += f.market_equity;
    }
    for (const auto& f : firms) {
        const double w = f.market_equity / me;
        s.lvg += w * firm_leverage(f.book_assets, f.book_equity, f.market_equity);
        s.ret += w * f.ret;
    }
    s.size = std::log(ba);
    return s;
}

}  // namespace sysrisk
