#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "sysrisk/error.hpp"

namespace sysrisk {

// Calendar date backed by a day count since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                            std::chrono::day{d}}) {}

    // Strict YYYY-MM-DD. Returns false on any malformed or impossible date.
    static bool try_parse(std::string_view s, Date& out) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
        auto digits = [&](std::size_t pos, std::size_t n, int& v) {
            v = 0;
            for (std::size_t i = pos; i < pos + n; ++i) {
                if (s[i] < '0' || s[i] > '9') return false;
                v = v * 10 + (s[i] - '0');
            }
            return true;
        };
        int y = 0, m = 0, d = 0;
        if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return false;
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
        if (!ymd.ok()) return false;
        out = Date(std::chrono::sys_days{ymd});
        return true;
    }

    static Date parse(std::string_view s) {
        Date d;
        if (!try_parse(s, d)) throw DataError("invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)");
        return d;
    }

    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
    int year() const { return static_cast<int>(ymd().year()); }
    unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    unsigned day() const { return static_cast<unsigned>(ymd().day()); }
    long serial() const { return days_.time_since_epoch().count(); }
    // Months since year 0; handy for month arithmetic and monthly keys.
    long month_index() const { return static_cast<long>(year()) * 12 + static_cast<long>(month()) - 1; }

    unsigned weekday() const { return std::chrono::weekday{days_}.c_encoding(); }

    Date add_days(long n) const { return Date(days_ + std::chrono::days{n}); }

    // Calendar-month shift; day-of-month clamped to the target month's length.
    Date add_months(int n) const {
        auto ymd0 = ymd();
        auto target = std::chrono::year_month{ymd0.year(), ymd0.month()} + std::chrono::months{n};
        auto last = std::chrono::year_month_day_last{target.year(), std::chrono::month_day_last{target.month()}};
        auto day = ymd0.day() > last.day() ? last.day() : ymd0.day();
        return Date(std::chrono::sys_days{std::chrono::year_month_day{target.year(), target.month(), day}});
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;
    friend long operator-(const Date& a, const Date& b) { return (a.days_ - b.days_).count(); }

private:
    std::chrono::sys_days days_{};
};

}  // namespace sysrisk
