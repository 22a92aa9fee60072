#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace agripolicy {

/// Calendar date with day arithmetic. Stored as days since the Unix epoch.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    Date(int year, unsigned month, unsigned day);

    /// Parses strict `YYYY-MM-DD`. Returns nullopt for anything else,
    /// including impossible dates such as 2019-02-29.
    static std::optional<Date> parse(std::string_view text);

    std::chrono::sys_days days() const { return days_; }
    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
    int year() const;
    unsigned month() const;
    unsigned day() const;

    /// 0 = Monday ... 6 = Sunday.
    unsigned iso_weekday_index() const;

    Date plus_days(long n) const { return Date{days_ + std::chrono::days{n}}; }
    long days_until(Date other) const { return (other.days_ - days_).count(); }

    std::string to_string() const;

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace agripolicy
