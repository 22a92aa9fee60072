#include "agripolicy/date.hpp"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace agripolicy {

namespace {

template <typename T>
bool parse_digits(std::string_view text, T& out) {
    for (char c : text) {
        if (c < '0' || c > '9') return false;
    }
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                    std::chrono::day{day}};
    if (!ymd.ok()) {
        throw std::invalid_argument(fmt::format("invalid date {:04d}-{:02d}-{:02d}", year, month, day));
    }
    days_ = std::chrono::sys_days{ymd};
}

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
        !parse_digits(text.substr(8, 2), d)) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
}

int Date::year() const { return static_cast<int>(ymd().year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd().month()); }
unsigned Date::day() const { return static_cast<unsigned>(ymd().day()); }

unsigned Date::iso_weekday_index() const {
    return std::chrono::weekday{days_}.iso_encoding() - 1;
}

std::string Date::to_string() const {
    return fmt::format("{:04d}-{:02d}-{:02d}", year(), month(), day());
}

}  // namespace agripolicy
