#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace backfire {

/// Calendar day. Stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}
    Date(int year, unsigned month, unsigned day);

    /// Accepts ISO `YYYY-MM-DD` and the ACLED export form `16 July 2024`.
    static std::optional<Date> parse(std::string_view text);
    /// As parse(), but throws std::invalid_argument on malformed input.
    static Date from_string(std::string_view text);

    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] constexpr std::int64_t serial() const { return days_; }
    [[nodiscard]] std::chrono::sys_days sys_days() const {
        return std::chrono::sys_days{std::chrono::days{days_}};
    }

    constexpr Date operator+(std::int64_t n) const {
        Date d;
        d.days_ = days_ + n;
        return d;
    }
    constexpr Date operator-(std::int64_t n) const { return *this + (-n); }
    constexpr std::int64_t operator-(Date other) const { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int64_t days_ = 0;
};

/// Closed date interval [first, last].
struct DateWindow {
    Date first;
    Date last;

    [[nodiscard]] bool contains(Date d) const { return first <= d && d <= last; }
    [[nodiscard]] std::int64_t length() const { return last - first + 1; }
    [[nodiscard]] std::vector<Date> days() const;
};

/// Named binary indicator that is 1 exactly on `active_dates`.
struct DummyCalendar {
    std::string name;
    std::set<Date> active_dates;
};

}  // namespace backfire
