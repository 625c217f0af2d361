#include "backfire/date.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace backfire {

namespace {

constexpr std::array<std::string_view, 12> kMonthNames = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

std::optional<int> to_int(std::string_view s) {
    int v = 0;
    if (s.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<Date> make_checked(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
    auto d = make_checked(year, static_cast<int>(month), static_cast<int>(day));
    if (!d) throw std::invalid_argument("invalid calendar date");
    *this = *d;
}

std::optional<Date> Date::parse(std::string_view text) {
    text = trim(text);
    // YYYY-MM-DD
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        auto y = to_int(text.substr(0, 4));
        auto m = to_int(text.substr(5, 2));
        auto d = to_int(text.substr(8, 2));
        if (!y || !m || !d) return std::nullopt;
        return make_checked(*y, *m, *d);
    }
    // D Month YYYY
    auto sp1 = text.find(' ');
    auto sp2 = text.rfind(' ');
    if (sp1 == std::string_view::npos || sp1 == sp2) return std::nullopt;
    auto d = to_int(text.substr(0, sp1));
    auto y = to_int(text.substr(sp2 + 1));
    std::string month{trim(text.substr(sp1 + 1, sp2 - sp1 - 1))};
    std::transform(month.begin(), month.end(), month.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto it = std::find(kMonthNames.begin(), kMonthNames.end(), month);
    if (!d || !y || it == kMonthNames.end()) return std::nullopt;
    return make_checked(*y, static_cast<int>(it - kMonthNames.begin()) + 1, *d);
}

Date Date::from_string(std::string_view text) {
    auto d = parse(text);
    if (!d) throw std::invalid_argument("unparseable date '" + std::string(text) + "'");
    return *d;
}

std::string Date::to_string() const {
    std::chrono::year_month_day ymd{sys_days()};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<Date> DateWindow::days() const {
    std::vector<Date> out;
    if (last < first) return out;
    out.reserve(static_cast<std::size_t>(length()));
    for (Date d = first; d <= last; d = d + 1) out.push_back(d);
    return out;
}

}  // namespace backfire
