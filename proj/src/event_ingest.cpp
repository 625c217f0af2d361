#include "backfire/event_ingest.hpp"

#include "backfire/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <unordered_map>

namespace backfire::ingest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<long> parse_count(std::string_view s) {
    s = trim(s);
    long v = 0;
    if (s.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
    return v;
}

std::size_t day_index(const DateWindow& w, Date d) { return static_cast<std::size_t>(d - w.first); }

}  // namespace

std::string slugify(std::string_view label) {
    std::string out;
    bool pending = false;
    for (unsigned char c : label) {
        if (std::isalnum(c)) {
            if (pending && !out.empty()) out.push_back('_');
            out.push_back(static_cast<char>(std::tolower(c)));
            pending = false;
        } else {
            pending = true;
        }
    }
    return out;
}

ParseResult parse_events(std::string_view csv_text, const SchemaConfig& schema, const DateWindow& window) {
    const auto records = csv::parse(csv_text);
    if (records.empty()) throw SchemaError("event file has no header row");

    const auto& header = records.front().fields;
    auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return i;
        return std::nullopt;
    };
    auto require = [&](const std::string& name, const char* logical) {
        auto idx = find(name);
        if (!idx) throw SchemaError("missing mandatory column '" + name + "' (" + logical + ")");
        return *idx;
    };
    const std::size_t c_date = require(schema.event_date, "event_date");
    const std::size_t c_div = require(schema.division, "admin1");
    const std::size_t c_type = require(schema.event_type, "event_type");
    const std::size_t c_sub = require(schema.sub_event_type, "sub_event_type");
    const std::size_t c_fat = require(schema.fatalities, "fatalities");
    const auto c_lat = find(schema.latitude);
    const auto c_lon = find(schema.longitude);

    ParseResult out;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        auto field = [&](std::size_t i) -> std::string_view {
            return i < rec.fields.size() ? std::string_view(rec.fields[i]) : std::string_view{};
        };
        auto fail = [&](std::string msg) { out.row_errors.push_back({rec.line, std::move(msg)}); };

        auto date = Date::parse(field(c_date));
        if (!date) {
            fail("unparseable date '" + std::string(field(c_date)) + "'");
            continue;
        }
        auto fat = parse_count(field(c_fat));
        if (!fat) {
            fail("unparseable fatalities '" + std::string(field(c_fat)) + "'");
            continue;
        }
        if (*fat < 0) {
            fail("negative fatalities " + std::to_string(*fat));
            continue;
        }
        if (!window.contains(*date)) {
            ++out.dropped_outside_window;
            continue;
        }
        EventRecord e;
        e.event_date = *date;
        e.division = std::string(trim(field(c_div)));
        e.event_type = std::string(trim(field(c_type)));
        e.sub_event_type = std::string(trim(field(c_sub)));
        e.fatalities = *fat;
        if (c_lat) e.latitude = parse_real(field(*c_lat));
        if (c_lon) e.longitude = parse_real(field(*c_lon));
        out.records.push_back(std::move(e));
    }
    return out;
}

bool AggregationRules::is_mobilization(const EventRecord& e) const {
    if (excluded_sub_event_types.contains(e.sub_event_type)) return false;
    return mobilization_types.contains(e.event_type) || mobilization_types.contains(e.sub_event_type);
}

NationalDailySeries build_national_series(std::span<const EventRecord> events, const AggregationRules& rules,
                                          std::span<const DummyCalendar> calendars) {
    if (rules.mobilization_types.empty()) throw ConfigError("mobilization type set is empty");
    if (rules.window.length() <= 0) throw ConfigError("sample window is empty");

    NationalDailySeries s;
    s.dates = rules.window.days();
    const Index n = static_cast<Index>(s.dates.size());
    s.total_events = Vector::Zero(n);
    s.total_fatalities = Vector::Zero(n);

    for (const auto& e : events) {
        if (!rules.window.contains(e.event_date)) continue;
        const auto t = static_cast<Index>(day_index(rules.window, e.event_date));
        if (rules.is_mobilization(e)) s.total_events[t] += 1.0;
        s.total_fatalities[t] += static_cast<double>(e.fatalities);
        auto [it, inserted] = s.sub_event_counts.try_emplace(slugify(e.sub_event_type), Vector::Zero(n));
        it->second[t] += 1.0;
    }

    for (const auto& cal : calendars) {
        if (s.dummies.contains(cal.name)) throw ConfigError("duplicate dummy name '" + cal.name + "'");
        Vector col = Vector::Zero(n);
        for (Date d : cal.active_dates)
            if (rules.window.contains(d)) col[static_cast<Index>(day_index(rules.window, d))] = 1.0;
        s.dummies.emplace(cal.name, std::move(col));
    }
    return s;
}

DivisionDayPanel build_division_panel(std::span<const EventRecord> events, const AggregationRules& rules,
                                      std::span<const std::string> divisions,
                                      const std::map<std::string, double>& population) {
    if (divisions.empty()) throw ConfigError("division list is empty");
    if (rules.mobilization_types.empty()) throw ConfigError("mobilization type set is empty");
    if (rules.window.length() <= 0) throw ConfigError("sample window is empty");

    std::unordered_map<std::string, std::size_t> div_index;
    for (std::size_t i = 0; i < divisions.size(); ++i) {
        if (!div_index.emplace(divisions[i], i).second)
            throw ConfigError("duplicate division '" + divisions[i] + "'");
        if (!population.contains(divisions[i]))
            throw ConfigError("no population entry for division '" + divisions[i] + "'");
    }

    DivisionDayPanel p;
    p.divisions.assign(divisions.begin(), divisions.end());
    p.dates = rules.window.days();
    const std::size_t T = p.dates.size();
    const Index n = p.rows();
    p.local_events = Vector::Zero(n);
    p.local_fatalities = Vector::Zero(n);
    p.population_millions = Vector::Zero(n);
    p.days_since_start = Vector::Zero(n);

    for (const auto& e : events) {
        if (!rules.window.contains(e.event_date)) continue;
        auto it = div_index.find(e.division);
        if (it == div_index.end())
            throw Error("event on " + e.event_date.to_string() + " has unknown division '" + e.division + "'");
        const Index r = p.row(it->second, day_index(rules.window, e.event_date));
        if (rules.is_mobilization(e)) p.local_events[r] += 1.0;
        p.local_fatalities[r] += static_cast<double>(e.fatalities);
    }

    Vector day_events = Vector::Zero(static_cast<Index>(T));
    Vector day_fatalities = Vector::Zero(static_cast<Index>(T));
    for (std::size_t i = 0; i < divisions.size(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            const Index r = p.row(i, t);
            day_events[static_cast<Index>(t)] += p.local_events[r];
            day_fatalities[static_cast<Index>(t)] += p.local_fatalities[r];
            p.population_millions[r] = population.at(divisions[i]);
            p.days_since_start[r] = static_cast<double>(t);
        }
    }
    p.elsewhere_events.resize(n);
    p.elsewhere_fatalities.resize(n);
    for (std::size_t i = 0; i < divisions.size(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            const Index r = p.row(i, t);
            p.elsewhere_events[r] = day_events[static_cast<Index>(t)] - p.local_events[r];
            p.elsewhere_fatalities[r] = day_fatalities[static_cast<Index>(t)] - p.local_fatalities[r];
        }
    }
    return p;
}

}  // namespace backfire::ingest
