#pragma once

#include "backfire/core.hpp"
#include "backfire/date.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backfire::ingest {

/// One georeferenced, dated, typed political event.
struct EventRecord {
    Date event_date;
    std::string division;
    std::string event_type;
    std::string sub_event_type;
    long fatalities = 0;
    std::optional<double> latitude;
    std::optional<double> longitude;
};

/// Physical CSV header names for each logical column.
struct SchemaConfig {
    std::string event_date = "event_date";
    std::string division = "admin1";
    std::string event_type = "event_type";
    std::string sub_event_type = "sub_event_type";
    std::string fatalities = "fatalities";
    std::string latitude = "latitude";
    std::string longitude = "longitude";
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct ParseResult {
    std::vector<EventRecord> records;
    std::vector<RowError> row_errors;
    std::size_t dropped_outside_window = 0;
};

/// Parse an ACLED-style CSV. Throws SchemaError if a mandatory column is
/// absent; per-row problems are collected in `row_errors` and the row skipped.
ParseResult parse_events(std::string_view csv_text, const SchemaConfig& schema, const DateWindow& window);

/// Which events count as mobilization.
///
/// A row qualifies when its event type or sub-event type is listed in
/// `mobilization_types`, unless its sub-event type is listed in
/// `excluded_sub_event_types`. The exclusion keeps state violence that ACLED
/// files under "Protests" (excessive force against protesters) out of the
/// mobilization count.
struct AggregationRules {
    DateWindow window;
    std::set<std::string> mobilization_types = {"Protests", "Riots", "Violent demonstration"};
    std::set<std::string> excluded_sub_event_types = {"Excessive force against protesters"};

    [[nodiscard]] bool is_mobilization(const EventRecord& e) const;
};

struct NationalDailySeries {
    std::vector<Date> dates;
    Vector total_events;
    Vector total_fatalities;
    /// Keyed by slugified sub-event type, e.g. "excessive_force_against_protesters".
    std::map<std::string, Vector> sub_event_counts;
    std::map<std::string, Vector> dummies;

    [[nodiscard]] std::size_t size() const { return dates.size(); }
};

NationalDailySeries build_national_series(std::span<const EventRecord> events, const AggregationRules& rules,
                                          std::span<const DummyCalendar> calendars = {});

/// Balanced division x day table, division-major (row = division * T + day).
struct DivisionDayPanel {
    std::vector<std::string> divisions;
    std::vector<Date> dates;
    Vector local_events;
    Vector local_fatalities;
    Vector elsewhere_events;
    Vector elsewhere_fatalities;
    Vector population_millions;
    Vector days_since_start;

    [[nodiscard]] Index rows() const { return static_cast<Index>(divisions.size() * dates.size()); }
    [[nodiscard]] Index row(std::size_t division, std::size_t day) const {
        return static_cast<Index>(division * dates.size() + day);
    }
};

/// Throws Error when an event names a division outside `divisions`, or
/// when `population` lacks an entry for some division.
DivisionDayPanel build_division_panel(std::span<const EventRecord> events, const AggregationRules& rules,
                                      std::span<const std::string> divisions,
                                      const std::map<std::string, double>& population);

/// Lowercase, non-alphanumerics collapsed to '_'.
std::string slugify(std::string_view label);

}  // namespace backfire::ingest
