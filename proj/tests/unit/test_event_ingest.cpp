#include "backfire/event_ingest.hpp"
#include "backfire/synth_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace backfire;
using namespace backfire::ingest;

namespace {

const DateWindow kWindow{Date(2024, 6, 1), Date(2024, 8, 5)};

std::string header() { return "event_date,admin1,event_type,sub_event_type,fatalities,latitude,longitude\n"; }

std::string row(const std::string& date, const std::string& division, const std::string& sub, int fatalities,
                const std::string& type = "Protests") {
    return date + "," + division + "," + type + "," + sub + "," + std::to_string(fatalities) + ",23.7,90.4\n";
}

AggregationRules rules() { return AggregationRules{kWindow}; }

}  // namespace

TEST(Parse, ThreeValidRows) {
    const auto text = header() + row("2024-07-16", "Dhaka", "Peaceful protest", 0) +
                      row("2024-07-17", "Dhaka", "Peaceful protest", 0) + row("2024-07-18", "Dhaka", "Mob violence", 1, "Riots");
    const auto r = parse_events(text, {}, kWindow);
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_TRUE(r.row_errors.empty());
    EXPECT_EQ(r.records[2].fatalities, 1);
    EXPECT_EQ(r.records[0].event_date, Date(2024, 7, 16));
}

TEST(Parse, NegativeFatalitiesIsRowError) {
    const auto text = header() + row("2024-07-16", "Dhaka", "Peaceful protest", -1) +
                      row("2024-07-17", "Dhaka", "Peaceful protest", 0);
    const auto r = parse_events(text, {}, kWindow);
    EXPECT_EQ(r.records.size(), 1u);
    ASSERT_EQ(r.row_errors.size(), 1u);
    EXPECT_EQ(r.row_errors[0].line, 2u);
}

TEST(Parse, OutsideWindowIsDroppedAndCounted) {
    const auto text = header() + row("2024-05-20", "Dhaka", "Peaceful protest", 0) +
                      row("2024-06-01", "Dhaka", "Peaceful protest", 0);
    const auto r = parse_events(text, {}, kWindow);
    EXPECT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.dropped_outside_window, 1u);
    EXPECT_TRUE(r.row_errors.empty());
}

TEST(Parse, MissingMandatoryColumn) {
    EXPECT_THROW(parse_events("event_date,admin1,event_type,sub_event_type\n", {}, kWindow), SchemaError);
}

TEST(Parse, CustomHeaderNames) {
    SchemaConfig schema;
    schema.division = "region";
    const std::string text = "event_date,region,event_type,sub_event_type,fatalities\n2024-07-01,Khulna,Riots,Mob violence,2\n";
    const auto r = parse_events(text, schema, kWindow);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].division, "Khulna");
    EXPECT_FALSE(r.records[0].latitude);
}

TEST(Parse, BadDateAndNonIntegerFatalities) {
    const auto text = header() + row("2024-13-01", "Dhaka", "Peaceful protest", 0) +
                      "2024-07-01,Dhaka,Protests,Peaceful protest,1.5,,\n";
    const auto r = parse_events(text, {}, kWindow);
    EXPECT_TRUE(r.records.empty());
    EXPECT_EQ(r.row_errors.size(), 2u);
}

TEST(National, ExcessiveForceCountsFatalitiesNotEvents) {
    std::vector<EventRecord> ev = {
        {Date(2024, 7, 16), "Dhaka", "Protests", "Peaceful protest", 0, {}, {}},
        {Date(2024, 7, 16), "Dhaka", "Protests", "Protest with intervention", 0, {}, {}},
        {Date(2024, 7, 16), "Dhaka", "Protests", "Excessive force against protesters", 2, {}, {}},
    };
    const auto s = build_national_series(ev, rules());
    ASSERT_EQ(s.size(), 66u);
    const Index d = Date(2024, 7, 16) - kWindow.first;
    EXPECT_EQ(s.total_events[d], 2);
    EXPECT_EQ(s.total_fatalities[d], 2);
    EXPECT_EQ(s.sub_event_counts.at("excessive_force_against_protesters")[d], 1);
    EXPECT_EQ(s.total_events.sum(), 2);
    EXPECT_EQ(s.total_fatalities.sum(), 2);
}

TEST(National, ZeroFillsEmptyDays) {
    const auto s = build_national_series({}, rules());
    EXPECT_EQ(s.size(), 66u);
    EXPECT_EQ(s.dates.front(), kWindow.first);
    EXPECT_EQ(s.dates.back(), kWindow.last);
    EXPECT_EQ(s.total_events.cwiseAbs().sum(), 0);
}

TEST(National, DummyCalendars) {
    std::vector<DummyCalendar> cal = {{"curfew", {Date(2024, 7, 20), Date(2024, 7, 21)}}};
    const auto s = build_national_series({}, rules(), cal);
    EXPECT_EQ(s.dummies.at("curfew").sum(), 2);
    EXPECT_EQ(s.dummies.at("curfew")[Date(2024, 7, 20) - kWindow.first], 1);
}

TEST(Slug, Lowercases) {
    EXPECT_EQ(slugify("Excessive force against protesters"), "excessive_force_against_protesters");
    EXPECT_EQ(slugify("Mob violence / riot"), "mob_violence_riot");
}

class PanelTest : public ::testing::Test {
protected:
    std::vector<std::string> divisions = synth::EventDgpSpec{}.divisions;
    std::map<std::string, double> population = synth::fixture_population();
};

TEST_F(PanelTest, ShapeAndSingleEventComplement) {
    std::vector<EventRecord> ev = {{Date(2024, 7, 1), "Dhaka", "Protests", "Peaceful protest", 3, {}, {}}};
    const auto p = build_division_panel(ev, rules(), divisions, population);
    EXPECT_EQ(p.rows(), 528);
    const auto dhaka = static_cast<std::size_t>(std::find(divisions.begin(), divisions.end(), "Dhaka") - divisions.begin());
    const std::size_t day = static_cast<std::size_t>(Date(2024, 7, 1) - kWindow.first);
    for (std::size_t i = 0; i < divisions.size(); ++i) {
        const Index r = p.row(i, day);
        EXPECT_EQ(p.local_events[r], i == dhaka ? 1 : 0);
        EXPECT_EQ(p.elsewhere_events[r], i == dhaka ? 0 : 1);
        EXPECT_EQ(p.elsewhere_fatalities[r], i == dhaka ? 0 : 3);
    }
    EXPECT_EQ(p.local_events.sum(), 1);
    EXPECT_EQ(p.days_since_start[p.row(0, 10)], 10);
}

TEST_F(PanelTest, AllZeroInput) {
    const auto p = build_division_panel({}, rules(), divisions, population);
    EXPECT_EQ(p.rows(), 528);
    EXPECT_EQ(p.local_events.sum() + p.elsewhere_events.sum() + p.local_fatalities.sum(), 0);
    EXPECT_NEAR(p.population_millions[p.row(2, 0)], population.at(divisions[2]), 0);
}

TEST_F(PanelTest, LocalPlusElsewhereIsNationalTotal) {
    synth::EventDgpSpec spec;
    spec.seed = 7;
    const auto sim = synth::simulate_events(spec);
    const auto p = build_division_panel(sim.events, rules(), divisions, population);
    const auto nat = build_national_series(sim.events, rules());
    for (std::size_t i = 0; i < divisions.size(); ++i)
        for (std::size_t t = 0; t < p.dates.size(); ++t) {
            const Index r = p.row(i, t);
            EXPECT_EQ(p.local_events[r] + p.elsewhere_events[r], nat.total_events[static_cast<Index>(t)]);
            EXPECT_EQ(p.local_fatalities[r] + p.elsewhere_fatalities[r], nat.total_fatalities[static_cast<Index>(t)]);
        }
}

TEST_F(PanelTest, PermutationInvariant) {
    synth::EventDgpSpec spec;
    spec.seed = 11;
    auto events = synth::simulate_events(spec).events;
    std::erase_if(events, [](const EventRecord& e) { return !kWindow.contains(e.event_date); });
    const auto a = build_division_panel(events, rules(), divisions, population);
    std::mt19937 g(3);
    std::shuffle(events.begin(), events.end(), g);
    const auto b = build_division_panel(events, rules(), divisions, population);
    EXPECT_EQ(a.local_events, b.local_events);
    EXPECT_EQ(a.local_fatalities, b.local_fatalities);
    EXPECT_EQ(a.elsewhere_events, b.elsewhere_events);
}

TEST_F(PanelTest, UnknownDivisionIsError) {
    std::vector<EventRecord> ev = {{Date(2024, 7, 1), "Atlantis", "Protests", "Peaceful protest", 0, {}, {}}};
    EXPECT_THROW(build_division_panel(ev, rules(), divisions, population), Error);
}

TEST_F(PanelTest, EmptyMobilizationSetIsConfigError) {
    auto r = rules();
    r.mobilization_types.clear();
    EXPECT_THROW(build_division_panel({}, r, divisions, population), ConfigError);
    EXPECT_THROW(build_national_series({}, r), ConfigError);
}
