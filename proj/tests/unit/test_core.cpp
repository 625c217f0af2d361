#include "backfire/csv.hpp"
#include "backfire/date.hpp"
#include "backfire/random.hpp"
#include "backfire/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace backfire;

TEST(Date, ParsesIsoAndLongForm) {
    EXPECT_EQ(Date::from_string("2024-07-16"), Date(2024, 7, 16));
    EXPECT_EQ(Date::from_string("16 July 2024"), Date(2024, 7, 16));
    EXPECT_FALSE(Date::parse("2024-02-30"));
    EXPECT_FALSE(Date::parse("yesterday"));
    EXPECT_THROW(Date::from_string("2024/07/16"), std::invalid_argument);
}

TEST(Date, Arithmetic) {
    const Date d(2024, 6, 1);
    EXPECT_EQ((d + 30).to_string(), "2024-07-01");
    EXPECT_EQ(Date(2024, 8, 5) - d, 65);
    EXPECT_EQ((DateWindow{d, Date(2024, 8, 5)}).length(), 66);
    EXPECT_EQ((DateWindow{d, Date(2024, 8, 5)}).days().size(), 66u);
}

TEST(Csv, QuotedFieldsAndBom) {
    const auto rows = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n\n\"multi\nline\",2\n");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].fields[0], "a");
    EXPECT_EQ(rows[1].fields[0], "x, y");
    EXPECT_EQ(rows[1].fields[1], "he said \"hi\"");
    EXPECT_EQ(rows[2].fields[0], "multi\nline");
    EXPECT_EQ(rows[2].line, 4u);
}

TEST(Csv, EscapeRoundTrip) {
    for (const std::string s : {"plain", "a,b", "q\"uote", "line\nbreak"}) {
        const auto rows = csv::parse(csv::escape(s) + ",x\n");
        ASSERT_EQ(rows.size(), 1u);
        EXPECT_EQ(rows[0].fields[0], s);
    }
    EXPECT_EQ(csv::format_double(0.1), "0.1");
    EXPECT_EQ(std::stod(csv::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    Rng a = Rng::stream(7, "alpha", 0);
    Rng b = Rng::stream(7, "alpha", 0);
    Rng c = Rng::stream(7, "alpha", 1);
    Rng d = Rng::stream(7, "beta", 0);
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        EXPECT_NE(x, c());
        EXPECT_NE(x, d());
    }
}

TEST(Rng, UniformAndBelowRanges) {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(rng.below(7), 7u);
    }
}

TEST(Rng, MomentsOfVariates) {
    Rng rng = Rng::stream(11, "moments");
    const int n = 200000;
    double sn = 0, sn2 = 0, sg = 0, sg2 = 0, sp = 0, sp2 = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
        const double g = rng.gamma(2.5, 2.0);
        sg += g;
        sg2 += g * g;
        const double p = static_cast<double>(rng.poisson(3.5));
        sp += p;
        sp2 += p * p;
        sq += static_cast<double>(rng.poisson(40.0));
    }
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.01);
    EXPECT_NEAR(sg / n, 5.0, 0.03);
    EXPECT_NEAR(sg2 / n - std::pow(sg / n, 2), 10.0, 0.15);
    EXPECT_NEAR(sp / n, 3.5, 0.02);
    EXPECT_NEAR(sp2 / n - std::pow(sp / n, 2), 3.5, 0.05);
    EXPECT_NEAR(sq / n, 40.0, 0.05);
}

TEST(Rng, SampleWithoutReplacement) {
    Rng rng(3);
    const auto s = sample_without_replacement(rng, 10, 4);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 4u);
    for (auto i : s) EXPECT_LT(i, 10u);
}

// Reference values from an independent statistical library.
TEST(Stats, Distributions) {
    EXPECT_NEAR(stats::student_t_two_sided(2.0, 10), 0.07338803477074039, 1e-10);
    EXPECT_NEAR(stats::normal_cdf(1.96), 0.9750021048517795, 1e-12);
    EXPECT_NEAR(stats::student_t_quantile(0.975, 10), 2.2281388519649385, 1e-8);
    EXPECT_NEAR(stats::chi2_1_sf(3.841458820694124), 0.05, 1e-12);
    EXPECT_NEAR(stats::incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);
    EXPECT_NEAR(stats::student_t_cdf(-1.3, 4.5), 0.12809804397201696, 1e-10);
}
