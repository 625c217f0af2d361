#include "backfire/panel_fe.hpp"
#include "backfire/random.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <Eigen/QR>

using namespace backfire;
using namespace backfire::panel;
using testutil::make_panel;

namespace {

// Entity and period effects plus `slopes` times the predictors plus noise.
features::FeatureMatrix random_panel(Rng& rng, int E, int T, const std::vector<double>& slopes, double noise) {
    auto fm = make_panel(E, T);
    const Index n = fm.rows();
    Vector a(E), g(T);
    for (int e = 0; e < E; ++e) a[e] = rng.normal();
    for (int t = 0; t < T; ++t) g[t] = rng.normal();
    Vector y(n);
    Matrix X(n, static_cast<Index>(slopes.size()));
    for (Index r = 0; r < n; ++r) {
        const auto& key = fm.keys[static_cast<std::size_t>(r)];
        const int t = key.date - Date(2024, 6, 1);
        y[r] = a[key.entity] + g[t] + noise * rng.normal();
        for (std::size_t j = 0; j < slopes.size(); ++j) {
            X(r, static_cast<Index>(j)) = rng.normal() + a[key.entity];
            y[r] += slopes[j] * X(r, static_cast<Index>(j));
        }
    }
    fm.add_column("y", y);
    for (Index j = 0; j < X.cols(); ++j) fm.add_column("x" + std::to_string(j), X.col(j));
    return fm;
}

// Least squares with explicit entity and period dummies.
Vector lsdv(const features::FeatureMatrix& fm, const std::vector<std::string>& preds) {
    std::map<int, int> ent;
    std::map<Date, int> per;
    for (const auto& k : fm.keys) {
        ent.emplace(k.entity, 0);
        per.emplace(k.date, 0);
    }
    int i = 0;
    for (auto& [k, v] : ent) v = i++;
    i = 0;
    for (auto& [k, v] : per) v = i++;
    const Index E = static_cast<Index>(ent.size()), T = static_cast<Index>(per.size());
    const Index k = static_cast<Index>(preds.size());
    Matrix D = Matrix::Zero(fm.rows(), k + 1 + (E - 1) + (T - 1));
    for (Index r = 0; r < fm.rows(); ++r) {
        for (Index j = 0; j < k; ++j) D(r, j) = fm.values(r, fm.col(preds[static_cast<std::size_t>(j)]));
        D(r, k) = 1;
        const int e = ent.at(fm.keys[static_cast<std::size_t>(r)].entity);
        const int t = per.at(fm.keys[static_cast<std::size_t>(r)].date);
        if (e > 0) D(r, k + e) = 1;
        if (t > 0) D(r, k + (E - 1) + t) = 1;
    }
    const Vector beta = D.colPivHouseholderQr().solve(fm.column("y"));
    return beta.head(k);
}

}  // namespace

TEST(Within, TwoByTwoDemeansToZero) {
    auto fm = make_panel(2, 2);
    fm.add_column("x", Vector{{1.0, 2.0, 3.0, 4.0}});
    const std::vector<std::string> cols = {"x"};
    const auto out = within_transform(fm, cols);
    EXPECT_LT(out.column("x").cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Within, EntityAndTimeConstantColumnsVanish) {
    auto fm = make_panel(3, 4);
    Vector ec(12), tc(12);
    for (Index r = 0; r < 12; ++r) {
        ec[r] = 10.0 * (r / 4) + 1;
        tc[r] = 0.5 * (r % 4) - 3;
    }
    fm.add_column("ec", ec);
    fm.add_column("tc", tc);
    const std::vector<std::string> cols = {"ec", "tc"};
    const auto out = within_transform(fm, cols);
    EXPECT_LT(out.column("ec").cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(out.column("tc").cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Within, Idempotent) {
    Rng rng(3);
    const auto fm = random_panel(rng, 5, 8, {1.0}, 1.0);
    const std::vector<std::string> cols = {"y", "x0"};
    const auto once = within_transform(fm, cols);
    const auto twice = within_transform(once, cols);
    EXPECT_LT((once.values - twice.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Within, NeedsTwoEntitiesAndPeriods) {
    auto one_entity = make_panel(1, 5);
    one_entity.add_column("x", Vector::LinSpaced(5, 0, 4));
    const std::vector<std::string> cols = {"x"};
    EXPECT_THROW(within_transform(one_entity, cols), Error);
    auto one_period = make_panel(4, 1);
    one_period.add_column("x", Vector::LinSpaced(4, 0, 3));
    EXPECT_THROW(within_transform(one_period, cols), Error);
}

TEST(Twfe, NoiselessRecovery) {
    Rng rng(4);
    const auto fm = random_panel(rng, 6, 10, {0.5}, 0.0);
    const std::vector<std::string> preds = {"x0"};
    const auto fit = fit_twfe(fm, "y", preds);
    EXPECT_NEAR(fit.coef("x0"), 0.5, 1e-10);
    EXPECT_NEAR(fit.within_r2, 1.0, 1e-10);
    EXPECT_EQ(fit.n_entities, 6);
    EXPECT_EQ(fit.n_periods, 10);
    EXPECT_EQ(fit.n_obs, 60);
    EXPECT_EQ(fit.ols.df_resid, 60 - 1 - 5 - 9 - 1);
}

TEST(Twfe, EntityConstantPredictorIsAbsorbed) {
    Rng rng(5);
    auto fm = random_panel(rng, 4, 6, {0.5}, 0.3);
    Vector pop(fm.rows());
    for (Index r = 0; r < fm.rows(); ++r) pop[r] = 1.5 + fm.keys[static_cast<std::size_t>(r)].entity;
    fm.add_column("population", pop);
    Vector trend(fm.rows());
    for (Index r = 0; r < fm.rows(); ++r) trend[r] = fm.keys[static_cast<std::size_t>(r)].date - Date(2024, 6, 1);
    fm.add_column("days", trend);
    const std::vector<std::string> preds = {"x0", "population", "days"};
    const auto fit = fit_twfe(fm, "y", preds);
    EXPECT_TRUE(fit.estimated("x0"));
    EXPECT_FALSE(fit.estimated("population"));
    ASSERT_EQ(fit.absorbed.size(), 2u);
    EXPECT_EQ(fit.absorbed[0].column, "population");
    EXPECT_EQ(fit.absorbed[0].reason, AbsorbReason::EntityConstant);
    EXPECT_EQ(fit.absorbed[1].column, "days");
    EXPECT_EQ(fit.absorbed[1].reason, AbsorbReason::TimeConstant);

    const std::vector<std::string> only_pop = {"population"};
    EXPECT_THROW(fit_twfe(fm, "y", only_pop), Error);
}

TEST(Twfe, MatchesDummyVariableRegression) {
    Rng rng(6);
    for (int rep = 0; rep < 25; ++rep) {
        const int E = 2 + static_cast<int>(rng.below(5));
        const int T = 3 + static_cast<int>(rng.below(8));
        auto fm = random_panel(rng, E, T, {0.7, -0.2}, 1.0);
        if (rep % 2 == 1) {
            // Drop a few rows so the panel is unbalanced.
            const Index drop = static_cast<Index>(rng.below(static_cast<std::uint64_t>(E)));
            fm = features::filter_rows(fm, [&](const features::RowKey& k) {
                return !(k.entity == drop && k.date == Date(2024, 6, 1) + 1);
            });
        }
        const std::vector<std::string> preds = {"x0", "x1"};
        const auto fit = fit_twfe(fm, "y", preds, {.demean_tol = 1e-14});
        const Vector ref = lsdv(fm, preds);
        EXPECT_NEAR(fit.coef("x0"), ref[0], 1e-8) << "rep " << rep;
        EXPECT_NEAR(fit.coef("x1"), ref[1], 1e-8) << "rep " << rep;
        EXPECT_GE(fit.within_r2, 0.0);
        EXPECT_LE(fit.within_r2, 1.0);
    }
}

TEST(Twfe, ClusteredOnEntity) {
    Rng rng(7);
    const auto fm = random_panel(rng, 6, 12, {0.4}, 1.0);
    const std::vector<std::string> preds = {"x0"};
    const auto fit = fit_twfe(fm, "y", preds, {.se_kind = linreg::SeKind::Cluster});
    EXPECT_EQ(fit.ols.n_clusters, 6);
    EXPECT_GT(fit.se("x0"), 0);
}

namespace {

features::FeatureMatrix break_panel(double pre, double post, int cutoff_index) {
    Rng rng(8);
    auto fm = random_panel(rng, 5, 12, {0.0}, 0.0);
    Vector y = fm.column("y");
    const Vector x = fm.column("x0");
    for (Index r = 0; r < fm.rows(); ++r) {
        const int t = fm.keys[static_cast<std::size_t>(r)].date - Date(2024, 6, 1);
        y[r] += (t >= cutoff_index ? post : pre) * x[r];
    }
    fm.values.col(fm.col("y")) = y;
    return fm;
}

}  // namespace

TEST(Break, NoiselessSlopeChange) {
    const auto fm = break_panel(0.0, 0.3, 6);
    const std::vector<std::string> preds = {"x0"};
    const auto fit = fit_structural_break(fm, "y", preds, {Date(2024, 6, 7), "x0"});
    ASSERT_TRUE(fit.pre_effect && fit.interaction);
    EXPECT_NEAR(*fit.pre_effect, 0.0, 1e-10);
    EXPECT_NEAR(*fit.interaction, 0.3, 1e-10);
    EXPECT_NEAR(fit.total_effect, 0.3, 1e-10);
    EXPECT_EQ(fit.interaction_name, "x0_x_post");
}

TEST(Break, TotalStandardErrorFromCovariance) {
    Rng rng(9);
    const auto fm = random_panel(rng, 6, 14, {0.3}, 1.0);
    const std::vector<std::string> preds = {"x0"};
    const auto fit = fit_structural_break(fm, "y", preds, {Date(2024, 6, 8), "x0"});
    const Index a = fit.twfe.index_of("x0"), b = fit.twfe.index_of("x0_x_post");
    const Matrix& V = fit.twfe.ols.covariance;
    EXPECT_NEAR(fit.total_se, std::sqrt(V(a, a) + V(b, b) + 2 * V(a, b)), 1e-12);
    EXPECT_NEAR(fit.total_effect, *fit.pre_effect + *fit.interaction, 1e-12);
}

TEST(Break, CutoffBeforeSampleCarriesWholeSlope) {
    Rng rng(10);
    const auto fm = random_panel(rng, 5, 10, {0.6}, 0.5);
    const std::vector<std::string> preds = {"x0"};
    const auto plain = fit_twfe(fm, "y", preds);
    const auto early = fit_structural_break(fm, "y", preds, {Date(2024, 5, 1), "x0"});
    EXPECT_FALSE(early.pre_effect);
    EXPECT_NEAR(*early.interaction, plain.coef("x0"), 1e-10);
    EXPECT_FALSE(early.twfe.warnings.empty());

    const auto late = fit_structural_break(fm, "y", preds, {Date(2024, 9, 1), "x0"});
    EXPECT_FALSE(late.interaction);
    EXPECT_NEAR(*late.pre_effect, plain.coef("x0"), 1e-10);
    EXPECT_NEAR(late.total_effect, plain.coef("x0"), 1e-10);
}

TEST(Break, InteractionCollinearWithTimeEffects) {
    auto fm = make_panel(4, 6);
    Vector x(fm.rows()), y(fm.rows());
    Rng rng(11);
    for (Index r = 0; r < fm.rows(); ++r) {
        // Varies only by date, so x * post is absorbed by the period effects.
        x[r] = fm.keys[static_cast<std::size_t>(r)].date - Date(2024, 6, 1);
        y[r] = rng.normal();
    }
    fm.add_column("y", y);
    fm.add_column("x", x);
    fm.add_column("z", Vector::NullaryExpr(fm.rows(), [&](Index) { return rng.normal(); }));
    const std::vector<std::string> preds = {"z", "x"};
    EXPECT_THROW(fit_structural_break(fm, "y", preds, {Date(2024, 6, 3), "x"}), Error);
}
