#include "backfire/random.hpp"
#include "backfire/synth_oracle.hpp"
#include "backfire/ts_var.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace backfire;
using namespace backfire::ts;

namespace {

std::vector<double> ar1(double phi, Index n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> y(static_cast<std::size_t>(n));
    double prev = 0;
    for (auto& v : y) prev = v = phi * prev + rng.normal();
    return y;
}

Matrix a_example() {
    Matrix A(2, 2);
    A << 0.5, 0.0, 0.2, 0.3;
    return A;
}

// Random stable VAR(p) by scaling random matrices until the spectral radius is below 0.95.
std::vector<Matrix> random_stable(Rng& rng, int m, int p) {
    std::vector<Matrix> A(static_cast<std::size_t>(p), Matrix(m, m));
    for (auto& a : A)
        for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal() * 0.4;
    while (spectral_radius(companion_matrix(A)) >= 0.95)
        for (auto& a : A) a *= 0.8;
    return A;
}

}  // namespace

TEST(Adf, WhiteNoiseIsStationary) {
    const auto r = adf_test(ar1(0.0, 500, 1));
    EXPECT_TRUE(r.reject_1pct);
    EXPECT_LT(r.test_statistic, r.critical.pct1);
    EXPECT_EQ(r.regression_kind, AdfRegression::Constant);
}

TEST(Adf, Ar05IsStationary) { EXPECT_TRUE(adf_test(ar1(0.5, 500, 2)).reject_5pct); }

TEST(Adf, RandomWalksRarelyRejected) {
    int rejected = 0;
    for (std::uint64_t s = 0; s < 100; ++s) rejected += adf_test(ar1(1.0, 500, 100 + s)).reject_5pct;
    EXPECT_LE(rejected, 10);
}

TEST(Adf, CriticalValuesOrderedAndInterpolated) {
    for (auto kind : {AdfRegression::None, AdfRegression::Constant, AdfRegression::ConstantTrend}) {
        const auto cv = adf_critical_values(kind, 66);
        EXPECT_LT(cv.pct1, cv.pct5);
        EXPECT_LT(cv.pct5, cv.pct10);
    }
    const auto c100 = adf_critical_values(AdfRegression::Constant, 100);
    const auto c50 = adf_critical_values(AdfRegression::Constant, 50);
    const auto c66 = adf_critical_values(AdfRegression::Constant, 66);
    EXPECT_GT(c66.pct5, std::min(c50.pct5, c100.pct5));
    EXPECT_LT(c66.pct5, std::max(c50.pct5, c100.pct5));
    const auto trend = adf_critical_values(AdfRegression::ConstantTrend, 100);
    EXPECT_LT(trend.pct5, c100.pct5);
}

TEST(Adf, Errors) {
    const std::vector<double> flat(100, 3.0);
    EXPECT_THROW(adf_test(flat), std::invalid_argument);
    EXPECT_THROW(adf_test(ar1(0.0, 8, 3), AdfRegression::Constant, 0), std::invalid_argument);
    EXPECT_THROW(adf_regression_from_string("quadratic"), ConfigError);
    EXPECT_EQ(adf_regression_from_string("ct"), AdfRegression::ConstantTrend);
}

TEST(Difference, Examples) {
    EXPECT_EQ(difference(std::vector<double>{5, 5, 5}), (Vector{{0.0, 0.0}}));
    EXPECT_EQ(difference(std::vector<double>{1, 3, 6}), (Vector{{2.0, 3.0}}));
    EXPECT_THROW(difference(std::vector<double>{1}), std::invalid_argument);
    Vector x{{0.3, -1.0, 2.5, 4.0}};
    Vector cs(x.size());
    std::partial_sum(x.begin(), x.end(), cs.begin());
    EXPECT_LT((difference(cs) - x.tail(3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Var, NoiselessRecovery) {
    Matrix data(60, 2);
    data.row(0) << 3.0, -2.0;
    for (Index t = 1; t < 60; ++t) data.row(t) = (a_example() * data.row(t - 1).transpose()).transpose();
    const auto model = fit_var(data, 1);
    EXPECT_LT((model.A[0] - a_example()).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(model.sigma.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(model.stable);
}

TEST(Var, WhiteNoiseHasSmallCoefficients) {
    synth::VarDgpSpec spec;
    spec.A = {Matrix::Zero(2, 2)};
    spec.innovation_cov = Matrix::Identity(2, 2);
    spec.n = 500;
    spec.seed = 12;
    const auto model = fit_var(synth::simulate_var(spec).data, 1);
    EXPECT_LT(model.A[0].cwiseAbs().maxCoeff(), 0.15);
    EXPECT_TRUE(model.stable);
    EXPECT_NEAR(model.sigma(0, 0), 1.0, 0.2);
    EXPECT_LT((model.sigma - model.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
    const double n_eff = static_cast<double>(model.n_eff);
    EXPECT_LT((model.sigma_ml - model.sigma * (n_eff - 3) / n_eff).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(var_aic(model), std::log(model.sigma_ml.determinant()) + 2.0 * (4 + 2) / n_eff, 1e-12);
}

TEST(Var, ExplosiveModelFlaggedUnstable) {
    Matrix A(2, 2);
    A << 1.05, 0.0, 0.1, 0.4;
    synth::VarDgpSpec spec;
    spec.A = {A};
    spec.innovation_cov = Matrix::Identity(2, 2);
    spec.n = 300;
    spec.burn_in = 0;
    spec.seed = 13;
    const auto model = fit_var(synth::simulate_var(spec).data, 1);
    EXPECT_FALSE(model.stable);
    EXPECT_GT(model.spectral_radius, 1.0);
    EXPECT_NEAR(model.spectral_radius, spectral_radius(companion_matrix(model.A)), 1e-12);
    EXPECT_FALSE(model.warnings.empty());
}

TEST(Var, RecoveryImprovesWithSampleSize) {
    Matrix A(2, 2);
    A << 0.5, 0.1, 0.2, 0.3;
    double err[2];
    const int sizes[2] = {200, 2000};
    for (int i = 0; i < 2; ++i) {
        double total = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            synth::VarDgpSpec spec;
            spec.A = {A};
            spec.innovation_cov = Matrix::Identity(2, 2);
            spec.n = sizes[i];
            spec.seed = 500 + s;
            total += (fit_var(synth::simulate_var(spec).data, 1).A[0] - A).cwiseAbs().maxCoeff();
        }
        err[i] = total / 20;
    }
    EXPECT_LT(err[1], 0.5 * err[0]);
}

TEST(Var, LagSelection) {
    synth::VarDgpSpec spec;
    spec.A = {a_example()};
    spec.innovation_cov = Matrix::Identity(2, 2);
    spec.n = 400;
    int hits = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        spec.seed = 900 + s;
        const auto sel = select_lag_aic(synth::simulate_var(spec).data, 6);
        EXPECT_EQ(sel.aic.size(), 6u);
        hits += sel.best == 1;
    }
    EXPECT_GE(hits, 40);
    spec.seed = 1;
    EXPECT_EQ(select_lag_aic(synth::simulate_var(spec).data, 1).best, 1);
    EXPECT_THROW(select_lag_aic(synth::simulate_var(spec).data.topRows(10), 6), std::exception);
}

TEST(Var, DegreesOfFreedomWarning) {
    synth::VarDgpSpec spec;
    spec.A = {Matrix::Zero(2, 2)};
    spec.innovation_cov = Matrix::Identity(2, 2);
    spec.n = 65;
    spec.seed = 3;
    const auto model = fit_var(synth::simulate_var(spec).data, 10);
    bool found = false;
    for (const auto& w : model.warnings) found = found || w.find("observations for") != std::string::npos;
    EXPECT_TRUE(found);
}

TEST(Irf, UnitShockMatchesMatrixPowers) {
    VarModel model;
    model.p = 1;
    model.m = 2;
    model.A = {a_example()};
    model.sigma = Matrix::Identity(2, 2);
    const auto r = impulse_response(model, 3, ShockScale::Unit);
    EXPECT_NEAR(r.point[1](1, 0), 0.2, 1e-15);
    EXPECT_NEAR(r.point[2](1, 0), 0.16, 1e-15);
    EXPECT_EQ(r.point[0], Matrix::Identity(2, 2));
    EXPECT_TRUE(r.lower.empty());
    EXPECT_EQ(r.method, "none");
    EXPECT_THROW(impulse_response(model, -1), std::invalid_argument);
}

TEST(Irf, ZeroDynamicsGiveZeroResponses) {
    VarModel model;
    model.p = 2;
    model.m = 2;
    model.A = {Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
    model.sigma = Matrix::Identity(2, 2);
    const auto r = impulse_response(model, 5);
    for (int h = 1; h <= 5; ++h) EXPECT_EQ(r.point[static_cast<std::size_t>(h)].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Irf, RecursionMatchesCompanionPower) {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 1 + static_cast<int>(rng.below(3));
        const int p = 1 + static_cast<int>(rng.below(3));
        const auto A = random_stable(rng, m, p);
        const auto psi = ma_coefficients(A, 15);
        const Matrix C = companion_matrix(A);
        Matrix power = Matrix::Identity(m * p, m * p);
        for (int h = 0; h <= 15; ++h) {
            EXPECT_LT((psi[static_cast<std::size_t>(h)] - power.topLeftCorner(m, m)).cwiseAbs().maxCoeff(), 1e-10);
            power = power * C;
        }
    }
}

TEST(Irf, ImpactMatrices) {
    VarModel model;
    model.p = 1;
    model.m = 2;
    model.A = {a_example()};
    model.sigma = Matrix(2, 2);
    model.sigma << 4.0, 1.0, 1.0, 2.0;
    const Matrix L = model.sigma.llt().matrixL();
    const auto chol = impulse_response(model, 2, ShockScale::OneSd, Identification::Cholesky);
    EXPECT_LT((chol.point[0] - L).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(chol.point[0](0, 1), 0.0);
    const auto sd = impulse_response(model, 2, ShockScale::OneSd, Identification::NonOrthogonal);
    EXPECT_NEAR(sd.point[0](0, 0), 2.0, 1e-15);
    EXPECT_NEAR(sd.point[0](1, 1), std::sqrt(2.0), 1e-15);
    EXPECT_EQ(sd.point[0](1, 0), 0.0);
    const auto unit_chol = impulse_response(model, 1, ShockScale::Unit, Identification::Cholesky);
    EXPECT_NEAR(unit_chol.point[0](0, 0), 1.0, 1e-15);
    EXPECT_NEAR(unit_chol.point[0](1, 0), 0.25, 1e-15);
}

TEST(Irf, BootstrapBandsDeterministic) {
    synth::VarDgpSpec spec;
    spec.A = {a_example()};
    spec.innovation_cov = Matrix::Identity(2, 2);
    spec.n = 150;
    spec.seed = 31;
    const auto model = fit_var(synth::simulate_var(spec).data, 1);
    const auto a = impulse_response(model, 5, ShockScale::OneSd, Identification::NonOrthogonal, BootstrapSpec{200, 9});
    const auto b = impulse_response(model, 5, ShockScale::OneSd, Identification::NonOrthogonal, BootstrapSpec{200, 9});
    ASSERT_EQ(a.lower.size(), 6u);
    EXPECT_EQ(a.method, "bootstrap");
    EXPECT_EQ(a.replicates_used, 200);
    for (int h = 0; h <= 5; ++h) {
        const auto hh = static_cast<std::size_t>(h);
        EXPECT_EQ(a.lower[hh], b.lower[hh]);
        EXPECT_TRUE((a.lower[hh].array() <= a.upper[hh].array()).all());
    }
    EXPECT_GT(a.lower[1](1, 0), 0.0);
    const auto none = impulse_response(model, 5, ShockScale::OneSd, Identification::NonOrthogonal, BootstrapSpec{0, 9});
    EXPECT_TRUE(none.lower.empty());
    EXPECT_EQ(none.point, a.point);
}

TEST(Quantile, Type7) {
    EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7);
}

TEST(Names, RoundTrip) {
    EXPECT_EQ(identification_from_string(to_string(Identification::Cholesky)), Identification::Cholesky);
    EXPECT_EQ(identification_from_string("non-orthogonalized"), Identification::NonOrthogonal);
    EXPECT_EQ(to_string(ShockScale::OneSd), "one-sd");
}
