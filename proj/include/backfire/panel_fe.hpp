#pragma once

#include "backfire/core.hpp"
#include "backfire/date.hpp"
#include "backfire/feature_lab.hpp"
#include "backfire/linreg.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backfire::panel {

/// Two-way demeaning of every column of `values` by entity and period.
///
/// Alternates entity and period demeaning until the largest update falls
/// below `tol * max(1, max|x|)`. On a balanced panel the first sweep already
/// yields x - mean_i - mean_t + mean, so the loop exits after the second.
/// `entity` and `period` hold compact ids (0..E-1, 0..T-1) per row.
template <typename Derived>
MatrixX<typename Derived::Scalar> two_way_demean(const Eigen::MatrixBase<Derived>& values, std::span<const int> entity,
                                                 std::span<const int> period, int n_entities, int n_periods,
                                                 typename Derived::Scalar tol = 1e-12, int max_sweeps = 100000) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> x = values;
    const Index n = x.rows();
    VectorX<Scalar> entity_count = VectorX<Scalar>::Zero(n_entities);
    VectorX<Scalar> period_count = VectorX<Scalar>::Zero(n_periods);
    for (Index r = 0; r < n; ++r) {
        entity_count[entity[static_cast<std::size_t>(r)]] += 1;
        period_count[period[static_cast<std::size_t>(r)]] += 1;
    }
    const Scalar scale = std::max<Scalar>(Scalar(1), x.size() ? x.cwiseAbs().maxCoeff() : Scalar(0));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        Scalar change = 0;
        for (int pass = 0; pass < 2; ++pass) {
            const auto ids = pass == 0 ? entity : period;
            const auto& count = pass == 0 ? entity_count : period_count;
            MatrixX<Scalar> sums = MatrixX<Scalar>::Zero(count.size(), x.cols());
            for (Index r = 0; r < n; ++r) sums.row(ids[static_cast<std::size_t>(r)]) += x.row(r);
            for (Index g = 0; g < count.size(); ++g)
                if (count[g] > 0) sums.row(g) /= count[g];
            for (Index r = 0; r < n; ++r) x.row(r) -= sums.row(ids[static_cast<std::size_t>(r)]);
            if (sums.size()) change = std::max(change, sums.cwiseAbs().maxCoeff());
        }
        if (change <= tol * scale) break;
        if (sweep + 1 == max_sweeps) throw ConvergenceError("two_way_demean: no fixed point reached");
    }
    return x;
}

/// Replace `columns` by their two-way demeaned values. Rows with a masked
/// cell in any of the columns are dropped first. Throws when the remaining
/// rows cover fewer than two entities or two periods.
features::FeatureMatrix within_transform(const features::FeatureMatrix& fm, std::span<const std::string> columns);

enum class AbsorbReason { EntityConstant, TimeConstant, Collinear };
std::string_view to_string(AbsorbReason reason);

struct AbsorbedColumn {
    std::string column;
    AbsorbReason reason;
};

struct TwfeFit {
    std::vector<std::string> names;  ///< estimated predictors, in the order of `coefficients`
    linreg::OlsFit ols;              ///< fit on the demeaned data
    double within_r2 = 0.0;
    std::vector<AbsorbedColumn> absorbed;
    Index n_entities = 0;
    Index n_periods = 0;
    Index n_obs = 0;
    std::vector<std::string> warnings;

    [[nodiscard]] bool estimated(std::string_view name) const;
    [[nodiscard]] Index index_of(std::string_view name) const;
    [[nodiscard]] double coef(std::string_view name) const { return ols.coefficients[index_of(name)]; }
    [[nodiscard]] double se(std::string_view name) const { return ols.std_errors[index_of(name)]; }
};

struct TwfeOptions {
    linreg::SeKind se_kind = linreg::SeKind::HC1;
    /// Predictors listed here are kept in preference to others when a set of
    /// demeaned columns is collinear.
    std::vector<std::string> keep_first;
    double demean_tol = 1e-12;
};

/// Entity and date fixed effects via the within transformation. Clustered
/// standard errors cluster on entity. Residual degrees of freedom are
/// n - k - (E-1) - (T-1) - 1.
TwfeFit fit_twfe(const features::FeatureMatrix& fm, std::string_view response, std::span<const std::string> predictors,
                 const TwfeOptions& options = {});

struct BreakSpec {
    Date cutoff;
    std::string interacted_column;
};

struct BreakFit {
    TwfeFit twfe;
    BreakSpec spec;
    std::string interaction_name;
    std::optional<double> pre_effect;  ///< coefficient on the interacted column
    std::optional<double> pre_se;
    std::optional<double> interaction;  ///< change in slope on/after the cutoff
    std::optional<double> interaction_se;
    double total_effect = 0.0;  ///< post-break slope
    double total_se = 0.0;
    double total_p = 0.0;
};

/// Adds `<column>_x_post` = column * [date >= cutoff] and fits the TWFE model.
///
/// A cutoff on or before the first date makes the base column redundant (it
/// is absorbed and the interaction carries the whole slope); a cutoff after
/// the last date absorbs the interaction. Both cases return with a warning.
/// When the cutoff does split the sample, absorption of the interaction means
/// it is collinear with the fixed effects and an Error is thrown.
BreakFit fit_structural_break(const features::FeatureMatrix& fm, std::string_view response,
                              std::span<const std::string> predictors, const BreakSpec& spec,
                              const TwfeOptions& options = {});

}  // namespace backfire::panel
