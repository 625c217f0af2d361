#pragma once

#include "backfire/core.hpp"
#include "backfire/date.hpp"
#include "backfire/event_ingest.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backfire::features {

struct RowKey {
    int entity = 0;  ///< index into FeatureMatrix::entities
    Date date;

    auto operator<=>(const RowKey&) const = default;
};

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Keyed table of real-valued columns with a per-cell missing mask.
///
/// Missingness is tracked by the mask only; the numeric value under a masked
/// cell is unspecified (currently 0) and must not be read.
struct FeatureMatrix {
    std::vector<std::string> entities;
    std::vector<RowKey> keys;
    std::vector<std::string> names;
    Matrix values;
    MissingMask missing;

    [[nodiscard]] Index rows() const { return values.rows(); }
    [[nodiscard]] Index cols() const { return values.cols(); }
    [[nodiscard]] bool has(std::string_view name) const;
    /// Column index; throws std::out_of_range naming the column.
    [[nodiscard]] Index col(std::string_view name) const;
    [[nodiscard]] Vector column(std::string_view name) const { return values.col(col(name)); }

    /// Append a fully observed column. Throws on a duplicate name.
    void add_column(std::string name, const Vector& v);
    void add_column(std::string name, const Vector& v, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask);
};

/// Single-entity matrix over the national series: totals, sub-event counters, dummies.
FeatureMatrix from_national(const ingest::NationalDailySeries& series);
/// Division-day matrix; entity labels are the division names.
FeatureMatrix from_panel(const ingest::DivisionDayPanel& panel);

/// Adds `<col>_lag<k>` for every column and lag. Lags shift within each
/// entity in date order and never cross entities.
FeatureMatrix add_lags(const FeatureMatrix& fm, std::span<const std::string> columns, std::span<const int> lags);

/// Elementwise square root. With an empty `prefix` the columns are replaced;
/// otherwise new columns `<prefix><col>` are appended. Masks carry over.
FeatureMatrix sqrt_transform(const FeatureMatrix& fm, std::span<const std::string> columns,
                             std::string_view prefix = {});

/// One {0,1} column per calendar, in the order given.
FeatureMatrix apply_dummies(const FeatureMatrix& fm, std::span<const DummyCalendar> calendars);

/// Keep rows for which `keep` is true.
FeatureMatrix filter_rows(const FeatureMatrix& fm, const std::function<bool(const RowKey&)>& keep);

struct Design {
    Vector y;
    Matrix X;
    std::vector<std::string> column_names;  ///< includes "const" when an intercept was added
    std::vector<RowKey> keys;
};

struct DesignOptions {
    bool drop_missing = true;
    bool add_intercept = false;
};

/// Extract (y, X). Rows with a masked cell in any selected column are dropped
/// when `drop_missing` is set and rejected otherwise.
Design assemble_design(const FeatureMatrix& fm, std::string_view response, std::span<const std::string> predictors,
                       DesignOptions options = {});

}  // namespace backfire::features
