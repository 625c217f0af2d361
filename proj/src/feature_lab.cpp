#include "backfire/feature_lab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace backfire::features {

bool FeatureMatrix::has(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

Index FeatureMatrix::col(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no column named '" + std::string(name) + "'");
    return static_cast<Index>(it - names.begin());
}

void FeatureMatrix::add_column(std::string name, const Vector& v) {
    add_column(std::move(name), v, Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(v.size(), false));
}

void FeatureMatrix::add_column(std::string name, const Vector& v, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
    if (has(name)) throw std::invalid_argument("duplicate column name '" + name + "'");
    if (v.size() != rows() || mask.size() != rows())
        throw std::invalid_argument("column '" + name + "' has wrong length");
    const Index c = cols();
    values.conservativeResize(rows(), c + 1);
    missing.conservativeResize(rows(), c + 1);
    values.col(c) = v;
    missing.col(c) = mask;
    names.push_back(std::move(name));
}

FeatureMatrix from_national(const ingest::NationalDailySeries& series) {
    FeatureMatrix fm;
    fm.entities = {"national"};
    for (Date d : series.dates) fm.keys.push_back({0, d});
    const Index n = static_cast<Index>(series.dates.size());
    fm.values.resize(n, 0);
    fm.missing.resize(n, 0);
    fm.add_column("total_events", series.total_events);
    fm.add_column("total_fatalities", series.total_fatalities);
    for (const auto& [name, v] : series.sub_event_counts) fm.add_column(name, v);
    for (const auto& [name, v] : series.dummies) fm.add_column(name, v);
    return fm;
}

FeatureMatrix from_panel(const ingest::DivisionDayPanel& panel) {
    FeatureMatrix fm;
    fm.entities = panel.divisions;
    for (std::size_t i = 0; i < panel.divisions.size(); ++i)
        for (Date d : panel.dates) fm.keys.push_back({static_cast<int>(i), d});
    fm.values.resize(panel.rows(), 0);
    fm.missing.resize(panel.rows(), 0);
    fm.add_column("local_events", panel.local_events);
    fm.add_column("local_fatalities", panel.local_fatalities);
    fm.add_column("elsewhere_events", panel.elsewhere_events);
    fm.add_column("elsewhere_fatalities", panel.elsewhere_fatalities);
    fm.add_column("population_millions", panel.population_millions);
    fm.add_column("days_since_start", panel.days_since_start);
    return fm;
}

FeatureMatrix add_lags(const FeatureMatrix& fm, std::span<const std::string> columns, std::span<const int> lags) {
    // Row indices of each entity, sorted by date.
    std::map<int, std::vector<Index>> by_entity;
    for (Index r = 0; r < fm.rows(); ++r) by_entity[fm.keys[static_cast<std::size_t>(r)].entity].push_back(r);
    for (auto& [entity, rows] : by_entity) {
        std::sort(rows.begin(), rows.end(), [&](Index a, Index b) {
            return fm.keys[static_cast<std::size_t>(a)].date < fm.keys[static_cast<std::size_t>(b)].date;
        });
    }

    FeatureMatrix out = fm;
    for (const auto& name : columns) {
        const Index src = fm.col(name);
        for (int k : lags) {
            if (k <= 0) throw std::invalid_argument("lag orders must be positive");
            Vector v = Vector::Zero(fm.rows());
            Eigen::Array<bool, Eigen::Dynamic, 1> mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(fm.rows(), true);
            for (const auto& [entity, rows] : by_entity) {
                if (static_cast<std::size_t>(k) >= rows.size())
                    throw std::invalid_argument("lag " + std::to_string(k) + " is not shorter than the series of entity '" +
                                                fm.entities.at(static_cast<std::size_t>(entity)) + "'");
                for (std::size_t j = static_cast<std::size_t>(k); j < rows.size(); ++j) {
                    const Index to = rows[j];
                    const Index from = rows[j - static_cast<std::size_t>(k)];
                    mask[to] = fm.missing(from, src);
                    v[to] = mask[to] ? 0.0 : fm.values(from, src);
                }
            }
            out.add_column(name + "_lag" + std::to_string(k), v, mask);
        }
    }
    return out;
}

FeatureMatrix sqrt_transform(const FeatureMatrix& fm, std::span<const std::string> columns, std::string_view prefix) {
    FeatureMatrix out = fm;
    for (const auto& name : columns) {
        const Index c = fm.col(name);
        Vector v = fm.values.col(c);
        for (Index r = 0; r < v.size(); ++r) {
            if (fm.missing(r, c)) continue;
            if (v[r] < 0.0) {
                const auto& key = fm.keys[static_cast<std::size_t>(r)];
                throw std::domain_error("sqrt_transform: negative value " + std::to_string(v[r]) + " in column '" + name +
                                        "' at (" + fm.entities.at(static_cast<std::size_t>(key.entity)) + ", " +
                                        key.date.to_string() + ")");
            }
            v[r] = std::sqrt(v[r]);
        }
        if (prefix.empty()) {
            out.values.col(c) = v;
        } else {
            out.add_column(std::string(prefix) + name, v, fm.missing.col(c));
        }
    }
    return out;
}

FeatureMatrix apply_dummies(const FeatureMatrix& fm, std::span<const DummyCalendar> calendars) {
    std::set<std::string> seen;
    for (const auto& cal : calendars)
        if (!seen.insert(cal.name).second) throw std::invalid_argument("duplicate dummy name '" + cal.name + "'");

    FeatureMatrix out = fm;
    for (const auto& cal : calendars) {
        Vector v(fm.rows());
        for (Index r = 0; r < fm.rows(); ++r)
            v[r] = cal.active_dates.contains(fm.keys[static_cast<std::size_t>(r)].date) ? 1.0 : 0.0;
        out.add_column(cal.name, v);
    }
    return out;
}

FeatureMatrix filter_rows(const FeatureMatrix& fm, const std::function<bool(const RowKey&)>& keep) {
    std::vector<Index> rows;
    for (Index r = 0; r < fm.rows(); ++r)
        if (keep(fm.keys[static_cast<std::size_t>(r)])) rows.push_back(r);
    FeatureMatrix out;
    out.entities = fm.entities;
    out.names = fm.names;
    out.values = fm.values(rows, Eigen::all);
    out.missing = fm.missing(rows, Eigen::all);
    for (Index r : rows) out.keys.push_back(fm.keys[static_cast<std::size_t>(r)]);
    return out;
}

Design assemble_design(const FeatureMatrix& fm, std::string_view response, std::span<const std::string> predictors,
                       DesignOptions options) {
    std::vector<Index> cols;
    cols.push_back(fm.col(response));
    for (const auto& p : predictors) cols.push_back(fm.col(p));

    std::vector<Index> rows;
    for (Index r = 0; r < fm.rows(); ++r) {
        bool any_missing = false;
        for (Index c : cols) any_missing = any_missing || fm.missing(r, c);
        if (!any_missing) {
            rows.push_back(r);
        } else if (!options.drop_missing) {
            throw std::invalid_argument("assemble_design: row " + std::to_string(r) +
                                        " has masked cells and drop_missing is off");
        }
    }
    if (rows.empty()) throw std::invalid_argument("assemble_design: no usable rows");

    Design d;
    const Index n = static_cast<Index>(rows.size());
    const Index offset = options.add_intercept ? 1 : 0;
    d.y = fm.values(rows, cols.front());
    d.X.resize(n, offset + static_cast<Index>(predictors.size()));
    if (options.add_intercept) {
        d.X.col(0).setOnes();
        d.column_names.push_back("const");
    }
    for (std::size_t j = 0; j < predictors.size(); ++j) {
        d.X.col(offset + static_cast<Index>(j)) = fm.values(rows, cols[j + 1]);
        d.column_names.push_back(predictors[j]);
    }
    for (Index r : rows) d.keys.push_back(fm.keys[static_cast<std::size_t>(r)]);
    return d;
}

}  // namespace backfire::features
