#include "backfire/panel_fe.hpp"

#include "backfire/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace backfire::panel {

namespace {

struct PanelIndex {
    std::vector<Index> rows;  // rows of the source matrix in use
    std::vector<int> entity;
    std::vector<int> period;
    int n_entities = 0;
    int n_periods = 0;
};

PanelIndex index_rows(const features::FeatureMatrix& fm, const std::vector<Index>& cols) {
    PanelIndex idx;
    std::map<int, int> entity_ids;
    std::map<Date, int> period_ids;
    for (Index r = 0; r < fm.rows(); ++r) {
        bool ok = true;
        for (Index c : cols) ok = ok && !fm.missing(r, c);
        if (!ok) continue;
        idx.rows.push_back(r);
        entity_ids.emplace(fm.keys[static_cast<std::size_t>(r)].entity, 0);
        period_ids.emplace(fm.keys[static_cast<std::size_t>(r)].date, 0);
    }
    int next = 0;
    for (auto& [k, v] : entity_ids) v = next++;
    next = 0;
    for (auto& [k, v] : period_ids) v = next++;
    idx.n_entities = static_cast<int>(entity_ids.size());
    idx.n_periods = static_cast<int>(period_ids.size());
    if (idx.n_entities < 2) throw Error("fixed effects need at least two entities");
    if (idx.n_periods < 2) throw Error("fixed effects need at least two periods");
    for (Index r : idx.rows) {
        const auto& key = fm.keys[static_cast<std::size_t>(r)];
        idx.entity.push_back(entity_ids.at(key.entity));
        idx.period.push_back(period_ids.at(key.date));
    }
    return idx;
}

// True when the column takes one value within every group.
bool constant_within(const Vector& v, std::span<const int> group, int n_groups) {
    Vector lo = Vector::Constant(n_groups, std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(n_groups, -std::numeric_limits<double>::infinity());
    for (Index r = 0; r < v.size(); ++r) {
        const int g = group[static_cast<std::size_t>(r)];
        lo[g] = std::min(lo[g], v[r]);
        hi[g] = std::max(hi[g], v[r]);
    }
    const double tol = 1e-12 * std::max(1.0, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    for (Index g = 0; g < n_groups; ++g)
        if (hi[g] - lo[g] > tol) return false;
    return true;
}

}  // namespace

std::string_view to_string(AbsorbReason reason) {
    switch (reason) {
        case AbsorbReason::EntityConstant: return "entity-constant";
        case AbsorbReason::TimeConstant: return "time-constant";
        case AbsorbReason::Collinear: return "collinear";
    }
    return "unknown";
}

features::FeatureMatrix within_transform(const features::FeatureMatrix& fm, std::span<const std::string> columns) {
    std::vector<Index> cols;
    for (const auto& c : columns) cols.push_back(fm.col(c));
    const PanelIndex idx = index_rows(fm, cols);

    features::FeatureMatrix out;
    out.entities = fm.entities;
    out.names = fm.names;
    out.values = fm.values(idx.rows, Eigen::all);
    out.missing = fm.missing(idx.rows, Eigen::all);
    for (Index r : idx.rows) out.keys.push_back(fm.keys[static_cast<std::size_t>(r)]);

    const Matrix raw = out.values(Eigen::all, cols);
    const Matrix demeaned = two_way_demean(raw, idx.entity, idx.period, idx.n_entities, idx.n_periods);
    out.values(Eigen::all, cols) = demeaned;
    return out;
}

bool TwfeFit::estimated(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

Index TwfeFit::index_of(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("predictor '" + std::string(name) + "' was not estimated");
    return static_cast<Index>(it - names.begin());
}

TwfeFit fit_twfe(const features::FeatureMatrix& fm, std::string_view response, std::span<const std::string> predictors,
                 const TwfeOptions& options) {
    std::vector<Index> cols{fm.col(response)};
    for (const auto& p : predictors) cols.push_back(fm.col(p));
    const PanelIndex idx = index_rows(fm, cols);

    TwfeFit fit;
    fit.n_entities = idx.n_entities;
    fit.n_periods = idx.n_periods;
    fit.n_obs = static_cast<Index>(idx.rows.size());

    // Raw-scale absorption: constant within entity, or within date.
    std::vector<std::string> candidates;
    for (const auto& p : predictors) {
        const Vector v = fm.values(idx.rows, fm.col(p));
        if (constant_within(v, idx.entity, idx.n_entities)) {
            fit.absorbed.push_back({p, AbsorbReason::EntityConstant});
        } else if (constant_within(v, idx.period, idx.n_periods)) {
            fit.absorbed.push_back({p, AbsorbReason::TimeConstant});
        } else {
            candidates.push_back(p);
        }
    }

    // Priority order for the collinearity sweep.
    std::vector<std::string> order;
    for (const auto& p : options.keep_first)
        if (std::find(candidates.begin(), candidates.end(), p) != candidates.end()) order.push_back(p);
    for (const auto& p : candidates)
        if (std::find(order.begin(), order.end(), p) == order.end()) order.push_back(p);

    std::vector<Index> all_cols{fm.col(response)};
    for (const auto& p : order) all_cols.push_back(fm.col(p));
    const Matrix raw = fm.values(idx.rows, all_cols);
    const Matrix dm = two_way_demean(raw, idx.entity, idx.period, idx.n_entities, idx.n_periods, options.demean_tol);

    // Greedy: keep a column unless it is (numerically) spanned by those kept.
    std::vector<Index> kept;
    std::vector<std::string> kept_names;
    for (std::size_t j = 0; j < order.size(); ++j) {
        const Index c = static_cast<Index>(j) + 1;
        const Vector v = dm.col(c);
        const double raw_norm = raw.col(c).norm();
        double resid = v.norm();
        if (!kept.empty() && resid > 0.0) {
            const Matrix K = dm(Eigen::all, kept);
            const Vector b = K.colPivHouseholderQr().solve(v);
            resid = (v - K * b).norm();
        }
        if (resid <= 1e-8 * std::max(1.0, raw_norm)) {
            fit.absorbed.push_back({order[j], AbsorbReason::Collinear});
            continue;
        }
        kept.push_back(c);
        kept_names.push_back(order[j]);
    }
    if (kept.empty()) throw Error("nothing to estimate: every predictor is absorbed by the fixed effects");

    // Report in the caller's predictor order.
    std::vector<Index> final_cols;
    for (const auto& p : predictors) {
        auto it = std::find(kept_names.begin(), kept_names.end(), p);
        if (it == kept_names.end()) continue;
        final_cols.push_back(kept[static_cast<std::size_t>(it - kept_names.begin())]);
        fit.names.push_back(p);
    }
    for (const auto& a : fit.absorbed)
        fit.warnings.push_back("predictor '" + a.column + "' absorbed (" + std::string(to_string(a.reason)) + ")");

    const Vector y = dm.col(0);
    const Matrix X = dm(Eigen::all, final_cols);
    linreg::OlsOptions ols_opts;
    ols_opts.se_kind = options.se_kind;
    ols_opts.clusters = idx.entity;
    ols_opts.absorbed_dof = (idx.n_entities - 1) + (idx.n_periods - 1) + 1;
    fit.ols = linreg::fit_ols(y, X, ols_opts, fit.names);
    const double tss = y.squaredNorm();
    fit.within_r2 = tss > 0.0 ? std::clamp(1.0 - fit.ols.ssr / tss, 0.0, 1.0) : 0.0;
    return fit;
}

BreakFit fit_structural_break(const features::FeatureMatrix& fm, std::string_view response,
                              std::span<const std::string> predictors, const BreakSpec& spec,
                              const TwfeOptions& options) {
    const Index base = fm.col(spec.interacted_column);
    std::vector<std::string> preds(predictors.begin(), predictors.end());
    if (std::find(preds.begin(), preds.end(), spec.interacted_column) == preds.end())
        preds.insert(preds.begin(), spec.interacted_column);

    BreakFit out;
    out.spec = spec;
    out.interaction_name = spec.interacted_column + "_x_post";

    features::FeatureMatrix aug = fm;
    Vector inter(fm.rows());
    bool any_pre = false;
    bool any_post = false;
    for (Index r = 0; r < fm.rows(); ++r) {
        const bool post = fm.keys[static_cast<std::size_t>(r)].date >= spec.cutoff;
        inter[r] = post ? fm.values(r, base) : 0.0;
        if (!fm.missing(r, base)) (post ? any_post : any_pre) = true;
    }
    aug.add_column(out.interaction_name, inter, fm.missing.col(base));
    preds.push_back(out.interaction_name);

    TwfeOptions opts = options;
    opts.keep_first.insert(opts.keep_first.begin(), out.interaction_name);
    out.twfe = fit_twfe(aug, response, preds, opts);

    const bool splits = any_pre && any_post;
    if (!splits) {
        out.twfe.warnings.push_back("cutoff " + spec.cutoff.to_string() + " does not split the sample; " +
                                    (any_post ? "the base slope is absorbed" : "the interaction is absorbed"));
    }
    const bool has_base = out.twfe.estimated(spec.interacted_column);
    const bool has_inter = out.twfe.estimated(out.interaction_name);
    if (splits && !has_inter) {
        std::string reason = "collinear";
        for (const auto& a : out.twfe.absorbed)
            if (a.column == out.interaction_name) reason = std::string(to_string(a.reason));
        throw Error("interaction '" + out.interaction_name + "' is absorbed by the fixed effects (" + reason +
                    "); the break at " + spec.cutoff.to_string() + " is not identified");
    }

    const Matrix& V = out.twfe.ols.covariance;
    double total = 0.0;
    double var = 0.0;
    if (has_base) {
        const Index i = out.twfe.index_of(spec.interacted_column);
        out.pre_effect = out.twfe.ols.coefficients[i];
        out.pre_se = out.twfe.ols.std_errors[i];
        total += *out.pre_effect;
        var += V(i, i);
    }
    if (has_inter) {
        const Index j = out.twfe.index_of(out.interaction_name);
        out.interaction = out.twfe.ols.coefficients[j];
        out.interaction_se = out.twfe.ols.std_errors[j];
        total += *out.interaction;
        var += V(j, j);
        if (has_base) var += 2.0 * V(out.twfe.index_of(spec.interacted_column), j);
    }
    out.total_effect = total;
    out.total_se = std::sqrt(std::max(var, 0.0));
    out.total_p = out.total_se > 0.0
                      ? stats::student_t_two_sided(total / out.total_se, static_cast<double>(out.twfe.ols.df_resid))
                      : 0.0;
    return out;
}

}  // namespace backfire::panel
