#include "backfire/pipeline.hpp"

#include "backfire/count_glm.hpp"
#include "backfire/feature_lab.hpp"
#include "backfire/panel_fe.hpp"

#include <fstream>
#include <sstream>

namespace backfire::pipeline {

namespace {

using features::FeatureMatrix;

const std::vector<std::string> kPanelCounts = {"local_events", "local_fatalities", "elsewhere_events",
                                               "elsewhere_fatalities"};

struct Context {
    const PipelineConfig& config;
    const Logger& log;
    json& warnings;

    void info(const std::string& msg) const {
        if (log) log("info", msg);
    }
    void warn(const std::string& msg) const {
        warnings.push_back(msg);
        if (log) log("warn", msg);
    }
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("input: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<int> entity_ids(const std::vector<features::RowKey>& keys) {
    std::vector<int> ids;
    ids.reserve(keys.size());
    for (const auto& k : keys) ids.push_back(k.entity);
    return ids;
}

FeatureMatrix panel_features(const ingest::DivisionDayPanel& panel, const PanelSettings& settings) {
    FeatureMatrix fm = features::from_panel(panel);
    fm = features::sqrt_transform(fm, kPanelCounts, "sqrt_");
    const std::vector<std::string> lagged = {"sqrt_local_fatalities", "sqrt_local_events", "local_fatalities",
                                             "local_events"};
    fm = features::add_lags(fm, lagged, settings.lags);
    if (settings.trim_leading_days > 0) {
        const Date first = panel.dates.front() + settings.trim_leading_days;
        fm = features::filter_rows(fm, [first](const features::RowKey& k) { return k.date >= first; });
    }
    return fm;
}

json negbin_json(const glm::CountFit& fit, const std::vector<std::string>& names) {
    json terms = json::object();
    for (Index j = 0; j < fit.coefficients.size(); ++j)
        terms[names[static_cast<std::size_t>(j)]] = {{"coef", fit.coefficients[j]},
                                                     {"se", fit.std_errors[j]},
                                                     {"p", fit.p_values[j]},
                                                     {"irr", fit.irr[j]},
                                                     {"irr_ci95", json::array({fit.irr_ci_lower[j], fit.irr_ci_upper[j]})}};
    json j;
    j["family"] = fit.family;
    j["se_kind"] = "observed-information";
    j["n"] = fit.n;
    j["alpha"] = fit.alpha;
    j["alpha_se"] = fit.alpha_se;
    j["alpha_at_boundary"] = fit.alpha_at_boundary;
    j["log_likelihood"] = fit.log_likelihood;
    j["null_log_likelihood"] = fit.null_log_likelihood;
    j["pseudo_r2"] = {{"kind", "mcfadden"}, {"value", fit.pseudo_r2_mcfadden}};
    j["lr_vs_poisson"] = {{"statistic", fit.lr_vs_poisson},
                          {"p", fit.lr_vs_poisson_p},
                          {"reference", "boundary mixture 0.5 chi2(0) + 0.5 chi2(1)"}};
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["terms"] = terms;
    return j;
}

json twfe_json(const panel::TwfeFit& fit, std::string_view response) {
    json j = to_json(fit.ols, fit.names);
    j["response"] = response;
    j["fixed_effects"] = "entity+date";
    j["n_entities"] = fit.n_entities;
    j["n_periods"] = fit.n_periods;
    j["within_r2"] = fit.within_r2;
    json absorbed = json::array();
    for (const auto& a : fit.absorbed) absorbed.push_back({{"column", a.column}, {"reason", panel::to_string(a.reason)}});
    j["absorbed"] = absorbed;
    j["warnings"] = fit.warnings;
    j.erase("r2");
    j.erase("adj_r2");
    return j;
}

json stage_failed(const std::exception& e) { return {{"status", "failed"}, {"error", e.what()}}; }

// ---------------------------------------------------------------------------

json run_pooled(const Context& ctx, const FeatureMatrix& fm) {
    const auto& s = ctx.config.panel;
    json block;
    block["status"] = "ok";
    block["response"] = "sqrt_local_events";
    const auto d = features::assemble_design(fm, "sqrt_local_events", s.pooled_predictors, {.add_intercept = true});
    const auto clusters = entity_ids(d.keys);
    linreg::OlsOptions opt;
    opt.se_kind = s.se_kind;
    opt.clusters = clusters;
    const auto ols = linreg::fit_ols(d.y, d.X, opt, d.column_names);
    block["ols"] = to_json(ols, d.column_names);

    const auto vif = linreg::vif(d.X.rightCols(d.X.cols() - 1), s.pooled_predictors);
    json vif_block = json::object();
    for (std::size_t j = 0; j < vif.labels.size(); ++j) vif_block[vif.labels[j]] = vif.vif[static_cast<Index>(j)];
    block["vif"] = {{"values", vif_block}, {"max", vif.max()}};
    if (vif.max() > 10.0) ctx.warn("pooled: maximum VIF " + std::to_string(vif.max()) + " exceeds 10");

    try {
        const auto dc = features::assemble_design(fm, "local_events", s.pooled_predictors, {.add_intercept = true});
        const auto nb = glm::fit_negbin(dc.y, dc.X);
        block["negbin"] = negbin_json(nb, dc.column_names);
        block["negbin"]["response"] = "local_events";
    } catch (const std::exception& e) {
        block["status"] = "failed";
        block["error"] = std::string("negative binomial: ") + e.what();
    }
    return block;
}

json run_twfe(const Context& ctx, const FeatureMatrix& fm) {
    panel::TwfeOptions opt;
    opt.se_kind = ctx.config.panel.se_kind;
    const auto fit = panel::fit_twfe(fm, "sqrt_local_events", ctx.config.panel.twfe_predictors, opt);
    for (const auto& w : fit.warnings) ctx.warn("twfe: " + w);
    json out = {{"status", "ok"}};
    out.update(twfe_json(fit, "sqrt_local_events"));
    return out;
}

json run_breaks(const Context& ctx, const FeatureMatrix& fm, bool& failed) {
    const auto& cfg = ctx.config;
    panel::TwfeOptions opt;
    opt.se_kind = cfg.panel.se_kind;
    json fits = json::array();
    for (Date cutoff : cfg.breaks.cutoffs) {
        json f;
        f["cutoff"] = cutoff.to_string();
        try {
            const auto b = panel::fit_structural_break(fm, "sqrt_local_events", cfg.panel.twfe_predictors,
                                                       {cutoff, cfg.breaks.interacted}, opt);
            for (const auto& w : b.twfe.warnings) ctx.warn("break " + cutoff.to_string() + ": " + w);
            f["status"] = "ok";
            f["interaction_name"] = b.interaction_name;
            auto coef_block = [&](const std::string& name) -> json {
                if (!b.twfe.estimated(name)) return nullptr;
                const Index i = b.twfe.index_of(name);
                return {{"coef", b.twfe.ols.coefficients[i]},
                        {"se", b.twfe.ols.std_errors[i]},
                        {"p", b.twfe.ols.p_values[i]}};
            };
            f["pre_break_effect"] = coef_block(cfg.breaks.interacted);
            f["interaction"] = coef_block(b.interaction_name);
            f["post_break_effect"] = {{"coef", b.total_effect}, {"se", b.total_se}, {"p", b.total_p}};
            f["twfe"] = twfe_json(b.twfe, "sqrt_local_events");
        } catch (const std::exception& e) {
            failed = true;
            f["status"] = "failed";
            f["error"] = e.what();
        }
        fits.push_back(f);
    }
    return {{"status", failed ? "failed" : "ok"}, {"interacted", cfg.breaks.interacted}, {"fits", fits}};
}

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

json run_var(const Context& ctx, const ingest::NationalDailySeries& series, std::optional<IrfTable>& irf_out) {
    const auto& v = ctx.config.var;
    const FeatureMatrix nat = features::from_national(series);
    Matrix levels(nat.rows(), static_cast<Index>(v.variables.size()));
    for (std::size_t j = 0; j < v.variables.size(); ++j) levels.col(static_cast<Index>(j)) = nat.column(v.variables[j]);

    json block;
    block["status"] = "ok";
    block["variables"] = v.variables;
    json adf = json::object();
    bool nonstationary = false;
    for (std::size_t j = 0; j < v.variables.size(); ++j) {
        const Vector col = levels.col(static_cast<Index>(j));
        const auto r = ts::adf_test(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                                    v.adf_regression);
        adf[v.variables[j]] = to_json(r);
        nonstationary = nonstationary || !r.reject_5pct;
    }
    block["adf"] = adf;
    const bool diff = v.difference == DifferenceMode::Always || (v.difference == DifferenceMode::Auto && nonstationary);
    block["differenced"] = diff;
    const Matrix data = diff ? Matrix(levels.bottomRows(levels.rows() - 1) - levels.topRows(levels.rows() - 1)) : levels;

    int p = 0;
    if (v.lag_order) {
        p = *v.lag_order;
        block["lag_selection"] = {{"method", "fixed"}, {"p", p}};
    } else {
        const auto sel = ts::select_lag_aic(data, v.p_max);
        p = sel.best;
        block["lag_selection"] = {{"method", "aic"},
                                  {"formula", "ln det(Sigma_ml) + 2 (m^2 p + m) / n_eff"},
                                  {"p_max", v.p_max},
                                  {"aic", sel.aic},
                                  {"p", p}};
    }

    const auto model = ts::fit_var(data, p);
    for (const auto& w : model.warnings) ctx.warn("var: " + w);
    json A = json::array();
    for (const auto& a : model.A) A.push_back(matrix_json(a));
    block["model"] = {{"p", model.p},
                      {"n_eff", model.n_eff},
                      {"intercept", std::vector<double>(model.intercept.begin(), model.intercept.end())},
                      {"A", A},
                      {"sigma", matrix_json(model.sigma)},
                      {"aic", model.aic},
                      {"spectral_radius", model.spectral_radius},
                      {"stable", model.stable}};

    std::optional<ts::BootstrapSpec> boot;
    if (v.bootstrap > 0) boot = ts::BootstrapSpec{v.bootstrap, ctx.config.var_seed()};
    auto irf = ts::impulse_response(model, v.horizon, ts::ShockScale::OneSd, v.identification, boot);
    for (const auto& w : irf.warnings) ctx.warn("irf: " + w);
    json responses = json::array();
    for (int k = 0; k < irf.m; ++k)
        for (int j = 0; j < irf.m; ++j) {
            json point = json::array();
            json lo = json::array();
            json hi = json::array();
            for (int h = 0; h <= irf.horizon; ++h) {
                const auto hh = static_cast<std::size_t>(h);
                point.push_back(irf.point[hh](j, k));
                if (!irf.lower.empty()) {
                    lo.push_back(irf.lower[hh](j, k));
                    hi.push_back(irf.upper[hh](j, k));
                }
            }
            responses.push_back({{"shock", v.variables[static_cast<std::size_t>(k)]},
                                 {"response", v.variables[static_cast<std::size_t>(j)]},
                                 {"point", point},
                                 {"lo95", lo},
                                 {"hi95", hi}});
        }
    block["irf"] = {{"identification", ts::to_string(irf.identification)},
                    {"shock_scale", ts::to_string(irf.shock_scale)},
                    {"method", irf.method},
                    {"band", irf.method == "bootstrap" ? "percentile 95%" : "none"},
                    {"replicates", v.bootstrap},
                    {"replicates_used", irf.replicates_used},
                    {"horizon", irf.horizon},
                    {"responses", responses}};
    std::vector<std::string> labels;
    for (const auto& name : v.variables) labels.push_back(diff ? "d_" + name : name);
    irf_out = IrfTable{labels, std::move(irf)};
    return block;
}

struct MlData {
    features::Design design;
    std::vector<Date> dates;
    std::vector<std::string> entities;
};

MlData ml_design(const FeatureMatrix& fm, const std::string& target, const std::vector<std::string>& lagged,
                 const std::vector<std::string>& contemporaneous, const std::vector<int>& lags) {
    const FeatureMatrix withlags = features::add_lags(fm, lagged, lags);
    std::vector<std::string> predictors;
    for (const auto& name : lagged)
        for (int k : lags) predictors.push_back(name + "_lag" + std::to_string(k));
    predictors.insert(predictors.end(), contemporaneous.begin(), contemporaneous.end());
    MlData out;
    out.design = features::assemble_design(withlags, target, predictors);
    for (const auto& key : out.design.keys) {
        out.dates.push_back(key.date);
        out.entities.push_back(fm.entities[static_cast<std::size_t>(key.entity)]);
    }
    return out;
}

json run_ml_level(const Context& ctx, const std::string& level, const MlData& data, PipelineResult& result) {
    const auto& ml = ctx.config.ml;
    const auto& names = data.design.column_names;
    const auto seed = ctx.config.ml_seed();

    trees::ForestParams fp = ml.forest;
    fp.threads = 1;
    trees::BoostParams bp = ml.boost;

    forecast::WalkForwardOptions wf;
    wf.n_min = ml.n_min;
    wf.threads = ctx.config.threads;

    json block;
    block["status"] = "ok";
    block["target"] = level == "national" ? "total_events" : "local_events";
    block["n_rows"] = data.design.y.size();
    block["features"] = names;
    block["n_min"] = ml.n_min;
    block["validation"] = "walk-forward, expanding window, one step ahead";

    const auto groups = trees::lag_groups(names);
    const std::string suffix = level == "national" ? "" : "_" + level;
    for (const std::string model : {"forest", "boost"}) {
        ctx.info("ml " + level + ": walk-forward " + model);
        wf.model_id = model;
        const forecast::ModelFactory factory = model == "forest"
                                                   ? forecast::make_factory<forecast::ForestRegressor>(fp, seed)
                                                   : forecast::make_factory<forecast::BoostRegressor>(bp, seed);
        forecast::ForecastRun run =
            level == "national"
                ? forecast::walk_forward(data.design.X, data.design.y, data.dates, factory, wf)
                : forecast::walk_forward_panel(data.design.X, data.design.y, data.dates, data.entities, factory, wf);

        trees::ImportanceTable importance;
        if (model == "forest") {
            trees::ForestParams full = ml.forest;
            full.threads = ctx.config.threads;
            importance = trees::feature_importance(trees::fit_forest(data.design.X, data.design.y, full, seed, names),
                                                   groups);
        } else {
            importance =
                trees::feature_importance(trees::fit_boost(data.design.X, data.design.y, bp, seed, names), groups);
        }
        block[model] = {{"folds", run.folds},
                        {"metrics", to_json(run.metrics)},
                        {"importance_kind", "split-gain, lag-aggregated"},
                        {"importance", to_json(importance)}};
        result.importance[model + suffix] = std::move(importance);
        result.forecasts.push_back(std::move(run));
    }
    return block;
}

json run_ml(const Context& ctx, const std::optional<ingest::NationalDailySeries>& national,
            const std::optional<ingest::DivisionDayPanel>& panel, PipelineResult& result, bool& failed) {
    json levels = json::object();
    for (const auto& level : ctx.config.ml.levels) {
        try {
            if (level == "national") {
                if (!national) throw Error("national series unavailable");
                const FeatureMatrix fm = features::from_national(*national);
                std::vector<std::string> lagged;
                std::vector<std::string> calendar;
                for (const auto& name : fm.names)
                    (national->dummies.contains(name) ? calendar : lagged).push_back(name);
                levels[level] = run_ml_level(ctx, level, ml_design(fm, "total_events", lagged, calendar, ctx.config.ml.lags),
                                             result);
            } else {
                if (!panel) throw Error("division panel unavailable");
                const FeatureMatrix fm = features::from_panel(*panel);
                levels[level] = run_ml_level(
                    ctx, level, ml_design(fm, "local_events", kPanelCounts, {"population_millions"}, ctx.config.ml.lags),
                    result);
            }
        } catch (const std::exception& e) {
            failed = true;
            levels[level] = stage_failed(e);
        }
    }
    return {{"status", failed ? "failed" : "ok"}, {"levels", levels}};
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const Logger& log) {
    if (auto problems = validate(config); !problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }

    PipelineResult result;
    json& report = result.report;
    report["toolkit"] = {{"name", "backfire"}, {"version", kVersion}};
    report["config"] = config_to_json(config);
    report["warnings"] = json::array();
    json warnings = json::array();
    const Context ctx{config, log, warnings};

    std::optional<ingest::DivisionDayPanel> panel;
    std::string panel_error;
    if (!config.stages.empty()) {
        const std::string text = read_file(config.input);
        const auto parsed = ingest::parse_events(text, config.columns, config.window);
        ingest::AggregationRules rules;
        rules.window = config.window;
        rules.mobilization_types = config.mobilization_types;
        rules.excluded_sub_event_types = config.excluded_sub_event_types;
        result.national = ingest::build_national_series(parsed.records, rules, config.dummies);

        json data;
        data["input"] = config.input.filename().string();
        data["records"] = parsed.records.size();
        data["row_errors"] = parsed.row_errors.size();
        json samples = json::array();
        for (std::size_t i = 0; i < parsed.row_errors.size() && i < 5; ++i)
            samples.push_back("line " + std::to_string(parsed.row_errors[i].line) + ": " + parsed.row_errors[i].message);
        data["row_error_samples"] = samples;
        data["dropped_outside_window"] = parsed.dropped_outside_window;
        data["days"] = result.national->size();
        if (!parsed.row_errors.empty())
            ctx.warn("ingest: " + std::to_string(parsed.row_errors.size()) + " malformed rows skipped");
        if (parsed.dropped_outside_window > 0)
            ctx.warn("ingest: " + std::to_string(parsed.dropped_outside_window) + " rows outside the window dropped");

        try {
            panel = ingest::build_division_panel(parsed.records, rules, config.divisions, config.population);
            data["divisions"] = panel->divisions.size();
            data["panel_rows"] = panel->rows();
        } catch (const std::exception& e) {
            panel_error = e.what();
            data["panel_error"] = panel_error;
            ctx.warn(std::string("ingest: division panel unavailable: ") + e.what());
        }
        report["data"] = data;
    }

    json stages = json::object();
    auto mark = [&](const std::string& name, json block) {
        if (block.value("status", "ok") != "ok") {
            result.any_stage_failed = true;
            ctx.warn(name + " stage failed: " + block.value("error", std::string("see report")));
        }
        ctx.info("stage " + name + ": " + block.value("status", std::string("ok")));
        stages[name] = std::move(block);
    };

    std::optional<FeatureMatrix> panel_fm;
    std::string panel_fm_error = panel_error;
    if (panel && (config.enabled("pooled") || config.enabled("twfe") || config.enabled("break"))) {
        try {
            panel_fm = panel_features(*panel, config.panel);
        } catch (const std::exception& e) {
            panel_fm_error = e.what();
        }
    }
    auto with_panel = [&](const std::string& name, auto&& fn) {
        if (!config.enabled(name)) return;
        try {
            if (!panel_fm) throw Error("panel features unavailable: " + panel_fm_error);
            mark(name, fn(*panel_fm));
        } catch (const std::exception& e) {
            mark(name, stage_failed(e));
        }
    };

    with_panel("pooled", [&](const FeatureMatrix& fm) { return run_pooled(ctx, fm); });
    with_panel("twfe", [&](const FeatureMatrix& fm) { return run_twfe(ctx, fm); });
    with_panel("break", [&](const FeatureMatrix& fm) {
        bool failed = false;
        json block = run_breaks(ctx, fm, failed);
        if (failed) block["error"] = "one or more cutoffs failed";
        return block;
    });
    if (config.enabled("var")) {
        try {
            mark("var", run_var(ctx, *result.national, result.irf));
        } catch (const std::exception& e) {
            result.irf.reset();
            mark("var", stage_failed(e));
        }
    }
    if (config.enabled("ml")) {
        bool failed = false;
        json block = run_ml(ctx, result.national, panel, result, failed);
        if (failed) block["error"] = "one or more levels failed";
        mark("ml", block);
    }

    report["stages"] = stages;
    report["warnings"] = warnings;
    return result;
}

void emit_plot_data(PipelineResult& result, const std::filesystem::path& out_dir) {
    json files = json::object();
    json& warnings = result.report["warnings"];
    if (!warnings.is_array()) warnings = json::array();
    bool dir_ready = false;
    auto write = [&](const std::string& name, const std::string& content) {
        if (!dir_ready) {
            std::filesystem::create_directories(out_dir);
            dir_ready = true;
        }
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (out_dir / name).string());
        out << content;
        files[name] = name;
    };

    if (result.national) write("timeline.csv", timeline_csv(*result.national));
    if (result.irf) {
        write("irf.csv", irf_csv(*result.irf));
    } else {
        warnings.push_back("plot data: irf.csv skipped, no impulse responses were computed");
    }
    if (result.importance.contains("forest") || result.importance.contains("boost")) {
        const bool has_forest = result.importance.contains("forest");
        write("importance.csv", importance_csv(result.importance.at(has_forest ? "forest" : "boost")));
        for (const auto& [key, table] : result.importance)
            if (has_forest ? key != "forest" : key != "boost") write("importance_" + key + ".csv", importance_csv(table));
    } else if (!result.importance.empty()) {
        for (const auto& [key, table] : result.importance) write("importance_" + key + ".csv", importance_csv(table));
    } else {
        warnings.push_back("plot data: importance.csv skipped, no ensemble models were fitted");
    }
    for (const auto& run : result.forecasts)
        write("forecast_" + run.model_id + "_" + run.level + ".csv", forecast::to_csv(run));
    result.report["files"] = files;
}

}  // namespace backfire::pipeline
