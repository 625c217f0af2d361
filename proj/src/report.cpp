#include "backfire/csv.hpp"
#include "backfire/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace backfire::pipeline {

namespace {

json round_value(double v) {
    if (!std::isfinite(v)) return nullptr;
    if (v == 0.0) return 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

json pair(double a, double b) { return json::array({a, b}); }

}  // namespace

json round_reals(const json& doc) {
    switch (doc.type()) {
        case json::value_t::number_float: return round_value(doc.get<double>());
        case json::value_t::array: {
            json out = json::array();
            for (const auto& v : doc) out.push_back(round_reals(v));
            return out;
        }
        case json::value_t::object: {
            json out = json::object();
            for (const auto& [k, v] : doc.items()) out[k] = round_reals(v);
            return out;
        }
        default: return doc;
    }
}

std::string render_report(const json& report) { return round_reals(report).dump(2) + "\n"; }

json to_json(const linreg::OlsFit& fit, const std::vector<std::string>& names) {
    json terms = json::object();
    for (Index j = 0; j < fit.coefficients.size(); ++j) {
        const std::string name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                                            : "x" + std::to_string(j);
        terms[name] = {{"coef", fit.coefficients[j]},
                       {"se", fit.std_errors[j]},
                       {"t", fit.t_values[j]},
                       {"p", fit.p_values[j]},
                       {"ci95", pair(fit.ci_lower[j], fit.ci_upper[j])}};
    }
    json j;
    j["se_kind"] = linreg::to_string(fit.se_kind);
    j["n"] = fit.n;
    j["df_resid"] = fit.df_resid;
    if (fit.se_kind == linreg::SeKind::Cluster) j["n_clusters"] = fit.n_clusters;
    j["r2"] = fit.r_squared;
    j["adj_r2"] = fit.adj_r_squared;
    j["terms"] = terms;
    return j;
}

json to_json(const ts::AdfResult& adf) {
    return {{"regression", ts::to_string(adf.regression_kind)},
            {"statistic", adf.test_statistic},
            {"lags_used", adf.lags_used},
            {"n_obs", adf.n_obs},
            {"critical", {{"1%", adf.critical.pct1}, {"5%", adf.critical.pct5}, {"10%", adf.critical.pct10}}},
            {"reject", {{"1%", adf.reject_1pct}, {"5%", adf.reject_5pct}, {"10%", adf.reject_10pct}}}};
}

json to_json(const forecast::Metrics& m) {
    return {{"r2", m.r2_defined ? json(m.r2) : json(nullptr)}, {"mae", m.mae}, {"rmse", m.rmse}};
}

json to_json(const trees::ImportanceTable& table) {
    json out = json::array();
    for (const auto& [name, value] : table) out.push_back({{"feature", name}, {"importance", value}});
    return out;
}

std::string irf_csv(const IrfTable& table) {
    const auto& r = table.irf;
    const bool bands = !r.lower.empty();
    std::string out = "horizon,shock_var,response_var,point,lo95,hi95\n";
    for (int k = 0; k < r.m; ++k)
        for (int j = 0; j < r.m; ++j)
            for (int h = 0; h <= r.horizon; ++h) {
                const auto hh = static_cast<std::size_t>(h);
                out += std::to_string(h) + ',' + csv::escape(table.variables[static_cast<std::size_t>(k)]) + ',' +
                       csv::escape(table.variables[static_cast<std::size_t>(j)]) + ',' +
                       csv::format_double(r.point[hh](j, k)) + ',';
                if (bands) out += csv::format_double(r.lower[hh](j, k)) + ',' + csv::format_double(r.upper[hh](j, k));
                else out += ',';
                out += '\n';
            }
    return out;
}

std::string importance_csv(const trees::ImportanceTable& table) {
    std::string out = "base_feature,importance\n";
    for (const auto& [name, value] : table) out += csv::escape(name) + ',' + csv::format_double(value) + '\n';
    return out;
}

std::string timeline_csv(const ingest::NationalDailySeries& series) {
    std::string out = "date,total_events,total_fatalities\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
        const auto i = static_cast<Index>(t);
        out += series.dates[t].to_string() + ',' + csv::format_double(series.total_events[i]) + ',' +
               csv::format_double(series.total_fatalities[i]) + '\n';
    }
    return out;
}

}  // namespace backfire::pipeline
