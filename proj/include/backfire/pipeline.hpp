#pragma once

#include "backfire/date.hpp"
#include "backfire/event_ingest.hpp"
#include "backfire/forecast_eval.hpp"
#include "backfire/linreg.hpp"
#include "backfire/tree_ensemble.hpp"
#include "backfire/ts_var.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace backfire::pipeline {

using json = nlohmann::ordered_json;

inline const std::vector<std::string> kAllStages = {"pooled", "twfe", "break", "var", "ml"};

struct PanelSettings {
    std::vector<int> lags = {1};
    int trim_leading_days = 0;  ///< days dropped from the start of every panel regression
    linreg::SeKind se_kind = linreg::SeKind::HC1;
    std::vector<std::string> pooled_predictors = {
        "sqrt_local_fatalities_lag1", "sqrt_elsewhere_fatalities", "sqrt_local_events_lag1",
        "sqrt_elsewhere_events",      "days_since_start",          "population_millions"};
    std::vector<std::string> twfe_predictors = {"sqrt_local_fatalities_lag1", "sqrt_local_events_lag1"};
};

struct BreakSettings {
    std::vector<Date> cutoffs = {Date{2024, 7, 16}, Date{2024, 7, 19}};
    std::string interacted = "sqrt_local_fatalities_lag1";
};

enum class DifferenceMode { Auto, Always, Never };

struct VarSettings {
    std::vector<std::string> variables = {"total_fatalities", "total_events"};
    int p_max = 10;
    std::optional<int> lag_order;
    int horizon = 10;
    int bootstrap = 1000;
    std::optional<std::uint64_t> seed;
    ts::Identification identification = ts::Identification::NonOrthogonal;
    ts::AdfRegression adf_regression = ts::AdfRegression::Constant;
    DifferenceMode difference = DifferenceMode::Auto;
};

struct MlSettings {
    std::vector<std::string> levels = {"national"};  ///< "national" and/or "division"
    std::vector<int> lags = {1, 2};
    int n_min = 30;
    std::optional<std::uint64_t> seed;
    trees::ForestParams forest;
    trees::BoostParams boost;
};

struct PipelineConfig {
    std::filesystem::path input;
    ingest::SchemaConfig columns;
    DateWindow window{Date{2024, 6, 1}, Date{2024, 8, 5}};
    std::vector<std::string> divisions;
    std::map<std::string, double> population;
    std::set<std::string> mobilization_types;
    std::set<std::string> excluded_sub_event_types;
    std::vector<DummyCalendar> dummies;
    std::vector<std::string> stages = kAllStages;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    PanelSettings panel;
    BreakSettings breaks;
    VarSettings var;
    MlSettings ml;
    std::filesystem::path output_dir = "out";

    [[nodiscard]] bool enabled(std::string_view stage) const;
    [[nodiscard]] std::uint64_t var_seed() const { return var.seed.value_or(seed.value_or(0)); }
    [[nodiscard]] std::uint64_t ml_seed() const { return ml.seed.value_or(seed.value_or(0)); }
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Throws ConfigError listing every violation found.
PipelineConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Resolved configuration, sufficient to reproduce a run.
json config_to_json(const PipelineConfig& config);

/// Checks cross-field constraints (dates, seeds, stage names). Returns the
/// list of violations.
std::vector<std::string> validate(const PipelineConfig& config);

struct IrfTable {
    std::vector<std::string> variables;
    ts::IrfResult irf;
};

struct PipelineResult {
    json report;
    std::optional<ingest::NationalDailySeries> national;
    std::optional<IrfTable> irf;
    std::map<std::string, trees::ImportanceTable> importance;  ///< keyed by "forest"/"boost" and level
    std::vector<forecast::ForecastRun> forecasts;
    bool any_stage_failed = false;
};

using Logger = std::function<void(std::string_view level, std::string_view message)>;

/// Runs the enabled stages in order. A failing stage is recorded in the
/// report with its diagnostic and later stages still run.
PipelineResult run_pipeline(const PipelineConfig& config, const Logger& log = {});

/// Writes irf.csv, importance.csv, timeline.csv and forecast CSVs for the
/// stages that produced them, lists them under report["files"] and appends a
/// warning for every plot file that had to be skipped.
void emit_plot_data(PipelineResult& result, const std::filesystem::path& out_dir);

/// Report text: two-space indented JSON with reals at 6 significant digits.
std::string render_report(const json& report);

/// Rounds every floating-point value in the document to 6 significant digits.
json round_reals(const json& doc);

// Serializers shared by the report and the tests.
json to_json(const linreg::OlsFit& fit, const std::vector<std::string>& names);
json to_json(const ts::AdfResult& adf);
json to_json(const forecast::Metrics& m);
json to_json(const trees::ImportanceTable& table);

std::string irf_csv(const IrfTable& table);
std::string importance_csv(const trees::ImportanceTable& table);
std::string timeline_csv(const ingest::NationalDailySeries& series);

}  // namespace backfire::pipeline
