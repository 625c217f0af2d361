#include "backfire/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace backfire::pipeline {

namespace {

const std::vector<std::string> kDefaultDivisions = {"Barishal",   "Chattogram", "Dhaka",   "Khulna",
                                                    "Mymensingh", "Rajshahi",   "Rangpur", "Sylhet"};

// Approximate 2022 census counts, millions.
const std::map<std::string, double> kDefaultPopulation = {
    {"Barishal", 9.1},    {"Chattogram", 33.2}, {"Dhaka", 44.2},   {"Khulna", 17.4},
    {"Mymensingh", 12.2}, {"Rajshahi", 20.4},   {"Rangpur", 17.6}, {"Sylhet", 11.0}};

/// Typed access to a JSON object that records problems instead of throwing.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (!obj_.is_object()) fail("", "must be an object");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!obj_.is_object() || !obj_.contains(key) || obj_.at(key).is_null()) return;
        try {
            out = obj_.at(key).template get<T>();
        } catch (const json::exception&) {
            fail(key, "has the wrong type");
        }
    }

    template <typename T>
    void get(const std::string& key, std::optional<T>& out) {
        seen_.insert(key);
        if (!obj_.is_object() || !obj_.contains(key) || obj_.at(key).is_null()) return;
        try {
            out = obj_.at(key).template get<T>();
        } catch (const json::exception&) {
            fail(key, "has the wrong type");
        }
    }

    void date(const std::string& key, Date& out) {
        std::string s;
        get(key, s);
        if (s.empty()) return;
        if (auto d = Date::parse(s)) {
            out = *d;
        } else {
            fail(key, "is not a date: '" + s + "'");
        }
    }

    void dates(const std::string& key, std::vector<Date>& out) {
        std::optional<std::vector<std::string>> items;
        get(key, items);
        if (!items) return;
        out.clear();
        for (const auto& s : *items) {
            if (auto d = Date::parse(s)) {
                out.push_back(*d);
            } else {
                fail(key, "contains a malformed date '" + s + "'");
            }
        }
    }

    template <typename Parse, typename T>
    void parsed(const std::string& key, T& out, Parse parse) {
        std::string s;
        get(key, s);
        if (s.empty()) return;
        try {
            out = parse(s);
        } catch (const std::exception& e) {
            fail(key, e.what());
        }
    }

    Reader child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        const json& sub = obj_.is_object() && obj_.contains(key) ? obj_.at(key) : empty;
        return {sub, path_ + key + ".", errors_};
    }

    void fail(const std::string& key, const std::string& what) { errors_.push_back(path_ + key + ": " + what); }

    ~Reader() {
        if (!obj_.is_object()) return;
        for (const auto& [key, value] : obj_.items())
            if (!seen_.contains(key)) errors_.push_back(path_ + key + ": unknown key");
    }

    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;
    Reader(Reader&&) = delete;

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

DifferenceMode difference_from_string(std::string_view s) {
    if (s == "auto") return DifferenceMode::Auto;
    if (s == "always") return DifferenceMode::Always;
    if (s == "never") return DifferenceMode::Never;
    throw ConfigError("expected auto, always or never");
}

std::string_view to_string(DifferenceMode m) {
    switch (m) {
        case DifferenceMode::Auto: return "auto";
        case DifferenceMode::Always: return "always";
        case DifferenceMode::Never: return "never";
    }
    return "auto";
}

std::vector<std::string> date_strings(const std::vector<Date>& dates) {
    std::vector<std::string> out;
    for (Date d : dates) out.push_back(d.to_string());
    return out;
}

}  // namespace

bool PipelineConfig::enabled(std::string_view stage) const {
    return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

PipelineConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    const ingest::AggregationRules rules_defaults;
    c.divisions = kDefaultDivisions;
    c.population = kDefaultPopulation;
    c.mobilization_types = rules_defaults.mobilization_types;
    c.excluded_sub_event_types = rules_defaults.excluded_sub_event_types;

    std::vector<std::string> errors;
    {
        Reader r(doc, "", errors);
        std::string input;
        r.get("input", input);
        if (input.empty())
            errors.push_back("input: required");
        else
            c.input = base_dir / input;

        {
            Reader cols = r.child("columns");
            cols.get("event_date", c.columns.event_date);
            cols.get("division", c.columns.division);
            cols.get("event_type", c.columns.event_type);
            cols.get("sub_event_type", c.columns.sub_event_type);
            cols.get("fatalities", c.columns.fatalities);
            cols.get("latitude", c.columns.latitude);
            cols.get("longitude", c.columns.longitude);
        }
        {
            Reader w = r.child("window");
            w.date("start", c.window.first);
            w.date("end", c.window.last);
        }
        r.get("divisions", c.divisions);
        r.get("population", c.population);
        r.get("mobilization_types", c.mobilization_types);
        r.get("excluded_sub_event_types", c.excluded_sub_event_types);

        std::optional<json> dummies;
        r.get("dummies", dummies);
        if (dummies) {
            if (!dummies->is_array()) {
                errors.push_back("dummies: must be a list");
            } else {
                for (std::size_t i = 0; i < dummies->size(); ++i) {
                    Reader d((*dummies)[i], "dummies[" + std::to_string(i) + "].", errors);
                    DummyCalendar cal;
                    d.get("name", cal.name);
                    std::vector<Date> active;
                    d.dates("dates", active);
                    cal.active_dates.insert(active.begin(), active.end());
                    if (cal.name.empty()) d.fail("name", "required");
                    c.dummies.push_back(std::move(cal));
                }
            }
        }

        r.get("stages", c.stages);
        r.get("seed", c.seed);
        r.get("threads", c.threads);
        std::string out_dir;
        r.get("output_dir", out_dir);
        if (!out_dir.empty()) c.output_dir = base_dir / out_dir;

        {
            Reader p = r.child("panel");
            p.get("lags", c.panel.lags);
            p.get("trim_leading_days", c.panel.trim_leading_days);
            p.parsed("se_kind", c.panel.se_kind, linreg::se_kind_from_string);
            p.get("pooled_predictors", c.panel.pooled_predictors);
            p.get("twfe_predictors", c.panel.twfe_predictors);
        }
        {
            Reader b = r.child("breaks");
            b.dates("cutoffs", c.breaks.cutoffs);
            b.get("interacted", c.breaks.interacted);
        }
        {
            Reader v = r.child("var");
            v.get("variables", c.var.variables);
            v.get("p_max", c.var.p_max);
            v.get("lag_order", c.var.lag_order);
            v.get("horizon", c.var.horizon);
            v.get("bootstrap", c.var.bootstrap);
            v.get("seed", c.var.seed);
            v.parsed("identification", c.var.identification, ts::identification_from_string);
            v.parsed("adf_regression", c.var.adf_regression, ts::adf_regression_from_string);
            v.parsed("difference", c.var.difference, difference_from_string);
        }
        {
            Reader m = r.child("ml");
            m.get("levels", c.ml.levels);
            m.get("lags", c.ml.lags);
            m.get("n_min", c.ml.n_min);
            m.get("seed", c.ml.seed);
            {
                Reader f = m.child("forest");
                f.get("n_trees", c.ml.forest.n_trees);
                f.get("max_depth", c.ml.forest.max_depth);
                f.get("min_samples_leaf", c.ml.forest.min_samples_leaf);
                f.get("mtry", c.ml.forest.mtry);
            }
            {
                Reader g = m.child("boost");
                g.get("n_trees", c.ml.boost.n_trees);
                g.get("learning_rate", c.ml.boost.learning_rate);
                g.get("max_depth", c.ml.boost.max_depth);
                g.get("min_samples_leaf", c.ml.boost.min_samples_leaf);
            }
        }
    }

    for (auto& e : validate(c)) errors.push_back(std::move(e));
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return c;
}

std::vector<std::string> validate(const PipelineConfig& c) {
    std::vector<std::string> v;
    if (c.window.last < c.window.first) v.push_back("window: end precedes start");
    if (c.divisions.empty()) v.push_back("divisions: empty");
    for (const auto& d : c.divisions)
        if (!c.population.contains(d)) v.push_back("population: no entry for division '" + d + "'");
    if (c.mobilization_types.empty()) v.push_back("mobilization_types: empty");
    for (const auto& s : c.stages)
        if (std::find(kAllStages.begin(), kAllStages.end(), s) == kAllStages.end())
            v.push_back("stages: unknown stage '" + s + "'");
    for (int lag : c.panel.lags)
        if (lag < 1) v.push_back("panel.lags: lags must be positive");
    if (c.panel.trim_leading_days < 0) v.push_back("panel.trim_leading_days: negative");
    if (c.enabled("break")) {
        if (c.breaks.cutoffs.empty()) v.push_back("breaks.cutoffs: empty");
        for (Date d : c.breaks.cutoffs)
            if (!c.window.contains(d)) v.push_back("breaks.cutoffs: " + d.to_string() + " lies outside the window");
    }
    if (c.var.variables.size() < 2) v.push_back("var.variables: need at least two series");
    if (c.var.p_max < 1) v.push_back("var.p_max: must be at least 1");
    if (c.var.lag_order && *c.var.lag_order < 1) v.push_back("var.lag_order: must be at least 1");
    if (c.var.horizon < 0) v.push_back("var.horizon: negative");
    if (c.var.bootstrap < 0) v.push_back("var.bootstrap: negative");
    if (c.enabled("var") && c.var.bootstrap > 0 && !c.var.seed && !c.seed)
        v.push_back("var.seed: required when bootstrap replicates are requested (or set a top-level seed)");
    for (const auto& level : c.ml.levels)
        if (level != "national" && level != "division") v.push_back("ml.levels: unknown level '" + level + "'");
    if (c.ml.levels.empty()) v.push_back("ml.levels: empty");
    for (int lag : c.ml.lags)
        if (lag < 1) v.push_back("ml.lags: lags must be positive");
    if (c.ml.lags.empty()) v.push_back("ml.lags: empty");
    if (c.ml.n_min < 1) v.push_back("ml.n_min: must be at least 1");
    if (c.enabled("ml") && !c.ml.seed && !c.seed) v.push_back("ml.seed: required (or set a top-level seed)");
    if (c.ml.forest.n_trees < 1) v.push_back("ml.forest.n_trees: must be at least 1");
    if (c.ml.forest.min_samples_leaf < 1) v.push_back("ml.forest.min_samples_leaf: must be at least 1");
    if (c.ml.forest.mtry && *c.ml.forest.mtry < 1) v.push_back("ml.forest.mtry: must be at least 1");
    if (c.ml.boost.n_trees < 1) v.push_back("ml.boost.n_trees: must be at least 1");
    if (!(c.ml.boost.learning_rate > 0.0 && c.ml.boost.learning_rate <= 1.0))
        v.push_back("ml.boost.learning_rate: must lie in (0, 1]");
    if (c.ml.boost.min_samples_leaf < 1) v.push_back("ml.boost.min_samples_leaf: must be at least 1");
    return v;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json config_to_json(const PipelineConfig& c) {
    json j;
    j["input"] = c.input.lexically_normal().string();
    j["columns"] = {{"event_date", c.columns.event_date},         {"division", c.columns.division},
                    {"event_type", c.columns.event_type},         {"sub_event_type", c.columns.sub_event_type},
                    {"fatalities", c.columns.fatalities},         {"latitude", c.columns.latitude},
                    {"longitude", c.columns.longitude}};
    j["window"] = {{"start", c.window.first.to_string()}, {"end", c.window.last.to_string()}};
    j["divisions"] = c.divisions;
    json pop = json::object();
    for (const auto& d : c.divisions) pop[d] = c.population.at(d);
    j["population"] = pop;
    j["mobilization_types"] = c.mobilization_types;
    j["excluded_sub_event_types"] = c.excluded_sub_event_types;
    json dummies = json::array();
    for (const auto& cal : c.dummies) {
        std::vector<std::string> dates;
        for (Date d : cal.active_dates) dates.push_back(d.to_string());
        dummies.push_back({{"name", cal.name}, {"dates", dates}});
    }
    j["dummies"] = dummies;
    j["stages"] = c.stages;
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    j["threads"] = c.threads;
    j["panel"] = {{"lags", c.panel.lags},
                  {"trim_leading_days", c.panel.trim_leading_days},
                  {"se_kind", linreg::to_string(c.panel.se_kind)},
                  {"pooled_predictors", c.panel.pooled_predictors},
                  {"twfe_predictors", c.panel.twfe_predictors}};
    j["breaks"] = {{"cutoffs", date_strings(c.breaks.cutoffs)}, {"interacted", c.breaks.interacted}};
    j["var"] = {{"variables", c.var.variables},
                {"p_max", c.var.p_max},
                {"lag_order", c.var.lag_order ? json(*c.var.lag_order) : json(nullptr)},
                {"horizon", c.var.horizon},
                {"bootstrap", c.var.bootstrap},
                {"seed", c.var_seed()},
                {"identification", ts::to_string(c.var.identification)},
                {"adf_regression", ts::to_string(c.var.adf_regression)},
                {"difference", to_string(c.var.difference)}};
    j["ml"] = {{"levels", c.ml.levels},
               {"lags", c.ml.lags},
               {"n_min", c.ml.n_min},
               {"seed", c.ml_seed()},
               {"forest",
                {{"n_trees", c.ml.forest.n_trees},
                 {"max_depth", c.ml.forest.max_depth},
                 {"min_samples_leaf", c.ml.forest.min_samples_leaf},
                 {"mtry", c.ml.forest.mtry ? json(*c.ml.forest.mtry) : json(nullptr)}}},
               {"boost",
                {{"n_trees", c.ml.boost.n_trees},
                 {"learning_rate", c.ml.boost.learning_rate},
                 {"max_depth", c.ml.boost.max_depth},
                 {"min_samples_leaf", c.ml.boost.min_samples_leaf}}}};
    return j;
}

}  // namespace backfire::pipeline
