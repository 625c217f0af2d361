#include "backfire/synth_oracle.hpp"

#include "backfire/csv.hpp"
#include "backfire/random.hpp"
#include "backfire/ts_var.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace backfire::synth {

using ordered_json = nlohmann::ordered_json;

void PanelDgpSpec::validate() const {
    std::vector<std::string> problems;
    if (n_entities < 2) problems.push_back("n_entities must be at least 2");
    if (n_periods < 2) problems.push_back("n_periods must be at least 2");
    if (!(noise_sd >= 0.0)) problems.push_back("noise_sd must be nonnegative");
    if (!(entity_effect_sd >= 0.0)) problems.push_back("entity_effect_sd must be nonnegative");
    if (!(time_effect_sd >= 0.0)) problems.push_back("time_effect_sd must be nonnegative");
    if (!(regressor_sd > 0.0)) problems.push_back("regressor_sd must be positive");
    if (break_date_index && (*break_date_index < 0 || *break_date_index > n_periods))
        problems.push_back("break_date_index outside 0..n_periods");
    if (problems.empty()) return;
    std::string msg = "invalid panel DGP:";
    for (const auto& p : problems) msg += " " + p + ";";
    msg.pop_back();
    throw ConfigError(msg);
}

PanelSimulation simulate_panel(const PanelDgpSpec& spec) {
    spec.validate();
    const int E = spec.n_entities;
    const int T = spec.n_periods;
    Rng rng_entity = Rng::stream(spec.seed, "panel-entity-effects");
    Rng rng_time = Rng::stream(spec.seed, "panel-time-effects");
    Rng rng_x = Rng::stream(spec.seed, "panel-regressor");
    Rng rng_m = Rng::stream(spec.seed, "panel-momentum");
    Rng rng_e = Rng::stream(spec.seed, "panel-noise");

    PanelTruth truth;
    truth.beta_repression = spec.beta_repression;
    truth.beta_momentum = spec.beta_momentum;
    truth.beta_interaction = spec.break_date_index ? spec.beta_interaction : 0.0;
    if (spec.break_date_index) truth.break_date = spec.start_date + *spec.break_date_index;
    truth.entity_effects.resize(E);
    for (auto& a : truth.entity_effects) a = spec.entity_effect_sd * rng_entity.normal();
    truth.time_effects.resize(T);
    for (auto& g : truth.time_effects) g = spec.time_effect_sd * rng_time.normal();

    const Index n = static_cast<Index>(E) * T;
    Vector y(n);
    Vector x(n);
    Vector m(n);
    features::FeatureMatrix fm;
    for (int i = 0; i < E; ++i) fm.entities.push_back("unit" + std::to_string(i));
    fm.keys.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < E; ++i) {
        for (int t = 0; t < T; ++t) {
            const Index r = static_cast<Index>(i) * T + t;
            const double a = truth.entity_effects[i];
            const double g = truth.time_effects[t];
            const double post = spec.break_date_index && t >= *spec.break_date_index ? 1.0 : 0.0;
            x[r] = spec.regressor_sd * rng_x.normal() + 0.5 * a + 0.5 * g;
            m[r] = rng_m.normal();
            y[r] = spec.beta_repression * x[r] + spec.beta_momentum * m[r] + truth.beta_interaction * x[r] * post + a +
                   g + spec.noise_sd * rng_e.normal();
            fm.keys.push_back({i, spec.start_date + t});
        }
    }
    fm.values.resize(n, 0);
    fm.missing.resize(n, 0);
    fm.add_column("y", y);
    fm.add_column("repression", x);
    fm.add_column("momentum", m);
    return {std::move(fm), std::move(truth)};
}

VarSimulation simulate_var(const VarDgpSpec& spec) {
    const Index m = spec.innovation_cov.rows();
    if (m < 1 || spec.innovation_cov.cols() != m) throw ConfigError("simulate_var: innovation covariance must be square");
    if (spec.A.empty()) throw ConfigError("simulate_var: at least one lag matrix is required");
    for (const auto& A : spec.A)
        if (A.rows() != m || A.cols() != m) throw ConfigError("simulate_var: lag matrices must be m x m");
    if (spec.intercept.size() != 0 && spec.intercept.size() != m)
        throw ConfigError("simulate_var: intercept length differs from m");
    if (spec.n < 1 || spec.burn_in < 0) throw ConfigError("simulate_var: need n >= 1 and burn_in >= 0");
    if (!spec.innovation_cov.isApprox(spec.innovation_cov.transpose()))
        throw ConfigError("simulate_var: innovation covariance is not symmetric");

    const Eigen::SelfAdjointEigenSolver<Matrix> es(spec.innovation_cov);
    const Vector lambda = es.eigenvalues();
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if (lambda.minCoeff() < -1e-10 * scale) throw ConfigError("simulate_var: innovation covariance is not PSD");
    const Matrix S = es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();

    VarSimulation sim;
    const double rho = ts::spectral_radius(ts::companion_matrix(spec.A));
    if (!(rho < 1.0)) sim.warnings.push_back("simulate_var: lag matrices are not stable (spectral radius " +
                                             std::to_string(rho) + ")");

    const int p = static_cast<int>(spec.A.size());
    const Index total = spec.burn_in + spec.n;
    const Vector c = spec.intercept.size() == 0 ? Vector::Zero(m) : spec.intercept;
    Matrix path = Matrix::Zero(p + total, m);
    Rng rng = Rng::stream(spec.seed, "var-innovations");
    Vector z(m);
    for (Index t = 0; t < total; ++t) {
        Vector row = c;
        for (int i = 1; i <= p; ++i) row.noalias() += spec.A[static_cast<std::size_t>(i - 1)] * path.row(p + t - i).transpose();
        for (auto& v : z) v = rng.normal();
        row.noalias() += S * z;
        path.row(p + t) = row.transpose();
    }
    sim.data = path.bottomRows(spec.n);
    return sim;
}

Vector simulate_negbin(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& beta, double alpha,
                       std::uint64_t seed) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("simulate_negbin: alpha must be nonnegative");
    if (X.cols() != beta.size()) throw std::invalid_argument("simulate_negbin: X and beta disagree in width");
    Rng rng = Rng::stream(seed, "negbin");
    Vector y(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        const double mu = std::exp(X.row(i).dot(beta));
        const double lambda = alpha > 0.0 ? rng.gamma(1.0 / alpha, alpha * mu) : mu;
        y[i] = static_cast<double>(rng.poisson(lambda));
    }
    return y;
}

namespace {

struct Coordinates {
    double lat;
    double lon;
};

const std::map<std::string, Coordinates>& division_centres() {
    static const std::map<std::string, Coordinates> centres = {
        {"Barishal", {22.70, 90.37}},   {"Chattogram", {22.36, 91.78}}, {"Dhaka", {23.81, 90.41}},
        {"Khulna", {22.85, 89.54}},     {"Mymensingh", {24.75, 90.41}}, {"Rajshahi", {24.37, 88.60}},
        {"Rangpur", {25.74, 89.28}},    {"Sylhet", {24.89, 91.87}},
    };
    return centres;
}

ingest::EventRecord make_event(Date d, const std::string& division, std::string type, std::string sub, long fat) {
    ingest::EventRecord e;
    e.event_date = d;
    e.division = division;
    e.event_type = std::move(type);
    e.sub_event_type = std::move(sub);
    e.fatalities = fat;
    if (const auto it = division_centres().find(division); it != division_centres().end()) {
        e.latitude = it->second.lat;
        e.longitude = it->second.lon;
    }
    return e;
}

}  // namespace

std::map<std::string, double> fixture_population() {
    return {{"Barishal", 9.1},  {"Chattogram", 33.2}, {"Dhaka", 44.2},   {"Khulna", 17.4},
            {"Mymensingh", 12.2}, {"Rajshahi", 20.4}, {"Rangpur", 17.6}, {"Sylhet", 11.0}};
}

EventSimulation simulate_events(const EventDgpSpec& spec) {
    if (spec.divisions.size() < 2) throw ConfigError("simulate_events: need at least two divisions");
    if (spec.window.length() < 2) throw ConfigError("simulate_events: window must span at least two days");
    if (!(spec.fatality_dispersion > 0.0) || !(spec.fatality_base >= 0.0) || !(spec.fatality_surge >= 0.0))
        throw ConfigError("simulate_events: fatality rates must be nonnegative, dispersion positive");

    const std::size_t E = spec.divisions.size();
    const auto T = static_cast<std::size_t>(spec.window.length());
    Rng rng_entity = Rng::stream(spec.seed, "events-entity");
    Rng rng_time = Rng::stream(spec.seed, "events-time");
    Rng rng_fat = Rng::stream(spec.seed, "events-fatalities");
    Rng rng_noise = Rng::stream(spec.seed, "events-noise");
    Rng rng_layout = Rng::stream(spec.seed, "events-layout");

    EventSimulation sim;
    EventTruth& truth = sim.truth;
    truth.beta_fatalities = spec.beta_fatalities;
    truth.beta_events = spec.beta_events;
    truth.beta_interaction = spec.break_date ? spec.beta_interaction : 0.0;
    truth.break_date = spec.break_date;

    std::vector<double> effect(E);
    std::vector<double> fatality_weight(E);
    for (std::size_t i = 0; i < E; ++i) {
        effect[i] = spec.entity_effect_sd * rng_entity.normal();
        fatality_weight[i] = std::exp(0.4 * rng_entity.normal());
        truth.entity_effects[spec.divisions[i]] = effect[i];
    }
    truth.time_effects.resize(static_cast<Index>(T));
    for (auto& g : truth.time_effects) g = spec.time_effect_sd * rng_time.normal();

    auto& out = sim.events;
    const Date early = spec.window.first - 2;
    for (int k = 0; k < spec.out_of_window_rows; ++k)
        out.push_back(make_event(early, spec.divisions[static_cast<std::size_t>(k) % E], "Protests", "Peaceful protest", 0));

    std::vector<double> prev_fat(E, 0.0);
    std::vector<double> prev_events(E, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const Date d = spec.window.first + static_cast<std::int64_t>(t);
        const bool surge = spec.surge_start <= d && d <= spec.surge_end;
        const bool post = spec.break_date && d >= *spec.break_date;
        std::vector<double> fat(E);
        std::vector<double> events(E);
        for (std::size_t i = 0; i < E; ++i) {
            const double rate = (surge ? spec.fatality_surge : spec.fatality_base) * fatality_weight[i];
            const double lambda =
                rate > 0.0 ? rng_fat.gamma(1.0 / spec.fatality_dispersion, spec.fatality_dispersion * rate) : 0.0;
            fat[i] = static_cast<double>(rng_fat.poisson(lambda));

            const double slope = spec.beta_fatalities + (post ? truth.beta_interaction : 0.0);
            const double s = spec.entity_level + effect[i] + truth.time_effects[static_cast<Index>(t)] +
                             slope * std::sqrt(prev_fat[i]) + spec.beta_events * std::sqrt(prev_events[i]) +
                             spec.noise_sd * rng_noise.normal();
            events[i] = std::round(std::max(s, 0.0) * std::max(s, 0.0));

            const std::string& div = spec.divisions[i];
            for (long k = 0; k < static_cast<long>(events[i]); ++k) {
                const double u = rng_layout.uniform();
                if (u < 0.7)
                    out.push_back(make_event(d, div, "Protests", "Peaceful protest", 0));
                else if (u < 0.9)
                    out.push_back(make_event(d, div, "Protests", "Protest with intervention", 0));
                else
                    out.push_back(make_event(d, div, "Riots", "Violent demonstration", 0));
            }
            const auto F = static_cast<long>(fat[i]);
            if (F > 0) {
                const long parts = 1 + static_cast<long>(rng_layout.below(static_cast<std::uint64_t>(std::min(F, 3L))));
                for (long k = 0; k < parts; ++k)
                    out.push_back(make_event(d, div, "Protests", "Excessive force against protesters",
                                             F / parts + (k < F % parts ? 1 : 0)));
            }
            const double arrest_p = std::min(1.0, spec.arrests_rate * (surge ? 2.0 : 1.0));
            if (rng_layout.uniform() < arrest_p) out.push_back(make_event(d, div, "Strategic developments", "Arrests", 0));
        }
        prev_fat = fat;
        prev_events = events;
    }
    truth.rows = out.size();
    return sim;
}

std::string events_to_csv(const std::vector<ingest::EventRecord>& events) {
    const ingest::SchemaConfig schema;
    std::string s = schema.event_date + ',' + schema.division + ',' + schema.event_type + ',' + schema.sub_event_type +
                    ',' + schema.fatalities + ',' + schema.latitude + ',' + schema.longitude + '\n';
    for (const auto& e : events) {
        s += e.event_date.to_string() + ',' + csv::escape(e.division) + ',' + csv::escape(e.event_type) + ',' +
             csv::escape(e.sub_event_type) + ',' + std::to_string(e.fatalities) + ',';
        if (e.latitude) s += csv::format_double(*e.latitude);
        s += ',';
        if (e.longitude) s += csv::format_double(*e.longitude);
        s += '\n';
    }
    return s;
}

namespace {

ordered_json to_json(const Vector& v) { return ordered_json(std::vector<double>(v.begin(), v.end())); }

}  // namespace

std::string truth_json(const PanelTruth& truth, const PanelDgpSpec& spec) {
    ordered_json j;
    j["dgp"] = "panel";
    j["seed"] = spec.seed;
    j["n_entities"] = spec.n_entities;
    j["n_periods"] = spec.n_periods;
    j["noise_sd"] = spec.noise_sd;
    j["regressor_sd"] = spec.regressor_sd;
    j["beta_repression"] = truth.beta_repression;
    j["beta_momentum"] = truth.beta_momentum;
    j["beta_interaction"] = truth.beta_interaction;
    j["break_date"] = truth.break_date ? ordered_json(truth.break_date->to_string()) : ordered_json(nullptr);
    j["entity_effects"] = to_json(truth.entity_effects);
    j["time_effects"] = to_json(truth.time_effects);
    return j.dump(2) + "\n";
}

std::string truth_json(const EventTruth& truth, const EventDgpSpec& spec) {
    ordered_json j;
    j["dgp"] = "events";
    j["seed"] = spec.seed;
    j["window"] = {spec.window.first.to_string(), spec.window.last.to_string()};
    j["response"] = "sqrt(local_events)";
    j["beta_fatalities"] = truth.beta_fatalities;
    j["beta_events"] = truth.beta_events;
    j["beta_interaction"] = truth.beta_interaction;
    j["break_date"] = truth.break_date ? ordered_json(truth.break_date->to_string()) : ordered_json(nullptr);
    j["noise_sd"] = spec.noise_sd;
    ordered_json fx = ordered_json::object();
    for (const auto& div : spec.divisions) fx[div] = truth.entity_effects.at(div);
    j["entity_effects"] = fx;
    j["time_effects"] = to_json(truth.time_effects);
    j["rows"] = truth.rows;
    return j.dump(2) + "\n";
}

}  // namespace backfire::synth
