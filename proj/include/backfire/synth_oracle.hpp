#pragma once

#include "backfire/core.hpp"
#include "backfire/date.hpp"
#include "backfire/event_ingest.hpp"
#include "backfire/feature_lab.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace backfire::synth {

// ---------------------------------------------------------------------------
// Panel with planted two-way fixed effects
//
// y_it = b_rep x_it + b_mom m_it + b_int x_it D_t + a_i + g_t + e_it
//
// x_it is the repression regressor, m_it an exogenous momentum proxy and
// D_t = [t >= break_date_index]. The regressor is correlated with both sets
// of fixed effects so that pooled OLS is biased and TWFE is not.

struct PanelDgpSpec {
    int n_entities = 8;
    int n_periods = 200;
    double beta_repression = 0.25;
    double beta_momentum = 0.0;
    std::optional<int> break_date_index;
    double beta_interaction = 0.0;
    double entity_effect_sd = 1.0;
    double time_effect_sd = 1.0;
    double regressor_sd = 2.0;
    double noise_sd = 1.0;
    Date start_date{2024, 6, 1};
    std::uint64_t seed = 0;

    /// Throws ConfigError listing every violated constraint.
    void validate() const;
};

struct PanelTruth {
    double beta_repression = 0.0;
    double beta_momentum = 0.0;
    double beta_interaction = 0.0;
    std::optional<Date> break_date;
    Vector entity_effects;
    Vector time_effects;
};

/// Columns: y, repression, momentum. Entities are "unit0", "unit1", ...
struct PanelSimulation {
    features::FeatureMatrix data;
    PanelTruth truth;
};

PanelSimulation simulate_panel(const PanelDgpSpec& spec);

// ---------------------------------------------------------------------------
// VAR(p)

struct VarDgpSpec {
    std::vector<Matrix> A;
    Vector intercept;   ///< zero if empty
    Matrix innovation_cov;
    int n = 200;
    int burn_in = 100;
    std::uint64_t seed = 0;
};

struct VarSimulation {
    Matrix data;  ///< n x m
    std::vector<std::string> warnings;
};

/// Recursive simulation from zero initial values with Gaussian innovations
/// u = S z, S S' = innovation_cov (symmetric square root, so a singular
/// covariance is allowed). The first burn_in draws are discarded.
VarSimulation simulate_var(const VarDgpSpec& spec);

// ---------------------------------------------------------------------------
// NB2 counts

/// y_i ~ Poisson(lambda_i), lambda_i ~ Gamma(1/alpha, alpha mu_i),
/// mu = exp(X beta). alpha == 0 draws Poisson(mu) directly.
Vector simulate_negbin(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& beta, double alpha,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Event-level fixture
//
// Daily local fatalities F_it are negative binomial with a division level and
// a national surge after `surge_start`. Mobilization counts follow
//   s_it = a_i + g_t + b_f sqrt(F_i,t-1) [+ b_int sqrt(F_i,t-1) after break]
//          + b_e sqrt(E_i,t-1) + e_it,      E_it = round(max(s_it, 0)^2)
// so the TWFE regression of sqrt(E) on the lagged square roots recovers
// b_f and b_e up to rounding and the usual dynamic-panel bias.

struct EventDgpSpec {
    std::vector<std::string> divisions = {"Barishal", "Chattogram", "Dhaka",  "Khulna",
                                          "Mymensingh", "Rajshahi", "Rangpur", "Sylhet"};
    DateWindow window{Date{2024, 6, 1}, Date{2024, 8, 5}};
    double beta_fatalities = 0.25;
    double beta_events = 0.1;
    std::optional<Date> break_date;
    double beta_interaction = 0.0;
    double entity_level = 2.0;
    double entity_effect_sd = 0.5;
    double time_effect_sd = 0.3;
    double noise_sd = 0.3;
    double fatality_base = 0.3;
    double fatality_surge = 3.0;
    Date surge_start{2024, 7, 16};
    Date surge_end{2024, 8, 5};
    double fatality_dispersion = 0.5;
    double arrests_rate = 0.3;
    int out_of_window_rows = 3;
    std::uint64_t seed = 0;
};

struct EventTruth {
    double beta_fatalities = 0.0;
    double beta_events = 0.0;
    double beta_interaction = 0.0;
    std::optional<Date> break_date;
    std::map<std::string, double> entity_effects;
    Vector time_effects;
    std::size_t rows = 0;
};

struct EventSimulation {
    std::vector<ingest::EventRecord> events;
    EventTruth truth;
};

EventSimulation simulate_events(const EventDgpSpec& spec);

/// ACLED-style CSV with the default SchemaConfig column names.
std::string events_to_csv(const std::vector<ingest::EventRecord>& events);

/// Pretty-printed JSON records of the planted parameters.
std::string truth_json(const PanelTruth& truth, const PanelDgpSpec& spec);
std::string truth_json(const EventTruth& truth, const EventDgpSpec& spec);

/// Default population table (millions) for the fixture divisions.
std::map<std::string, double> fixture_population();

}  // namespace backfire::synth
