#include "backfire/synth_oracle.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic ACLED-style event file with planted effects"};
    std::string out_dir = ".";
    backfire::synth::EventDgpSpec spec;
    std::optional<std::string> break_date;
    app.add_option("--out", out_dir, "Directory for events.csv and truth.json");
    app.add_option("--seed", spec.seed, "Generator seed");
    app.add_option("--beta-fatalities", spec.beta_fatalities, "Slope on sqrt lagged local fatalities");
    app.add_option("--beta-events", spec.beta_events, "Slope on sqrt lagged local events");
    app.add_option("--break-date", break_date, "Date on which the fatality slope changes");
    app.add_option("--beta-interaction", spec.beta_interaction, "Slope change from the break date on");
    app.add_option("--noise-sd", spec.noise_sd, "Noise sd on the square-root scale");
    CLI11_PARSE(app, argc, argv);

    try {
        if (break_date) spec.break_date = backfire::Date::from_string(*break_date);
        const auto sim = backfire::synth::simulate_events(spec);
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "events.csv", std::ios::binary)
            << backfire::synth::events_to_csv(sim.events);
        std::ofstream(std::filesystem::path(out_dir) / "truth.json", std::ios::binary)
            << backfire::synth::truth_json(sim.truth, spec);
        std::cout << sim.events.size() << " events written to " << out_dir << '\n';
    } catch (const std::exception& e) {
        std::cerr << "make_fixture: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
