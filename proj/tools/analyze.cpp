#include "backfire/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

int verbosity() {
    const char* env = std::getenv("BACKFIRE_LOG");
    const std::string v = env ? env : "warn";
    if (v == "quiet" || v == "error") return 0;
    if (v == "info") return 2;
    if (v == "debug") return 3;
    return 1;
}

std::vector<std::string> split_stages(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Run the repression/mobilization analysis pipeline"};
    std::string config_path;
    std::optional<std::string> stages;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "Pipeline configuration (JSON)")->required();
    app.add_option("--stages", stages, "Comma-separated subset of pooled,twfe,break,var,ml");
    app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
    app.add_option("--seed", seed, "Master seed (overrides the config)");
    app.set_version_flag("--version", std::string(backfire::kVersion));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const int level = verbosity();
    const backfire::pipeline::Logger log = [level](std::string_view kind, std::string_view msg) {
        const int need = kind == "warn" ? 1 : 2;
        if (level >= need) std::cerr << '[' << kind << "] " << msg << '\n';
    };

    backfire::pipeline::PipelineConfig config;
    try {
        config = backfire::pipeline::load_config(config_path);
        if (stages) config.stages = split_stages(*stages);
        if (out_dir) config.output_dir = *out_dir;
        if (seed) {
            config.seed = *seed;
            config.var.seed.reset();
            config.ml.seed.reset();
        }
        if (auto problems = backfire::pipeline::validate(config); !problems.empty()) {
            std::string msg = "invalid configuration:";
            for (const auto& p : problems) msg += "\n  - " + p;
            throw backfire::ConfigError(msg);
        }
    } catch (const std::exception& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return 2;
    }

    try {
        auto result = backfire::pipeline::run_pipeline(config, log);
        backfire::pipeline::emit_plot_data(result, config.output_dir);
        std::filesystem::create_directories(config.output_dir);
        const auto report_path = config.output_dir / "report.json";
        std::ofstream(report_path, std::ios::binary) << backfire::pipeline::render_report(result.report);
        if (level >= 2) std::cerr << "[info] report written to " << report_path.string() << '\n';
        return result.any_stage_failed ? 3 : 0;
    } catch (const backfire::ConfigError& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return 2;
    } catch (const backfire::SchemaError& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return 3;
    }
}
