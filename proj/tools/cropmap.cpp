// cropmap: land-cover and crop-type mapping over satellite time series.
//
// One declarative JSON config drives every command; flags only pick the
// config file and optionally redirect the output directory.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cropmap/pipeline.hpp"

namespace {

int run_command(const std::string& name, const std::string& config_path,
                const std::string& output_override) {
    using namespace cropmap;
    try {
        PipelineConfig cfg = load_config(config_path);
        if (!output_override.empty()) cfg.output_dir = output_override;

        CommandResult res;
        if (name == "features")
            res = cmd_features(cfg);
        else if (name == "select")
            res = cmd_select(cfg);
        else if (name == "train")
            res = cmd_train(cfg);
        else if (name == "map")
            res = cmd_map(cfg);
        else if (name == "report")
            res = cmd_report(cfg);
        else if (name == "synth")
            res = cmd_synth(cfg);

        for (const auto& msg : res.messages) std::fprintf(stdout, "%s\n", msg.c_str());
        return res.exit_code;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cropmap: satellite time-series land-cover and crop-type mapping"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;

    const char* commands[] = {"features", "select", "train", "map", "report", "synth"};
    const char* descriptions[] = {
        "build or ingest per-year feature rasters",
        "rank classifier heads over seeded runs and pick the ensemble pair",
        "train the wall-to-wall ensemble models",
        "produce wall-to-wall class and probability maps",
        "emit evaluation, transfer, change and CPU tables",
        "generate a synthetic scene with known truth",
    };
    for (std::size_t i = 0; i < 6; ++i) {
        auto* sub = app.add_subcommand(commands[i], descriptions[i]);
        sub->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
        sub->add_option("-o,--output", output_override, "override the configured output directory");
    }

    CLI11_PARSE(app, argc, argv);
    return run_command(app.get_subcommands().front()->get_name(), config_path, output_override);
}
