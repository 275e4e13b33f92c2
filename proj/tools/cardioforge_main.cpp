#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cardioforge/pipeline.hpp"

namespace {

using cardioforge::pipeline::CommandResult;
using cardioforge::pipeline::RunConfig;

int fail(const std::string& type, const std::string& message, int code) {
    const nlohmann::json err = {{"error", {{"type", type}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cardioforge: heart sound classification pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "run";
    std::string mode;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool determinism = true;
    std::size_t subjects = 0;
    std::string generator = "both";
    std::vector<std::string> eval_dirs;

    app.add_option("-c,--config", config_path,
                   "Run config JSON; bare names resolve against $CARDIOFORGE_CONFIG_DIR");
    app.add_option("-o,--out", out_dir, "Run directory for all artifacts")
        ->capture_default_str();
    auto* mode_opt =
        app.add_option("--mode", mode, "Dataset mode")
            ->check(CLI::IsMember({"single_pcg", "multimodal", "multichannel"}));
    auto* seed_opt = app.add_option("--seed", seed, "Master seed override");
    auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads (determinism forces 1)");
    auto* det_opt = app.add_flag("--determinism,!--no-determinism", determinism,
                                 "Byte-identical reruns; sequential where order matters");

    auto* c_fixtures = app.add_subcommand("fixtures", "Generate the bundled synthetic dataset");
    auto* subjects_opt =
        c_fixtures->add_option("--subjects", subjects, "Number of fixture subjects");
    auto* c_preprocess =
        app.add_subcommand("preprocess", "Resample, bandpass and normalize every channel");
    auto* c_augment = app.add_subcommand("augment", "Write the offline augmented corpus");
    auto* c_synth_train = app.add_subcommand("synth-train", "Fit the diffusion generators");
    auto* c_synth_generate =
        app.add_subcommand("synth-generate", "Sample synthetic records from fitted generators");
    for (auto* cmd : {c_synth_train, c_synth_generate}) {
        cmd->add_option("--generator", generator, "diffwave, wavegrad or both")
            ->check(CLI::IsMember({"diffwave", "wavegrad", "both"}))
            ->capture_default_str();
    }
    auto* c_train = app.add_subcommand("train", "Run the staged classifier schedule");
    auto* c_evaluate = app.add_subcommand("evaluate", "Score the held-out test split");
    auto* c_report = app.add_subcommand("report", "Aggregate evaluation runs into a report");
    c_report->add_option("--eval-dir", eval_dirs,
                         "Evaluation directory to aggregate (repeatable; default <out>/eval)");

    std::optional<CommandResult> result;
    auto run = [&](CLI::App* cmd) {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = cardioforge::pipeline::load_run_config(
                cardioforge::pipeline::resolve_config_path(config_path));
        }
        if (*mode_opt) cfg.mode = cardioforge::fixtures::mode_from_string(mode);
        if (*seed_opt) cfg.seed = seed;
        if (*jobs_opt) cfg.jobs = jobs;
        if (*det_opt) cfg.determinism = determinism;
        if (*subjects_opt) cfg.fixture.n_subjects = subjects;
        const std::filesystem::path run_dir(out_dir);

        if (cmd == c_fixtures) {
            result = cardioforge::pipeline::cmd_fixtures(cfg, run_dir);
        } else if (cmd == c_preprocess) {
            result = cardioforge::pipeline::cmd_preprocess(cfg, run_dir);
        } else if (cmd == c_augment) {
            result = cardioforge::pipeline::cmd_augment(cfg, run_dir);
        } else if (cmd == c_synth_train) {
            result = cardioforge::pipeline::cmd_synth_train(cfg, run_dir, generator);
        } else if (cmd == c_synth_generate) {
            result = cardioforge::pipeline::cmd_synth_generate(cfg, run_dir, generator);
        } else if (cmd == c_train) {
            result = cardioforge::pipeline::cmd_train(cfg, run_dir);
        } else if (cmd == c_evaluate) {
            result = cardioforge::pipeline::cmd_evaluate(cfg, run_dir);
        } else if (cmd == c_report) {
            std::vector<std::filesystem::path> dirs(eval_dirs.begin(), eval_dirs.end());
            result = cardioforge::pipeline::cmd_report(cfg, run_dir, dirs);
        }
    };
    for (auto* cmd : {c_fixtures, c_preprocess, c_augment, c_synth_train, c_synth_generate,
                      c_train, c_evaluate, c_report}) {
        cmd->callback([&, cmd] { run(cmd); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const cardioforge::ArgumentError& e) {
        return fail("argument", e.what(), 1);
    } catch (const cardioforge::ConfigError& e) {
        return fail("config", e.what(), 1);
    } catch (const cardioforge::SpecError& e) {
        return fail("spec", e.what(), 1);
    } catch (const cardioforge::FormatError& e) {
        return fail("format", e.what(), 1);
    } catch (const cardioforge::StratificationError& e) {
        return fail("stratification", e.what(), 1);
    } catch (const cardioforge::UnsupportedError& e) {
        return fail("unsupported", e.what(), 1);
    } catch (const cardioforge::IoError& e) {
        return fail("io", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 2);
    }

    if (result) std::cout << result->summary.dump(2) << "\n";
    return 0;
}
