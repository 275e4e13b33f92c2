#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "cardioforge/pipeline.hpp"

namespace py = pybind11;
using namespace cardioforge;
using nlohmann::json;

namespace {

py::object json_to_py(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Modality parse_modality(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return modality_from_string(s);
}

pipeline::RunConfig config_of(const std::string& config_json) {
    if (config_json.empty()) return pipeline::RunConfig{};
    return pipeline::config_from_json(json::parse(config_json));
}

}  // namespace

PYBIND11_MODULE(_cardioforge, m) {
    m.doc() = "cardioforge native core";
    m.attr("__version__") = "0.1.0";

    m.def(
        "read_wav",
        [](const std::string& path) {
            const Recording r = signal_io::read_wav(path);
            return py::make_tuple(r.samples, r.fs);
        },
        py::arg("path"), "Read a mono WAV; returns (samples, fs).");

    m.def(
        "write_wav",
        [](const std::vector<double>& samples, double fs, const std::string& path,
           const std::string& modality, bool float32) {
            Recording r;
            r.samples = samples;
            r.fs = fs;
            r.modality = parse_modality(modality);
            signal_io::write_wav(r, path, float32);
        },
        py::arg("samples"), py::arg("fs"), py::arg("path"), py::arg("modality") = "pcg",
        py::arg("float32") = false);

    m.def(
        "preprocess",
        [](const std::vector<double>& samples, double fs, const std::string& modality,
           double target_fs) {
            Recording r;
            r.samples = samples;
            r.fs = fs;
            r.modality = parse_modality(modality);
            return dsp::preprocess_chain(r, r.modality, target_fs).samples;
        },
        py::arg("samples"), py::arg("fs"), py::arg("modality"), py::arg("target_fs"),
        "Resample to 1 kHz, bandpass for the modality, normalize, resample to target_fs.");

    m.def(
        "metrics",
        [](std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
            const eval::ConfusionCounts c{tp, tn, fp, fn};
            return json_to_py(eval::metrics_to_json(eval::metrics(c)));
        },
        py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"),
        "Binary classification metrics from confusion counts.");

    m.def(
        "roc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const eval::RocCurve c = eval::roc(scores, labels);
            return py::make_tuple(c.fpr, c.tpr, c.auc);
        },
        py::arg("scores"), py::arg("labels"), "ROC curve; returns (fpr, tpr, auc).");

    m.def(
        "write_fixtures",
        [](const std::string& out_dir, std::size_t n_subjects, std::uint64_t seed,
           const std::string& mode) {
            fixtures::FixtureSpec spec;
            spec.n_subjects = n_subjects;
            spec.seed = seed;
            spec.mode = fixtures::mode_from_string(mode);
            return fixtures::write_fixtures(spec, out_dir).size();
        },
        py::arg("out_dir"), py::arg("n_subjects"), py::arg("seed") = 0,
        py::arg("mode") = "single_pcg", "Write the bundled synthetic dataset; returns entry count.");

    m.def(
        "default_config",
        [](const std::string& mode) {
            pipeline::RunConfig cfg;
            cfg.mode = fixtures::mode_from_string(mode);
            return pipeline::config_to_json(cfg.resolve()).dump(2);
        },
        py::arg("mode") = "single_pcg", "Resolved run config JSON with every default filled in.");

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_json,
           const std::string& run_dir) {
            const pipeline::RunConfig cfg = config_of(config_json);
            pipeline::CommandResult res;
            if (command == "fixtures") {
                res = pipeline::cmd_fixtures(cfg, run_dir);
            } else if (command == "preprocess") {
                res = pipeline::cmd_preprocess(cfg, run_dir);
            } else if (command == "augment") {
                res = pipeline::cmd_augment(cfg, run_dir);
            } else if (command == "synth-train") {
                res = pipeline::cmd_synth_train(cfg, run_dir);
            } else if (command == "synth-generate") {
                res = pipeline::cmd_synth_generate(cfg, run_dir);
            } else if (command == "train") {
                res = pipeline::cmd_train(cfg, run_dir);
            } else if (command == "evaluate") {
                res = pipeline::cmd_evaluate(cfg, run_dir);
            } else if (command == "report") {
                res = pipeline::cmd_report(cfg, run_dir, {});
            } else {
                throw ConfigError("unknown command \"" + command + "\"");
            }
            return res.summary.dump();
        },
        py::arg("command"), py::arg("config_json") = std::string(), py::arg("run_dir") = "run",
        "Run one pipeline command; returns the completion summary as JSON.");

    m.def(
        "run_all",
        [](const std::string& config_json, const std::string& run_dir) {
            const pipeline::RunConfig cfg = config_of(config_json);
            json out = json::array();
            for (const auto& res : pipeline::run_all(cfg, run_dir)) out.push_back(res.summary);
            return out.dump();
        },
        py::arg("config_json") = std::string(), py::arg("run_dir") = "run",
        "Run the whole chain; returns all completion summaries as a JSON array.");
}
