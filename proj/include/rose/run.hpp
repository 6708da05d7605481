#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rose/model.hpp"
#include "rose/optimizer.hpp"
#include "rose/probe.hpp"
#include "rose/risk.hpp"

namespace rose::run {

enum class Mode { vanilla, rose, rdrop, rdrop_rose };

// Where training/eval examples come from: a generated probe task or CSV
// files (comma-separated feature columns, integer label last, no header).
struct DataSpec {
    enum class Kind { probe, csv } kind = Kind::probe;
    probe::ProbeTaskSpec probe;
    std::string csv_path;
    std::string csv_test_path;  // optional; falls back to csv_path
};

struct RunConfig {
    Mode mode = Mode::vanilla;
    std::uint64_t seed = 1;
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    model::ModelSpec model;
    optim::AdamwHyper optimizer;
    risk::RoseConfig rose;  // meaningful only in the rose modes
    double rdrop_weight = 1.0;
    optim::ScePass sce_pass = optim::ScePass::pass0;
    DataSpec data;
};

// Strict parse: unknown keys anywhere are rejected (config_error), rose
// fields are required in rose modes and forbidden otherwise.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

// Canonical serialization; parse(serialize(c)) reproduces c exactly.
nlohmann::json serialize_config(const RunConfig& c);

model::Dataset load_csv_dataset(const std::string& path, std::size_t input_dim,
                                std::size_t classes);

struct TrainResult {
    model::ParamSet params;
    optim::OptimizerState state;
    std::vector<optim::StepReport> reports;
    std::vector<std::size_t> report_epochs;
    model::Dataset train_set;
    model::Dataset eval_set;
    std::vector<int> eval_surface_flags;  // empty for CSV data
    double final_train_acc = 0.0;
    double final_eval_acc = 0.0;
    double mask_fraction_mean = 1.0;
};

// Pure training loop; no filesystem access.
TrainResult run_train(const RunConfig& config);

std::string run_csv_text(const RunConfig& config, const TrainResult& result);
nlohmann::json summary_json(const TrainResult& result);

// Writes checkpoint.json/.bin, run.csv, summary.json into out_dir.
void write_train_outputs(const std::string& out_dir, const RunConfig& config,
                         const TrainResult& result);

// The fixed configurations behind `rose probe` (and the probe acceptance
// checks): one per strategy, sharing task and model settings.
RunConfig default_probe_config(const std::string& strategy, probe::SurfaceKind task,
                               std::uint64_t seed);

inline constexpr double kProbeGaussianSigma = 0.5;

struct ProbeRow {
    std::uint64_t seed = 0;
    std::string strategy;
    double mcc = 0.0;
    double clean_acc = 0.0;
    double gaussian_acc = 0.0;
    double surface_flip_acc = 0.0;
};

// One probe run for one seed: warm-start on cue-uninformative data from a
// derived seed (identical for every strategy), fine-tune on the ambiguous
// split with the strategy under test, evaluate on the disambiguating split.
ProbeRow probe_run(const std::string& strategy, probe::SurfaceKind task, std::uint64_t seed);

// Full CLI: `rose <train|eval|landscape|probe> ...`. args excludes argv[0].
// Returns the process exit code (0 ok, 2 config error, 3 data error).
int run_cli(const std::vector<std::string>& args);

}  // namespace rose::run
