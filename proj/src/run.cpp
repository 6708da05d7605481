#include "rose/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "rose/checkpoint.hpp"
#include "rose/errors.hpp"
#include "rose/landscape.hpp"
#include "rose/log.hpp"
#include "rose/losses.hpp"
#include "rose/rng.hpp"

namespace rose::run {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- strict JSON helpers ----------------------------------------------

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw config_error("config: " + where + " must be an object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw config_error("config: unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) {
        throw config_error("config: missing key '" + key + "' in " + where);
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("config: bad value for '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("config: bad value for '" + key + "' in " + where);
    }
}

// ---- enum names ---------------------------------------------------------

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::vanilla: return "vanilla";
        case Mode::rose: return "rose";
        case Mode::rdrop: return "rdrop";
        case Mode::rdrop_rose: return "rdrop_rose";
    }
    return "vanilla";
}

Mode mode_from(const std::string& s) {
    if (s == "vanilla") return Mode::vanilla;
    if (s == "rose") return Mode::rose;
    if (s == "rdrop") return Mode::rdrop;
    if (s == "rdrop_rose") return Mode::rdrop_rose;
    throw config_error("config: unknown mode '" + s + "'");
}

std::string activation_name(model::Activation a) {
    return a == model::Activation::tanh ? "tanh" : "relu";
}

model::Activation activation_from(const std::string& s) {
    if (s == "tanh") return model::Activation::tanh;
    if (s == "relu") return model::Activation::relu;
    throw config_error("config: unknown activation '" + s + "'");
}

std::string strategy_name(risk::Strategy s) {
    switch (s) {
        case risk::Strategy::first: return "first";
        case risk::Strategy::second: return "second";
        case risk::Strategy::ensemble: return "ensemble";
    }
    return "ensemble";
}

risk::Strategy strategy_from(const std::string& s) {
    if (s == "first") return risk::Strategy::first;
    if (s == "second") return risk::Strategy::second;
    if (s == "ensemble") return risk::Strategy::ensemble;
    throw config_error("config: unknown strategy '" + s + "'");
}

std::string granularity_name(risk::Granularity g) {
    return g == risk::Granularity::group ? "group" : "scalar";
}

risk::Granularity granularity_from(const std::string& s) {
    if (s == "group") return risk::Granularity::group;
    if (s == "scalar") return risk::Granularity::scalar;
    throw config_error("config: unknown granularity '" + s + "'");
}

std::string surface_name(probe::SurfaceKind k) {
    return k == probe::SurfaceKind::indicator ? "indicator" : "magnitude";
}

probe::SurfaceKind surface_from(const std::string& s) {
    if (s == "indicator") return probe::SurfaceKind::indicator;
    if (s == "magnitude") return probe::SurfaceKind::magnitude;
    throw config_error("config: unknown surface_kind '" + s + "'");
}

std::string sce_pass_name(optim::ScePass p) {
    return p == optim::ScePass::pass0 ? "pass0" : "clean";
}

optim::ScePass sce_pass_from(const std::string& s) {
    if (s == "pass0") return optim::ScePass::pass0;
    if (s == "clean") return optim::ScePass::clean;
    throw config_error("config: unknown sce_pass '" + s + "'");
}

bool uses_rose(Mode m) { return m == Mode::rose || m == Mode::rdrop_rose; }
bool uses_rdrop(Mode m) { return m == Mode::rdrop || m == Mode::rdrop_rose; }

}  // namespace

RunConfig parse_config(const json& j) {
    check_keys(j,
               {"mode", "seed", "epochs", "batch_size", "model", "optimizer", "rose",
                "rdrop_weight", "sce_pass", "data"},
               "top level");
    RunConfig c;
    c.mode = mode_from(get_field<std::string>(j, "mode", "top level"));
    c.seed = get_or<std::uint64_t>(j, "seed", "top level", 1);
    c.epochs = get_or<std::size_t>(j, "epochs", "top level", 5);
    c.batch_size = get_or<std::size_t>(j, "batch_size", "top level", 32);
    if (c.batch_size == 0) throw config_error("config: batch_size must be positive");

    const json& jm = j.contains("model") ? j.at("model") : json();
    check_keys(jm, {"input_dim", "hidden_dims", "classes", "activation", "dropout_rate"},
               "model");
    c.model.input_dim = get_field<std::size_t>(jm, "input_dim", "model");
    c.model.hidden_dims = get_field<std::vector<std::size_t>>(jm, "hidden_dims", "model");
    c.model.classes = get_field<std::size_t>(jm, "classes", "model");
    c.model.activation = activation_from(get_or<std::string>(jm, "activation", "model", "tanh"));
    c.model.dropout_rate = get_or<double>(jm, "dropout_rate", "model", 0.1);

    if (j.contains("optimizer")) {
        const json& jo = j.at("optimizer");
        check_keys(jo, {"lr", "beta1", "beta2", "eps", "weight_decay"}, "optimizer");
        c.optimizer.lr = get_or<double>(jo, "lr", "optimizer", c.optimizer.lr);
        c.optimizer.beta1 = get_or<double>(jo, "beta1", "optimizer", c.optimizer.beta1);
        c.optimizer.beta2 = get_or<double>(jo, "beta2", "optimizer", c.optimizer.beta2);
        c.optimizer.eps = get_or<double>(jo, "eps", "optimizer", c.optimizer.eps);
        c.optimizer.weight_decay =
            get_or<double>(jo, "weight_decay", "optimizer", c.optimizer.weight_decay);
    }

    if (uses_rose(c.mode)) {
        if (!j.contains("rose")) {
            throw config_error("config: mode '" + mode_name(c.mode) + "' requires a rose block");
        }
        const json& jr = j.at("rose");
        check_keys(jr,
                   {"strategy", "c_h_first", "c_h_second", "gamma", "granularity",
                    "momentum_floor", "hard_ensemble"},
                   "rose");
        c.rose.strategy = strategy_from(get_field<std::string>(jr, "strategy", "rose"));
        c.rose.c_h_first = get_or<double>(jr, "c_h_first", "rose", c.rose.c_h_first);
        c.rose.c_h_second = get_or<double>(jr, "c_h_second", "rose", c.rose.c_h_second);
        c.rose.gamma = get_or<double>(jr, "gamma", "rose", c.rose.gamma);
        c.rose.granularity =
            granularity_from(get_or<std::string>(jr, "granularity", "rose", "group"));
        c.rose.momentum_floor =
            get_or<double>(jr, "momentum_floor", "rose", c.rose.momentum_floor);
        c.rose.hard_ensemble = get_or<bool>(jr, "hard_ensemble", "rose", false);
    } else if (j.contains("rose")) {
        throw config_error("config: mode '" + mode_name(c.mode) + "' forbids a rose block");
    }

    if (uses_rdrop(c.mode)) {
        c.rdrop_weight = get_or<double>(j, "rdrop_weight", "top level", 1.0);
        if (!(c.rdrop_weight >= 0.0)) {
            throw config_error("config: rdrop_weight must be >= 0");
        }
    } else if (j.contains("rdrop_weight")) {
        throw config_error("config: rdrop_weight only applies to the rdrop modes");
    }

    if (c.mode == Mode::rose) {
        c.sce_pass = sce_pass_from(get_or<std::string>(j, "sce_pass", "top level", "pass0"));
    } else if (j.contains("sce_pass")) {
        throw config_error("config: sce_pass only applies to mode 'rose'");
    }

    const json& jd = j.contains("data") ? j.at("data") : json();
    if (!jd.is_object() || !jd.contains("kind")) {
        throw config_error("config: data block with a 'kind' is required");
    }
    const std::string kind = get_field<std::string>(jd, "kind", "data");
    if (kind == "probe") {
        check_keys(jd,
                   {"kind", "surface_kind", "core_dim", "noise_std", "train_size", "test_size",
                    "seed", "magnitude_factor"},
                   "data");
        c.data.kind = DataSpec::Kind::probe;
        c.data.probe.surface_kind =
            surface_from(get_field<std::string>(jd, "surface_kind", "data"));
        c.data.probe.core_dim = get_or<std::size_t>(jd, "core_dim", "data", 4);
        c.data.probe.noise_std = get_or<double>(jd, "noise_std", "data", 0.0);
        c.data.probe.train_size = get_or<std::size_t>(jd, "train_size", "data", 512);
        c.data.probe.test_size = get_or<std::size_t>(jd, "test_size", "data", 2048);
        c.data.probe.seed = get_or<std::uint64_t>(jd, "seed", "data", c.seed);
        c.data.probe.magnitude_factor = get_or<double>(jd, "magnitude_factor", "data", 1.5);
    } else if (kind == "csv") {
        check_keys(jd, {"kind", "path", "test_path"}, "data");
        c.data.kind = DataSpec::Kind::csv;
        c.data.csv_path = get_field<std::string>(jd, "path", "data");
        c.data.csv_test_path = get_or<std::string>(jd, "test_path", "data", "");
    } else {
        throw config_error("config: unknown data kind '" + kind + "'");
    }

    try {
        c.model.validate();
        c.optimizer.validate();
        if (uses_rose(c.mode)) c.rose.validate();
        if (c.data.kind == DataSpec::Kind::probe) c.data.probe.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    if (c.data.kind == DataSpec::Kind::probe &&
        c.data.probe.input_dim() != c.model.input_dim) {
        throw config_error("config: model.input_dim " + std::to_string(c.model.input_dim) +
                           " does not match the probe task's " +
                           std::to_string(c.data.probe.input_dim()));
    }
    if (uses_rose(c.mode) && c.rose.strategy != risk::Strategy::second &&
        c.model.dropout_rate <= 0.0) {
        throw config_error(
            "config: first-order risk strategies require dropout_rate > 0 (risks would tie "
            "at zero)");
    }
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw config_error("config: parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

json serialize_config(const RunConfig& c) {
    json j;
    j["mode"] = mode_name(c.mode);
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["model"] = {{"input_dim", c.model.input_dim},
                  {"hidden_dims", c.model.hidden_dims},
                  {"classes", c.model.classes},
                  {"activation", activation_name(c.model.activation)},
                  {"dropout_rate", c.model.dropout_rate}};
    j["optimizer"] = {{"lr", c.optimizer.lr},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"eps", c.optimizer.eps},
                      {"weight_decay", c.optimizer.weight_decay}};
    if (uses_rose(c.mode)) {
        j["rose"] = {{"strategy", strategy_name(c.rose.strategy)},
                     {"c_h_first", c.rose.c_h_first},
                     {"c_h_second", c.rose.c_h_second},
                     {"gamma", c.rose.gamma},
                     {"granularity", granularity_name(c.rose.granularity)},
                     {"momentum_floor", c.rose.momentum_floor},
                     {"hard_ensemble", c.rose.hard_ensemble}};
    }
    if (uses_rdrop(c.mode)) j["rdrop_weight"] = c.rdrop_weight;
    if (c.mode == Mode::rose) j["sce_pass"] = sce_pass_name(c.sce_pass);
    if (c.data.kind == DataSpec::Kind::probe) {
        j["data"] = {{"kind", "probe"},
                     {"surface_kind", surface_name(c.data.probe.surface_kind)},
                     {"core_dim", c.data.probe.core_dim},
                     {"noise_std", c.data.probe.noise_std},
                     {"train_size", c.data.probe.train_size},
                     {"test_size", c.data.probe.test_size},
                     {"seed", c.data.probe.seed},
                     {"magnitude_factor", c.data.probe.magnitude_factor}};
    } else {
        j["data"] = {{"kind", "csv"}, {"path", c.data.csv_path}};
        if (!c.data.csv_test_path.empty()) j["data"]["test_path"] = c.data.csv_test_path;
    }
    return j;
}

model::Dataset load_csv_dataset(const std::string& path, std::size_t input_dim,
                                std::size_t classes) {
    std::ifstream f(path);
    if (!f) throw data_error("data: cannot open " + path);
    model::Dataset out;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) {
            throw data_error("data: " + path + ":" + std::to_string(line_no) + ": empty line");
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != input_dim + 1) {
            throw data_error("data: " + path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(input_dim + 1) + " columns, got " +
                             std::to_string(cells.size()));
        }
        long label = 0;
        try {
            for (std::size_t i = 0; i < input_dim; ++i) {
                std::size_t used = 0;
                const double v = std::stod(cells[i], &used);
                if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
                values.push_back(v);
            }
            std::size_t used = 0;
            label = std::stol(cells[input_dim], &used);
            if (used != cells[input_dim].size()) throw std::invalid_argument(cells[input_dim]);
        } catch (const std::exception&) {
            throw data_error("data: " + path + ":" + std::to_string(line_no) +
                             ": malformed value");
        }
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw data_error("data: " + path + ":" + std::to_string(line_no) + ": label " +
                             std::to_string(label) + " outside [0, " +
                             std::to_string(classes) + ")");
        }
        out.y.push_back(static_cast<std::size_t>(label));
    }
    if (out.y.empty()) throw data_error("data: " + path + " holds no examples");
    out.x = Tensor({out.y.size(), input_dim}, std::move(values));
    return out;
}

namespace {

model::Dataset slice_dataset(const model::Dataset& full, const std::vector<std::size_t>& order,
                             std::size_t begin, std::size_t end) {
    const std::size_t dim = full.x.cols();
    model::Dataset out;
    out.x = Tensor::zeros({end - begin, dim});
    out.y.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = order[i];
        std::copy_n(full.x.data.data() + src * dim, dim,
                    out.x.data.data() + (i - begin) * dim);
        out.y[i - begin] = full.y[src];
    }
    return out;
}

// Epoch loop shared by plain runs and the probe protocol's phases: one
// Fisher-Yates shuffle per epoch keyed off config.seed, sequential batches,
// one step per batch. Report sinks are optional.
void train_loop(const RunConfig& config, const model::Dataset& train_set,
                model::ParamSet& params, optim::OptimizerState& state,
                std::vector<optim::StepReport>* reports,
                std::vector<std::size_t>* report_epochs) {
    const std::size_t n = train_set.size();
    const std::uint64_t shuffle_base = rng::domain_key(config.seed, rng::Domain::shuffle);
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng::Stream stream(rng::chain(shuffle_base, epoch));
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(stream.next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(n, begin + config.batch_size);
            const model::Dataset batch = slice_dataset(train_set, order, begin, end);
            optim::StepReport rep;
            switch (config.mode) {
                case Mode::vanilla:
                    rep = optim::vanilla_step(params, state, config.model, batch,
                                              config.optimizer, config.seed);
                    break;
                case Mode::rose:
                    rep = optim::rose_step(params, state, config.model, batch, config.rose,
                                           config.optimizer, config.seed, config.sce_pass);
                    break;
                case Mode::rdrop:
                    rep = optim::rdrop_step(params, state, config.model, batch,
                                            config.optimizer, config.rdrop_weight, config.seed);
                    break;
                case Mode::rdrop_rose:
                    rep = optim::rdrop_rose_step(params, state, config.model, batch,
                                                 config.rose, config.optimizer,
                                                 config.rdrop_weight, config.seed);
                    break;
            }
            log::debug("step " + std::to_string(rep.step) + " loss_sce " +
                       fmt17(rep.loss_sce));
            if (reports) reports->push_back(std::move(rep));
            if (report_epochs) report_epochs->push_back(epoch);
        }
    }
}

}  // namespace

TrainResult run_train(const RunConfig& config) {
    TrainResult result;
    result.params = model::init_params(config.model, config.seed);
    result.state = optim::OptimizerState::init(result.params);

    if (config.data.kind == DataSpec::Kind::probe) {
        auto [train, test] = probe::generate_probe_task(config.data.probe);
        result.train_set = std::move(train.data);
        result.eval_set = std::move(test.data);
        result.eval_surface_flags = std::move(test.surface_flag);
    } else {
        result.train_set =
            load_csv_dataset(config.data.csv_path, config.model.input_dim, config.model.classes);
        const std::string test_path = config.data.csv_test_path.empty()
                                          ? config.data.csv_path
                                          : config.data.csv_test_path;
        result.eval_set = load_csv_dataset(test_path, config.model.input_dim,
                                           config.model.classes);
    }

    train_loop(config, result.train_set, result.params, result.state, &result.reports,
               &result.report_epochs);

    result.final_train_acc = model::accuracy(config.model, result.params, result.train_set);
    result.final_eval_acc = model::accuracy(config.model, result.params, result.eval_set);
    if (!result.reports.empty()) {
        double s = 0.0;
        for (const optim::StepReport& r : result.reports) s += r.mask_ones_fraction;
        result.mask_fraction_mean = s / static_cast<double>(result.reports.size());
    }
    return result;
}

std::string run_csv_text(const RunConfig& config, const TrainResult& result) {
    const bool rose_cols = uses_rose(config.mode);
    std::string out = "step,epoch,loss_sce,loss_kl,mask_ones_fraction,grad_norm,update_norm";
    if (rose_cols) out += ",mean_first_risk,mean_second_risk";
    out += "\n";
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
        const optim::StepReport& r = result.reports[i];
        out += std::to_string(r.step);
        out += "," + std::to_string(result.report_epochs[i]);
        out += "," + fmt17(r.loss_sce);
        out += "," + fmt17(r.kl_computed ? r.loss_kl : 0.0);
        out += "," + fmt17(r.mask_ones_fraction);
        out += "," + fmt17(r.grad_norm);
        out += "," + fmt17(r.update_norm);
        if (rose_cols) {
            out += "," + fmt17(r.mean_first_risk);
            out += "," + fmt17(r.mean_second_risk);
        }
        out += "\n";
    }
    return out;
}

json summary_json(const TrainResult& result) {
    return json{{"final_train_acc", result.final_train_acc},
                {"final_eval_acc", result.final_eval_acc},
                {"mask_fraction_mean", result.mask_fraction_mean}};
}

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("cannot write " + path);
    f << text;
    f.close();
    if (!f) throw data_error("write failed for " + path);
}

}  // namespace

void write_train_outputs(const std::string& out_dir, const RunConfig& config,
                         const TrainResult& result) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/run.csv", run_csv_text(config, result));
    write_text_file(out_dir + "/summary.json", summary_json(result).dump(2) + "\n");
    checkpoint::CheckpointData ckpt;
    ckpt.config = serialize_config(config);
    ckpt.step = result.state.t;
    ckpt.params = result.params;
    checkpoint::save_checkpoint(out_dir + "/checkpoint.json", ckpt);
}

RunConfig default_probe_config(const std::string& strategy, probe::SurfaceKind task,
                               std::uint64_t seed) {
    RunConfig c;
    c.seed = seed;
    c.epochs = 8;
    c.batch_size = 16;
    c.model.input_dim = 5;
    c.model.hidden_dims = {32, 32};
    c.model.classes = 2;
    c.model.activation = model::Activation::tanh;
    c.model.dropout_rate = 0.1;
    c.optimizer.lr = 0.02;
    c.optimizer.weight_decay = 0.01;
    c.data.kind = DataSpec::Kind::probe;
    c.data.probe.surface_kind = task;
    c.data.probe.core_dim = 4;
    c.data.probe.noise_std = 0.3;
    c.data.probe.train_size = 512;
    c.data.probe.test_size = 2048;
    c.data.probe.seed = seed;

    if (strategy == "vanilla") {
        c.mode = Mode::vanilla;
    } else {
        c.mode = Mode::rose;
        c.rose.strategy = strategy_from(strategy);
        c.rose.c_h_first = 0.45;
        c.rose.c_h_second = 0.45;
        c.rose.gamma = 0.5;
        c.rose.granularity = risk::Granularity::scalar;
    }
    return c;
}

namespace {

// Warm-start protocol for probe runs. Every strategy fine-tunes the same
// warm model: plain AdamW trained on examples from the disambiguating
// distribution of a derived seed, where the surface cue is a fair coin and
// only the core signal predicts the label. The fine-tuning phase then sees
// the ambiguous split, whose cue agrees with the label on every example, so
// the run measures how much of the core solution each strategy gives up to
// the cue shortcut.
constexpr std::size_t kProbeWarmEpochs = 12;
constexpr std::size_t kProbeWarmSize = 4096;
constexpr std::uint64_t kProbeWarmSeedSalt = 0x517cc1b727220a95ull;

}  // namespace

ProbeRow probe_run(const std::string& strategy, probe::SurfaceKind task, std::uint64_t seed) {
    const RunConfig config = default_probe_config(strategy, task, seed);
    auto [train, test] = probe::generate_probe_task(config.data.probe);

    probe::ProbeTaskSpec warm_spec = config.data.probe;
    warm_spec.seed = seed ^ kProbeWarmSeedSalt;
    warm_spec.test_size = kProbeWarmSize;
    const probe::LabeledSet warm = probe::generate_probe_task(warm_spec).second;

    model::ParamSet params = model::init_params(config.model, config.seed);
    optim::OptimizerState warm_state = optim::OptimizerState::init(params);
    RunConfig warm_cfg = config;
    warm_cfg.mode = Mode::vanilla;
    warm_cfg.epochs = kProbeWarmEpochs;
    train_loop(warm_cfg, warm.data, params, warm_state, nullptr, nullptr);

    // Fresh optimizer for the strategy under test; the warm phase hands over
    // parameters only.
    optim::OptimizerState fine_state = optim::OptimizerState::init(params);
    train_loop(config, train.data, params, fine_state, nullptr, nullptr);

    ProbeRow row;
    row.seed = seed;
    row.strategy = strategy;
    const std::vector<std::size_t> preds = model::predict(config.model, params, test.data.x);
    row.mcc = probe::mcc(preds, test.data.y);
    row.clean_acc = model::accuracy(config.model, params, test.data);
    row.gaussian_acc =
        probe::perturbation_eval(config.model, params, test, config.data.probe,
                                 probe::Perturbation::gaussian, kProbeGaussianSigma, seed);
    row.surface_flip_acc =
        probe::perturbation_eval(config.model, params, test, config.data.probe,
                                 probe::Perturbation::surface_flip, 0.0, seed);
    return row;
}

// ---- commands -----------------------------------------------------------

namespace {

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    const RunConfig config = load_config_file(config_path);
    log::info("training mode=" + mode_name(config.mode) + " seed=" +
              std::to_string(config.seed));
    const TrainResult result = run_train(config);
    write_train_outputs(out_dir, config, result);
    log::info("wrote " + out_dir + "/checkpoint.json after " +
              std::to_string(result.state.t) + " steps");
    std::printf("%s\n", summary_json(result).dump(2).c_str());
    return 0;
}

struct LoadedCheckpoint {
    RunConfig config;
    checkpoint::CheckpointData data;
};

LoadedCheckpoint load_run_checkpoint(const std::string& path) {
    LoadedCheckpoint out;
    out.data = checkpoint::load_checkpoint(path);
    out.config = parse_config(out.data.config);
    const model::ParamSet expected = model::init_params(out.config.model, out.config.seed);
    if (!expected.same_structure(out.data.params)) {
        throw data_error("checkpoint: parameter groups do not match the stored model spec");
    }
    return out;
}

model::Dataset eval_split_for(const RunConfig& config, std::vector<int>* flags) {
    if (config.data.kind == DataSpec::Kind::probe) {
        auto [train, test] = probe::generate_probe_task(config.data.probe);
        if (flags) *flags = test.surface_flag;
        return std::move(test.data);
    }
    const std::string path = config.data.csv_test_path.empty() ? config.data.csv_path
                                                               : config.data.csv_test_path;
    return load_csv_dataset(path, config.model.input_dim, config.model.classes);
}

int cmd_eval(const std::string& ckpt_path, const std::string& perturb) {
    const LoadedCheckpoint ckpt = load_run_checkpoint(ckpt_path);
    std::vector<int> flags;
    const model::Dataset eval_set = eval_split_for(ckpt.config, &flags);

    json out;
    out["accuracy"] = model::accuracy(ckpt.config.model, ckpt.data.params, eval_set);
    out["loss"] = landscape::dataset_loss(ckpt.config.model, ckpt.data.params, eval_set);

    if (!perturb.empty()) {
        probe::LabeledSet set;
        set.data = eval_set;
        set.surface_flag = flags;
        probe::Perturbation kind;
        double sigma = 0.0;
        if (perturb == "surface_flip") {
            kind = probe::Perturbation::surface_flip;
            if (ckpt.config.data.kind != DataSpec::Kind::probe) {
                throw config_error("eval: surface_flip needs a probe data source");
            }
        } else if (perturb.rfind("gaussian:", 0) == 0) {
            kind = probe::Perturbation::gaussian;
            const std::string arg = perturb.substr(9);
            try {
                std::size_t used = 0;
                sigma = std::stod(arg, &used);
                if (used != arg.size() || !(sigma >= 0.0)) throw std::invalid_argument(arg);
            } catch (const std::exception&) {
                throw config_error("eval: bad gaussian sigma '" + arg + "'");
            }
        } else {
            throw config_error("eval: unknown perturbation '" + perturb +
                               "' (expected gaussian:<sigma> or surface_flip)");
        }
        out["perturbed_accuracy"] =
            probe::perturbation_eval(ckpt.config.model, ckpt.data.params, set,
                                     ckpt.config.data.probe, kind, sigma, ckpt.config.seed);
    }
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

int cmd_landscape(const std::string& mode, const std::string& ckpt_a_path,
                  const std::string& ckpt_b_path, std::uint64_t seed, std::string out_path) {
    if (mode != "1d" && mode != "2d") {
        throw config_error("landscape: mode must be 1d or 2d");
    }
    if (mode == "1d" && ckpt_b_path.empty()) throw config_error("landscape: 1d needs --ckpt-b");
    const LoadedCheckpoint a = load_run_checkpoint(ckpt_a_path);
    const model::Dataset eval_set = eval_split_for(a.config, nullptr);

    if (mode == "1d") {
        const LoadedCheckpoint b = load_run_checkpoint(ckpt_b_path);
        if (!a.data.params.same_structure(b.data.params)) {
            throw data_error("landscape: checkpoints have different parameter structure");
        }
        const landscape::Grid1D grid =
            landscape::interp_1d(a.config.model, a.data.params, b.data.params, eval_set);
        if (out_path.empty()) out_path = "landscape_1d.csv";
        std::string csv = "alpha,loss,accuracy\n";
        for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
            csv += fmt17(grid.alphas[i]) + "," + fmt17(grid.losses[i]) + "," +
                   fmt17(grid.accuracies[i]) + "\n";
        }
        write_text_file(out_path, csv);
        const json out = {
            {"loss_a", landscape::dataset_loss(a.config.model, a.data.params, eval_set)},
            {"loss_b", landscape::dataset_loss(b.config.model, b.data.params, eval_set)},
            {"min_loss", *std::min_element(grid.losses.begin(), grid.losses.end())}};
        std::printf("%s\n", out.dump(2).c_str());
        return 0;
    }
    const landscape::Grid2D grid =
        landscape::surface_2d(a.config.model, a.data.params, eval_set, seed);
    if (out_path.empty()) out_path = "landscape_2d.csv";
    std::string csv = "alpha,beta,loss\n";
    for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
        for (std::size_t j = 0; j < grid.betas.size(); ++j) {
            csv += fmt17(grid.alphas[i]) + "," + fmt17(grid.betas[j]) + "," +
                   fmt17(grid.losses[i * grid.betas.size() + j]) + "\n";
        }
    }
    write_text_file(out_path, csv);
    const landscape::FlatnessSummary s = landscape::flatness_summary(grid);
    const json out = {{"center_loss", s.center_loss},
                      {"boundary_mean", s.boundary_mean},
                      {"basin_fraction", s.basin_fraction}};
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

int cmd_probe(const std::string& strategy, const std::string& task_name,
              const std::string& seeds_arg, std::string out_path) {
    static const std::set<std::string> strategies = {"vanilla", "first", "second", "ensemble"};
    if (!strategies.count(strategy)) {
        throw config_error("probe: unknown strategy '" + strategy + "'");
    }
    const probe::SurfaceKind task = surface_from(task_name);
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(seeds_arg);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            seeds.push_back(std::stoull(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw config_error("probe: bad seed list entry '" + cell + "'");
        }
    }
    if (seeds.empty()) throw config_error("probe: empty seed list");

    if (out_path.empty()) out_path = "probe_results.csv";
    std::string csv = "seed,strategy,mcc,clean_acc,gaussian_acc,surface_flip_acc\n";
    double sum_mcc = 0, sum_clean = 0, sum_gauss = 0, sum_flip = 0;
    for (std::uint64_t seed : seeds) {
        log::info("probe strategy=" + strategy + " seed=" + std::to_string(seed));
        const ProbeRow row = probe_run(strategy, task, seed);
        csv += std::to_string(row.seed) + "," + row.strategy + "," + fmt17(row.mcc) + "," +
               fmt17(row.clean_acc) + "," + fmt17(row.gaussian_acc) + "," +
               fmt17(row.surface_flip_acc) + "\n";
        sum_mcc += row.mcc;
        sum_clean += row.clean_acc;
        sum_gauss += row.gaussian_acc;
        sum_flip += row.surface_flip_acc;
    }
    write_text_file(out_path, csv);
    const double n = static_cast<double>(seeds.size());
    const json out = {{"strategy", strategy},
                      {"task", task_name},
                      {"mean_mcc", sum_mcc / n},
                      {"mean_clean_acc", sum_clean / n},
                      {"mean_gaussian_acc", sum_gauss / n},
                      {"mean_surface_flip_acc", sum_flip / n}};
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

void print_error(const std::string& kind, const std::string& msg) {
    const json err = {{"kind", kind}, {"error", msg}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"selective fine-tuning toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    CLI::App* train = app.add_subcommand("train", "train a model from a JSON config");
    train->add_option("--config", config_path, "JSON run configuration")->required();
    train->add_option("--out", out_dir, "output directory")->required();

    std::string ckpt_path, perturb;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", ckpt_path, "checkpoint manifest path")->required();
    eval->add_option("--perturb", perturb, "gaussian:<sigma> or surface_flip");

    std::string ls_mode, ls_a, ls_b, ls_out;
    std::uint64_t ls_seed = 0;
    CLI::App* ls = app.add_subcommand("landscape", "loss landscape grids");
    ls->add_option("--mode", ls_mode, "1d or 2d")->required();
    ls->add_option("--ckpt", ls_a, "checkpoint manifest path")->required();
    ls->add_option("--ckpt-b", ls_b, "second checkpoint (1d)");
    ls->add_option("--seed", ls_seed, "direction seed")->required();
    ls->add_option("--out", ls_out, "output CSV path");

    std::string pr_strategy, pr_task = "indicator", pr_seeds = "1,2,3,4,5", pr_out;
    CLI::App* pr = app.add_subcommand("probe", "core-vs-surface preference probe");
    pr->add_option("--strategy", pr_strategy, "vanilla|first|second|ensemble")->required();
    pr->add_option("--task", pr_task, "indicator or magnitude");
    pr->add_option("--seeds", pr_seeds, "comma-separated seed list");
    pr->add_option("--out", pr_out, "output CSV path");

    std::vector<const char*> argv;
    argv.push_back("rose");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("config", e.what());
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir);
        if (eval->parsed()) return cmd_eval(ckpt_path, perturb);
        if (ls->parsed()) return cmd_landscape(ls_mode, ls_a, ls_b, ls_seed, ls_out);
        if (pr->parsed()) return cmd_probe(pr_strategy, pr_task, pr_seeds, pr_out);
    } catch (const config_error& e) {
        print_error("config", e.what());
        return 2;
    } catch (const data_error& e) {
        print_error("data", e.what());
        return 3;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    print_error("config", "no subcommand given");
    return 2;
}

}  // namespace rose::run
