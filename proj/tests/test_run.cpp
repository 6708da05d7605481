#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rose/checkpoint.hpp"
#include "rose/errors.hpp"
#include "rose/kernels.hpp"
#include "rose/run.hpp"

using namespace rose;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("rose_run_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
}

json tiny_probe_json(const std::string& mode) {
    json j = {
        {"mode", mode},
        {"seed", 9},
        {"epochs", 2},
        {"batch_size", 16},
        {"model",
         {{"input_dim", 5}, {"hidden_dims", {8}}, {"classes", 2}, {"dropout_rate", 0.1}}},
        {"optimizer", {{"lr", 0.01}}},
        {"data",
         {{"kind", "probe"},
          {"surface_kind", "indicator"},
          {"train_size", 64},
          {"test_size", 64}}},
    };
    if (mode == "rose" || mode == "rdrop_rose") {
        j["rose"] = {{"strategy", "ensemble"}, {"c_h_first", 0.7}, {"c_h_second", 0.7}};
    }
    return j;
}

bool parse_fails_mentioning(const json& j, const std::string& needle) {
    try {
        run::parse_config(j);
    } catch (const config_error& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

int run_bin(const std::string& args) {
    const std::string cmd = std::string("\"") + ROSE_BIN_PATH + "\" " + args;
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("parsing fills documented defaults") {
    const json j = {
        {"mode", "vanilla"},
        {"model", {{"input_dim", 5}, {"hidden_dims", {8}}, {"classes", 2}}},
        {"data", {{"kind", "probe"}, {"surface_kind", "indicator"}}},
    };
    const run::RunConfig c = run::parse_config(j);
    CHECK(c.mode == run::Mode::vanilla);
    CHECK(c.seed == 1);
    CHECK(c.epochs == 5);
    CHECK(c.batch_size == 32);
    CHECK(c.model.activation == model::Activation::tanh);
    CHECK(c.model.dropout_rate == 0.1);
    CHECK(c.optimizer.lr == optim::AdamwHyper{}.lr);
    CHECK(c.data.kind == run::DataSpec::Kind::probe);
    CHECK(c.data.probe.core_dim == 4);
    CHECK(c.data.probe.train_size == 512);
    CHECK(c.data.probe.test_size == 2048);
    CHECK(c.data.probe.seed == 1);  // inherits the run seed

    json seeded = j;
    seeded["seed"] = 77;
    CHECK(run::parse_config(seeded).data.probe.seed == 77);
}

TEST_CASE("unknown keys are named in the error at every level") {
    json j = tiny_probe_json("rose");
    j["bogus"] = 1;
    CHECK(parse_fails_mentioning(j, "'bogus'"));

    j = tiny_probe_json("vanilla");
    j["model"]["width"] = 3;
    CHECK(parse_fails_mentioning(j, "'width'"));

    j = tiny_probe_json("vanilla");
    j["optimizer"]["beta3"] = 0.5;
    CHECK(parse_fails_mentioning(j, "'beta3'"));

    j = tiny_probe_json("rose");
    j["rose"]["tau"] = 0.1;
    CHECK(parse_fails_mentioning(j, "'tau'"));

    j = tiny_probe_json("vanilla");
    j["data"]["path"] = "x.csv";
    CHECK(parse_fails_mentioning(j, "'path'"));
}

TEST_CASE("mode coupling rules are enforced") {
    json j = tiny_probe_json("vanilla");
    j["rose"] = {{"strategy", "first"}};
    CHECK(parse_fails_mentioning(j, "forbids a rose block"));

    j = tiny_probe_json("rose");
    j.erase("rose");
    CHECK(parse_fails_mentioning(j, "requires a rose block"));

    j = tiny_probe_json("vanilla");
    j["rdrop_weight"] = 0.5;
    CHECK(parse_fails_mentioning(j, "rdrop_weight"));

    j = tiny_probe_json("rdrop");
    j["sce_pass"] = "clean";
    CHECK(parse_fails_mentioning(j, "sce_pass"));

    j = tiny_probe_json("vanilla");
    j["batch_size"] = 0;
    CHECK(parse_fails_mentioning(j, "batch_size"));

    // The model must accept the probe inputs.
    j = tiny_probe_json("vanilla");
    j["model"]["input_dim"] = 7;
    CHECK_THROWS_AS(run::parse_config(j), config_error);

    // First-order risk needs dropout.
    j = tiny_probe_json("rose");
    j["model"]["dropout_rate"] = 0.0;
    CHECK(parse_fails_mentioning(j, "dropout"));
}

TEST_CASE("serialization round-trips exactly") {
    for (const std::string mode : {"vanilla", "rose", "rdrop", "rdrop_rose"}) {
        const run::RunConfig c = run::parse_config(tiny_probe_json(mode));
        const json once = run::serialize_config(c);
        const json twice = run::serialize_config(run::parse_config(once));
        CHECK(once == twice);
    }
}

TEST_CASE("csv datasets load exactly and fail with line numbers") {
    const fs::path dir = fresh_dir("csv");
    const fs::path good = dir / "good.csv";
    spit(good, "0.5,1.5,0\n-1,2e-3,1\n");
    const model::Dataset d = run::load_csv_dataset(good.string(), 2, 2);
    REQUIRE(d.y.size() == 2);
    CHECK(d.x.data == std::vector<double>{0.5, 1.5, -1.0, 2e-3});
    CHECK(d.y == std::vector<std::size_t>{0, 1});

    const auto fails_mentioning = [&](const std::string& body, const std::string& needle) {
        const fs::path p = dir / "bad.csv";
        spit(p, body);
        try {
            run::load_csv_dataset(p.string(), 2, 2);
        } catch (const data_error& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_mentioning("0.5,1.5,0\n1,2\n", ":2:"));
    CHECK(fails_mentioning("a,1.5,0\n", ":1:"));
    CHECK(fails_mentioning("0.5,1.5,7\n", "label 7 outside [0, 2)"));
    CHECK(fails_mentioning("", "no examples"));
    CHECK_THROWS_AS(run::load_csv_dataset((dir / "absent.csv").string(), 2, 2), data_error);
}

TEST_CASE("run_train walks epochs and batches deterministically") {
    const run::RunConfig c = run::parse_config(tiny_probe_json("vanilla"));
    const run::TrainResult r = run::run_train(c);

    // 64 examples, batch 16, 2 epochs: 8 steps.
    REQUIRE(r.reports.size() == 8);
    REQUIRE(r.report_epochs.size() == 8);
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        CHECK(r.reports[i].step == i + 1);
        CHECK(r.report_epochs[i] == i / 4 + 1);  // epochs count from 1
        CHECK(r.reports[i].mask_ones_fraction == 1.0);
    }
    CHECK(r.state.t == 8);
    CHECK(r.mask_fraction_mean == 1.0);
    CHECK(r.final_train_acc >= 0.0);
    CHECK(r.final_train_acc <= 1.0);
    CHECK(r.final_eval_acc >= 0.0);
    CHECK(r.final_eval_acc <= 1.0);
    CHECK(r.train_set.y.size() == 64);
    CHECK(r.eval_set.y.size() == 64);
    CHECK(r.eval_surface_flags.size() == 64);

    const run::TrainResult again = run::run_train(c);
    for (std::size_t g = 0; g < r.params.group_count(); ++g) {
        CHECK(std::memcmp(r.params.tensors[g].data.data(), again.params.tensors[g].data.data(),
                          r.params.tensors[g].numel() * sizeof(double)) == 0);
    }
    CHECK(run::run_csv_text(c, r) == run::run_csv_text(c, again));
}

TEST_CASE("rose runs mask updates and extend the csv header") {
    const run::RunConfig c = run::parse_config(tiny_probe_json("rose"));
    const run::TrainResult r = run::run_train(c);
    CHECK(r.mask_fraction_mean > 0.0);
    CHECK(r.mask_fraction_mean < 1.0);
    for (const optim::StepReport& rep : r.reports) {
        CHECK(rep.risks_computed);
        CHECK(rep.kl_computed);
    }

    const std::string text = run::run_csv_text(c, r);
    const std::string header = text.substr(0, text.find('\n'));
    CHECK(header ==
          "step,epoch,loss_sce,loss_kl,mask_ones_fraction,grad_norm,update_norm,"
          "mean_first_risk,mean_second_risk");
    CHECK(line_count(text) == r.reports.size() + 1);

    const run::RunConfig cv = run::parse_config(tiny_probe_json("vanilla"));
    const run::TrainResult rv = run::run_train(cv);
    const std::string tv = run::run_csv_text(cv, rv);
    CHECK(tv.substr(0, tv.find('\n')) ==
          "step,epoch,loss_sce,loss_kl,mask_ones_fraction,grad_norm,update_norm");
}

TEST_CASE("write_train_outputs produces the full artifact set") {
    const fs::path dir = fresh_dir("outputs");
    const run::RunConfig c = run::parse_config(tiny_probe_json("rose"));
    const run::TrainResult r = run::run_train(c);
    run::write_train_outputs((dir / "out").string(), c, r);

    CHECK(fs::exists(dir / "out" / "run.csv"));
    CHECK(fs::exists(dir / "out" / "summary.json"));
    CHECK(fs::exists(dir / "out" / "checkpoint.json"));
    CHECK(fs::exists(dir / "out" / "checkpoint.bin"));

    const json summary = json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(summary.at("final_eval_acc").get<double>() == r.final_eval_acc);
    CHECK(summary.at("mask_fraction_mean").get<double>() == r.mask_fraction_mean);

    const checkpoint::CheckpointData ck =
        checkpoint::load_checkpoint((dir / "out" / "checkpoint.json").string());
    CHECK(ck.step == r.state.t);
    CHECK(ck.params.same_structure(r.params));
    CHECK(run::serialize_config(run::parse_config(ck.config)) == ck.config);
}

TEST_CASE("run_cli rejects bad invocations without touching the filesystem") {
    CHECK(run::run_cli({}) == 2);
    CHECK(run::run_cli({"trane"}) == 2);
    CHECK(run::run_cli({"train"}) == 2);
    CHECK(run::run_cli({"train", "--config", "/nonexistent.json", "--out", "/tmp/x"}) == 2);
    CHECK(run::run_cli({"--help"}) == 0);
}

TEST_CASE("the binary round-trips train, eval, and landscape") {
    const fs::path dir = fresh_dir("cli");
    const fs::path cfg = dir / "cfg.json";
    spit(cfg, tiny_probe_json("rose").dump(2));

    const std::string out_a = (dir / "a").string();
    const std::string out_b = (dir / "b").string();
    REQUIRE(run_bin("train --config " + cfg.string() + " --out " + out_a +
                    " > /dev/null") == 0);
    REQUIRE(run_bin("train --config " + cfg.string() + " --out " + out_b +
                    " > /dev/null") == 0);
    // Identical config and seed: byte-identical artifacts.
    CHECK(slurp(out_a + "/run.csv") == slurp(out_b + "/run.csv"));
    CHECK(slurp(out_a + "/checkpoint.bin") == slurp(out_b + "/checkpoint.bin"));
    CHECK(slurp(out_a + "/summary.json") == slurp(out_b + "/summary.json"));

    const fs::path eval_out = dir / "eval.json";
    REQUIRE(run_bin("eval --checkpoint " + out_a + "/checkpoint.json > " +
                    eval_out.string()) == 0);
    const json ev = json::parse(slurp(eval_out));
    const json summary = json::parse(slurp(out_a + "/summary.json"));
    CHECK(ev.at("accuracy").get<double>() == summary.at("final_eval_acc").get<double>());

    REQUIRE(run_bin("eval --checkpoint " + out_a + "/checkpoint.json --perturb gaussian:0.5 > " +
                    eval_out.string()) == 0);
    const json evp = json::parse(slurp(eval_out));
    CHECK(evp.at("perturbed_accuracy").get<double>() >= 0.0);
    CHECK(evp.at("perturbed_accuracy").get<double>() <= 1.0);

    const fs::path ls1 = dir / "curve.csv";
    const fs::path ls1_json = dir / "curve.json";
    REQUIRE(run_bin("landscape --mode 1d --ckpt " + out_a + "/checkpoint.json --ckpt-b " +
                    out_b + "/checkpoint.json --seed 3 --out " + ls1.string() + " > " +
                    ls1_json.string()) == 0);
    CHECK(line_count(slurp(ls1)) == 52);  // header + 51 grid rows
    const json c1 = json::parse(slurp(ls1_json));
    // The two checkpoints are identical here, so the endpoints agree.
    CHECK(c1.at("loss_a").get<double>() == c1.at("loss_b").get<double>());

    const fs::path ls2 = dir / "surface.csv";
    const fs::path ls2_json = dir / "surface.json";
    REQUIRE(run_bin("landscape --mode 2d --ckpt " + out_a + "/checkpoint.json --seed 3 --out " +
                    ls2.string() + " > " + ls2_json.string()) == 0);
    CHECK(line_count(slurp(ls2)) == 2602);  // header + 51*51 grid rows
    const json c2 = json::parse(slurp(ls2_json));
    CHECK(c2.at("basin_fraction").get<double>() > 0.0);

    CHECK(run_bin("eval --checkpoint " + (dir / "nope.json").string() + " 2> /dev/null") == 3);
    CHECK(run_bin("landscape --mode 3d --ckpt x --seed 1 2> /dev/null") == 2);
    CHECK(run_bin("probe --strategy bogus 2> /dev/null") == 2);
}

TEST_CASE("kernel backend selection cannot change results") {
    const fs::path dir = fresh_dir("backends");
    const fs::path cfg = dir / "cfg.json";
    spit(cfg, tiny_probe_json("rose").dump(2));

    const std::string out_s = (dir / "scalar").string();
    const std::string out_v = (dir / "vector").string();
    REQUIRE(run_bin("train --config " + cfg.string() + " --out " + out_s +
                    " > /dev/null") == 0);
    const std::string prefix = "ROSE_KERNELS=scalar ";
    const std::string cmd = prefix + "\"" + ROSE_BIN_PATH + "\" train --config " +
                            cfg.string() + " --out " + out_v + " > /dev/null";
    const int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    REQUIRE(WEXITSTATUS(rc) == 0);

    CHECK(slurp(out_s + "/run.csv") == slurp(out_v + "/run.csv"));
    CHECK(slurp(out_s + "/checkpoint.bin") == slurp(out_v + "/checkpoint.bin"));
}
