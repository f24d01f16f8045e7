// End-to-end checks of the protoflow binary: exit codes, subcommand
// composition, and bit-exact reproduction of a run directory from its echoed
// run_config.json. Invoked as: test_cli <path-to-protoflow>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "protoflow/util.hpp"

namespace fs = std::filesystem;
using protoflow::read_file;
using protoflow::write_file;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
    if (ok) {
        std::cout << "[ok] " << what << "\n";
    } else {
        std::cout << "[FAIL] " << what << "\n";
        ++g_failures;
    }
}

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

int run_all(const std::string& bin);

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: test_cli <protoflow binary>\n";
        return 2;
    }
    try {
        return run_all(argv[1]);
    } catch (const std::exception& e) {
        std::cout << "[FAIL] unexpected exception: " << e.what() << "\n";
        return 1;
    }
}

int run_all(const std::string& bin) {
    const fs::path root = fs::temp_directory_path() / "protoflow_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);

    check(run(bin) == 1, "no arguments exits 1 with usage");
    check(run(bin + " definitely-not-a-command") == 1, "unknown subcommand exits 1");
    check(run(bin + " pretrain --no-such-flag 1 --out " + q(root / "x")) == 1,
          "unknown flag exits 1");
    check(run(bin + " pretrain --data /nonexistent.jsonl --manifest /nonexistent.json --out " +
              q(root / "x")) == 2,
          "missing data file exits 2");

    // tiny but complete dataset
    const fs::path gen_cfg = root / "gen.json";
    write_file(gen_cfg, R"({
      "generator": {"preset": "default", "num_train": 3, "num_val": 1, "num_test": 2,
                     "frames_min": 24, "frames_max": 30, "rare_len_min": 4,
                     "rare_len_max": 6}
    })");
    const fs::path d1 = root / "data1", d2 = root / "data2";
    check(run(bin + " gen-data --config " + q(gen_cfg) + " --seed 5 --out " + q(d1)) == 0,
          "gen-data runs");
    check(run(bin + " gen-data --config " + q(gen_cfg) + " --seed 5 --out " + q(d2)) == 0,
          "gen-data runs again");
    check(read_file(d1 / "data.jsonl") == read_file(d2 / "data.jsonl"),
          "same seed produces identical datasets");
    check(read_file(d1 / "metadata.jsonl") == read_file(d2 / "metadata.jsonl"),
          "same seed produces identical metadata");
    check(fs::exists(d1 / "run_config.json"), "gen-data echoes run_config.json");

    // stage composition on a micro model
    const fs::path train_cfg = root / "train.json";
    write_file(train_cfg, R"({
      "window": 2,
      "train": {"pretrain_epochs": 2, "finetune_epochs": 2, "batch_size": 16, "k": 2,
                 "base_lr": 0.003},
      "encoder": {"hidden_dim": 16, "encoding_dim": 8, "edge_embed_dim": 4, "w_max": 4}
    })");
    const std::string data_flags = " --data " + q(d1 / "data.jsonl") + " --manifest " +
                                   q(d1 / "manifest.json");
    const fs::path pre = root / "pre", init = root / "init", fine = root / "fine",
                   eval = root / "eval";
    check(run(bin + " pretrain --config " + q(train_cfg) + data_flags + " --seed 5 --out " +
              q(pre)) == 0,
          "pretrain runs");
    check(run(bin + " init-prototypes --config " + q(train_cfg) + data_flags +
              " --seed 5 --checkpoint " + q(pre / "checkpoint.pflw") + " --out " +
              q(init)) == 0,
          "init-prototypes runs");
    check(run(bin + " finetune --config " + q(train_cfg) + data_flags +
              " --seed 5 --checkpoint " + q(init / "checkpoint.pflw") + " --out " +
              q(fine)) == 0,
          "finetune runs");
    check(run(bin + " evaluate --config " + q(train_cfg) + data_flags +
              " --seed 5 --checkpoint " + q(fine / "checkpoint.pflw") + " --out " +
              q(eval)) == 0,
          "evaluate consumes what finetune produces");
    check(fs::exists(eval / "metrics.csv"), "evaluate writes metrics.csv");
    check(fs::exists(eval / "embeddings.csv"), "evaluate writes embeddings.csv");

    // evaluating against a pretrain-only checkpoint must fail for finetune
    check(run(bin + " finetune --config " + q(train_cfg) + data_flags +
              " --seed 5 --checkpoint " + q(pre / "checkpoint.pflw") + " --out " +
              q(root / "bad")) == 2,
          "finetune without prototypes exits 2");

    // reproduction from the echoed run config
    const fs::path fine2 = root / "fine2", eval2 = root / "eval2";
    check(run(bin + " finetune --config " + q(fine / "run_config.json") + " --out " +
              q(fine2)) == 0,
          "finetune reruns from its echoed config");
    check(read_file(fine / "checkpoint.pflw") == read_file(fine2 / "checkpoint.pflw"),
          "rerun reproduces the checkpoint byte-for-byte");
    check(read_file(fine / "history_finetune.csv") ==
              read_file(fine2 / "history_finetune.csv"),
          "rerun reproduces the loss history byte-for-byte");
    check(run(bin + " evaluate --config " + q(eval / "run_config.json") + " --out " +
              q(eval2)) == 0,
          "evaluate reruns from its echoed config");
    check(read_file(eval / "metrics.csv") == read_file(eval2 / "metrics.csv"),
          "rerun reproduces metrics.csv byte-for-byte");

    // PROTOFLOW_OUT wins over --out
    const fs::path envdir = root / "envout";
    check(run("PROTOFLOW_OUT=" + q(envdir) + " " + bin + " gen-data --config " +
              q(gen_cfg) + " --seed 5 --out " + q(root / "ignored")) == 0,
          "gen-data with PROTOFLOW_OUT runs");
    check(fs::exists(envdir / "data.jsonl") && !fs::exists(root / "ignored"),
          "PROTOFLOW_OUT overrides --out");

    // explain on the finetuned artifacts
    const fs::path expl = root / "explain";
    check(run(bin + " explain --config " + q(train_cfg) + data_flags +
              " --seed 5 --checkpoint " + q(fine / "checkpoint.pflw") +
              " --video video_004 --out " + q(expl)) == 0,
          "explain runs");
    check(fs::exists(expl / "deviation.jsonl") && fs::exists(expl / "node_outliers.json"),
          "explain writes deviation.jsonl and node_outliers.json");

    // sweep over a reduced window list on the micro dataset
    const fs::path sweep_cfg = root / "sweep.json";
    write_file(sweep_cfg, R"({
      "train": {"pretrain_epochs": 1, "finetune_epochs": 1, "batch_size": 16, "k": 1,
                 "base_lr": 0.003},
      "encoder": {"hidden_dim": 8, "encoding_dim": 4, "edge_embed_dim": 3, "w_max": 4},
      "run_seeds": [5],
      "sweep_windows": [1, 5, 10, 20, 30, 60]
    })");
    const fs::path sweep = root / "sweep";
    check(run(bin + " sweep-window --config " + q(sweep_cfg) + data_flags + " --out " +
              q(sweep)) == 0,
          "sweep-window runs");
    const std::string sweep_csv = read_file(sweep / "sweep.csv");
    check(std::count(sweep_csv.begin(), sweep_csv.end(), '\n') == 7,
          "sweep.csv holds one row per window size plus a header");

    if (g_failures == 0) fs::remove_all(root);
    std::cout << (g_failures ? "FAILED" : "PASSED") << "\n";
    return g_failures == 0 ? 0 : 1;
}
