/*
 * Copyright 2026 The Stormnet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "stormnet/cli.hpp"
#include "stormnet/container.hpp"
#include "stormnet/data.hpp"
#include "stormnet/evaluate.hpp"
#include "stormnet/model.hpp"
#include "stormnet/task.hpp"

namespace stormnet {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "stormnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

// One small dataset shared by every test in this file.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    unsetenv("STORMNET_SEED");
    root_ = oracle::temp_dir("cli");
    const auto r = run({"generate", "--seed", "3", "--out", (root_ / "data").string(), "--train", "120", "--val",
                        "60", "--test", "40"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static fs::path data() { return root_ / "data"; }
  static fs::path dir(const std::string& name) { return root_ / name; }
  static inline fs::path root_;
};

TEST_F(Cli, GenerateWritesAVerifiableDataset) {
  const auto d = read_dataset(data());
  EXPECT_EQ(d.train.size(), 120u);
  EXPECT_EQ(d.val.size(), 60u);
  EXPECT_EQ(d.test.size(), 40u);
  const auto resolved = read_json(data() / "resolved_config.json");
  EXPECT_EQ(resolved["seed"], 3);
}

TEST_F(Cli, GenerateIsByteIdentical) {
  const auto again = dir("again");
  ASSERT_EQ(run({"generate", "--seed", "3", "--out", again.string(), "--train", "120", "--val", "60", "--test", "40"})
                .code,
            0);
  for (const auto& entry : fs::directory_iterator(data())) {
    if (entry.path().filename() == "resolved_config.json") continue;  // records --out
    EXPECT_EQ(slurp(entry.path()), slurp(again / entry.path().filename())) << entry.path();
  }
  auto a = read_json(data() / "resolved_config.json"), b = read_json(again / "resolved_config.json");
  a.erase("out");
  b.erase("out");
  EXPECT_EQ(a, b);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"generate", "--out", dir("zero").string(), "--train", "0"}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--data", data().string(), "--model", "unet", "--task", "cls", "--out",
                 dir("bad").string()})
                .code,
            cli::kUsage);
  const auto bogus = run({"explain", "--model", "m", "--data", data().string(), "--method", "bogus"});
  EXPECT_EQ(bogus.code, cli::kUsage);
  EXPECT_NE(bogus.err.find("--method"), std::string::npos);
  EXPECT_EQ(run({"train", "--model", "cnn"}).code, cli::kUsage);
  EXPECT_EQ(run({}).code, cli::kUsage);
}

TEST_F(Cli, MissingDataExitsThree) {
  EXPECT_EQ(run({"train", "--data", dir("nowhere").string(), "--model", "mlp_eng", "--task", "cls", "--out",
                 dir("x").string()})
                .code,
            cli::kIo);
}

TEST_F(Cli, TrainEvalExplainRoundTrip) {
  const auto out = dir("mlp");
  auto r = run({"train", "--data", data().string(), "--model", "mlp_eng", "--task", "cls", "--epochs", "3",
                "--seed", "1", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"model.stormnet", "train_log.csv", "eval_val.json", "eval_val_sweep.csv",
                        "eval_val_roc.csv", "resolved_config.json", "train_summary.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto summary = read_json(out / "train_summary.json");
  EXPECT_EQ(summary["train_samples"], 120);

  // Sweep CSV: header plus 21 rows.
  const auto sweep = slurp(out / "eval_val_sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 22);

  // Replaying the resolved config gives the same model.
  const auto replay = dir("replay");
  r = run({"train", "--config", (out / "resolved_config.json").string(), "--out", replay.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(replay / "model.stormnet"), slurp(out / "model.stormnet"));
  EXPECT_EQ(slurp(replay / "eval_val.json"), slurp(out / "eval_val.json"));

  // Test-split evaluation works without the training arrays and is
  // byte-reproducible.
  const auto copy = dir("data_no_train");
  fs::copy(data(), copy);
  fs::remove(copy / "train_images.bin");
  fs::remove(copy / "train_flashes.bin");
  const auto e1 = dir("eval1"), e2 = dir("eval2");
  for (const auto& e : {e1, e2}) {
    r = run({"eval", "--model", (out / "model.stormnet").string(), "--data", copy.string(), "--split", "test",
             "--out", e.string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"eval_test.json", "eval_test_sweep.csv", "eval_test_roc.csv"})
    EXPECT_EQ(slurp(e1 / f), slurp(e2 / f)) << f;
  EXPECT_EQ(read_json(e1 / "eval_test.json")["count"], 40);

  // Image mode only for scalar models.
  EXPECT_EQ(run({"eval", "--model", (out / "model.stormnet").string(), "--data", data().string(), "--split", "val",
                 "--mode", "pixel", "--out", dir("e3").string()})
                .code,
            cli::kUsage);

  const auto ex = dir("perm");
  r = run({"explain", "--model", (out / "model.stormnet").string(), "--data", data().string(), "--method", "perm",
           "--resamples", "2", "--sample-size", "30", "--out", ex.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ex / "importance.json"));
  EXPECT_TRUE(fs::exists(ex / "importance.csv"));
  EXPECT_EQ(run({"explain", "--model", (out / "model.stormnet").string(), "--data", data().string(), "--method",
                 "perm", "--sample-size", "1000", "--out", ex.string()})
                .code,
            cli::kUsage);
  // Attribution needs image inputs.
  EXPECT_EQ(run({"explain", "--model", (out / "model.stormnet").string(), "--data", data().string(), "--method",
                 "attr", "--out", dir("attr_bad").string()})
                .code,
            cli::kUsage);
}

TEST_F(Cli, RegressionExcludesZeroFlashImages) {
  const auto out = dir("reg");
  const auto r = run({"train", "--data", data().string(), "--model", "mlp_eng", "--task", "reg", "--epochs", "1",
                      "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = read_json(out / "train_summary.json");
  const auto d = read_dataset(data());
  std::size_t with_flash = 0;
  for (std::size_t i = 0; i < d.train.size(); ++i) with_flash += d.train.sample(i).has_lightning();
  EXPECT_EQ(summary["train_samples"], with_flash);
  EXPECT_EQ(summary["excluded_zero_flash"], 120 - with_flash);
  EXPECT_TRUE(fs::exists(out / "eval_val_one_to_one.csv"));
}

TEST_F(Cli, AttributionOnImageModel) {
  const auto out = dir("cnn");
  auto r = run({"train", "--data", data().string(), "--model", "cnn", "--task", "cls", "--epochs", "1", "--filters",
                "4,8", "--hidden", "8", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ex = dir("attr");
  r = run({"explain", "--model", (out / "model.stormnet").string(), "--data", data().string(), "--method", "attr",
           "--samples", "2", "--background", "4", "--steps", "64", "--out", ex.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"attributions.bin", "channel_sums.json", "completeness.csv", "resolved_config.json"})
    EXPECT_TRUE(fs::exists(ex / f)) << f;
  const auto csv = slurp(ex / "completeness.csv");
  EXPECT_EQ(csv.rfind("sample,model_output,expected_value,attribution_sum,completeness_residual\n", 0), 0u);
}

TEST_F(Cli, SearchRecordsTrialsAndBestModelReproduces) {
  const auto out = dir("search");
  const auto r = run({"search", "--data", data().string(), "--model", "mlp_eng", "--task", "cls", "--trials", "2",
                      "--epochs", "2", "--seed", "4", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = read_json(out / "search.json");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0]["rank"], 1);
  Model best = load_model(out / "best_model.stormnet");
  const auto val = make_task_data(read_dataset(data()).val, Task::cls, InputKind::engineered);
  EXPECT_NEAR(validation_metric(Task::cls, best.predict(val.inputs), val.targets), s[0]["metric"].get<double>(), 1e-9);
}

TEST_F(Cli, ConfigFilePrecedenceAndSeedFallback) {
  const auto cfg = dir("cfg.json");
  {
    std::ofstream f(cfg);
    f << R"({"train": 5, "val": 3, "test": 2, "seed": 11})";
  }
  // Flags beat the file, the file beats the environment.
  setenv("STORMNET_SEED", "99", 1);
  const auto a = dir("gen_a");
  ASSERT_EQ(run({"generate", "--config", cfg.string(), "--train", "4", "--out", a.string()}).code, 0);
  auto resolved = read_json(a / "resolved_config.json");
  EXPECT_EQ(resolved["train"], 4);
  EXPECT_EQ(resolved["val"], 3);
  EXPECT_EQ(resolved["seed"], 11);

  const auto b = dir("gen_b");
  ASSERT_EQ(run({"generate", "--train", "2", "--val", "1", "--test", "1", "--out", b.string()}).code, 0);
  EXPECT_EQ(read_json(b / "resolved_config.json")["seed"], 99);
  unsetenv("STORMNET_SEED");

  {
    std::ofstream f(cfg);
    f << R"({"bogus": 1})";
  }
  EXPECT_EQ(run({"generate", "--config", cfg.string(), "--out", dir("gen_c").string()}).code, cli::kUsage);
}

TEST_F(Cli, BinaryExitCodes) {
  auto status = [](const std::string& args) {
    const int s = std::system((std::string(STORMNET_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("generate --train 0 --out " + dir("bin0").string()), 2);
  EXPECT_EQ(status("eval --model " + dir("none.stormnet").string() + " --data " + data().string() + " --out " +
                   dir("bin1").string()),
            3);
}

}  // namespace
}  // namespace stormnet
