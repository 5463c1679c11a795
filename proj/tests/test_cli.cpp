#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gres2net/checkpoint.hpp"
#include "gres2net/cli.hpp"
#include "gres2net/config.hpp"
#include "gres2net/data.hpp"

using namespace gres2net;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("gres2net_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  // Synthetic data plus a small-model config next to it.
  fs::path make_run(const std::string& task, std::size_t epochs, const std::string& extra = "") {
    const fs::path data = root / (task + "_data");
    const std::string size = task == "classification" ? "24" : "300";
    EXPECT_EQ(cli({"synth", "--task", task, "--seed", "7", "--out", data.string(), "--size", size}).code, 0);
    const fs::path cfg = data / "small.cfg";
    write(cfg, slurp(data / "run.cfg") + "model.blocks = 1\nmodel.scales = 3\nmodel.width = 2\nhead.hidden = 4\n" +
                   "train.epochs = " + std::to_string(epochs) + "\ntrain.batch_size = 8\ntrain.lr0 = 0.01\n" + extra);
    return cfg;
  }

  fs::path root;
};

}  // namespace

TEST_F(CliTest, TrainWritesHistoryAndCheckpoints) {
  const fs::path cfg = make_run("classification", 50);
  const fs::path out = root / "out";
  const Outcome r = cli({"train", "--config", cfg.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string history = slurp(out / "history.csv");
  EXPECT_EQ(history.substr(0, history.find('\n')), "epoch,lr,train_loss,train_metric,val_loss,val_metric");
  EXPECT_EQ(lines(history), 51u);
  for (const char* f : {"best.ckpt", "last.ckpt", "metrics.csv", "metrics_repeats.csv", "config.txt"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(lines(slurp(out / "metrics_repeats.csv")), 6u);  // header + 5 repeats
}

TEST_F(CliTest, IdenticalRunsGiveIdenticalArtifacts) {
  const fs::path cfg = make_run("forecasting", 3);
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", (root / "a").string()}).code, 0);
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", (root / "b").string()}).code, 0);
  for (const char* f : {"metrics.csv", "metrics_repeats.csv", "history.csv", "best.ckpt", "last.ckpt"}) {
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", (root / "c").string(), "--seed", "9"}).code, 0);
  EXPECT_NE(slurp(root / "a" / "best.ckpt"), slurp(root / "c" / "best.ckpt"));
}

TEST_F(CliTest, ModelVariantsShareHistorySchema) {
  const fs::path cfg = make_run("classification", 2, "lstm.hidden = 3\nlstm.layers = 1\n");
  std::vector<std::string> headers;
  for (const char* m : {"gres2net", "res2net", "lstm"}) {
    const fs::path out = root / m;
    ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", out.string(), "--model", m}).code, 0) << m;
    const std::string h = slurp(out / "history.csv");
    headers.push_back(h.substr(0, h.find('\n')));
    EXPECT_EQ(lines(h), 3u);
  }
  EXPECT_EQ(headers[0], headers[1]);
  EXPECT_EQ(headers[0], headers[2]);
}

TEST_F(CliTest, EvalReproducesTrainMetrics) {
  for (const std::string task : {"classification", "forecasting"}) {
    const fs::path cfg = make_run(task, 3);
    const fs::path out = root / (task + "_out"), ev = root / (task + "_eval");
    ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", out.string()}).code, 0);
    const Outcome r = cli({"eval", "--checkpoint", (out / "best.ckpt").string(), "--config", cfg.string(), "--out",
                       ev.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(ev / "metrics.csv"), slurp(out / "metrics.csv")) << task;
    // Same data through --data/--schema.
    const fs::path ev2 = root / (task + "_eval2");
    ASSERT_EQ(cli({"eval", "--checkpoint", (out / "best.ckpt").string(), "--data",
                   (cfg.parent_path() / "validation.csv").string(), "--schema",
                   (cfg.parent_path() / "schema.txt").string(), "--out", ev2.string()})
                  .code,
              0);
    EXPECT_EQ(slurp(ev2 / "metrics.csv"), slurp(out / "metrics.csv")) << task;
  }
}

TEST_F(CliTest, ForecastReportHasExactlyFourCriteria) {
  const fs::path cfg = make_run("forecasting", 1);
  const fs::path out = root / "out";
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", out.string()}).code, 0);
  const Outcome r = cli({"eval", "--checkpoint", (out / "best.ckpt").string(), "--config", cfg.string()});
  ASSERT_EQ(r.code, 0);
  for (const char* k : {"RMSE", "MAE", "MAPE", "R2"}) EXPECT_NE(r.out.find(k), std::string::npos) << k;
  const std::string metrics = slurp(out / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "rmse,mae,mape,r2");
}

TEST_F(CliTest, TruncatedCheckpointFailsCleanly) {
  const fs::path cfg = make_run("classification", 1);
  const fs::path out = root / "out";
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", out.string()}).code, 0);
  const std::string bytes = slurp(out / "best.ckpt");
  write(root / "cut.ckpt", bytes.substr(0, bytes.size() / 2));
  const fs::path ev = root / "eval";
  const Outcome r = cli({"eval", "--checkpoint", (root / "cut.ckpt").string(), "--config", cfg.string(), "--out", ev.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(ev));
}

TEST_F(CliTest, ChannelMismatchReportsCounts) {
  const fs::path cfg = make_run("classification", 1);
  const fs::path out = root / "out";
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", out.string()}).code, 0);
  write(root / "two.txt", "task = classification\nfeatures = c1,c2\nlabel = label\nsequence = seq\n");
  const Outcome r = cli({"eval", "--checkpoint", (out / "best.ckpt").string(), "--data",
                     (cfg.parent_path() / "validation.csv").string(), "--schema", (root / "two.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("expects 3 input channels, data has 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, PredictWritesOneRowPerSample) {
  const fs::path cfg = make_run("classification", 1);
  const fs::path out = root / "out";
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", out.string()}).code, 0);
  const Outcome r = cli({"predict", "--checkpoint", (out / "best.ckpt").string(), "--data",
                     (cfg.parent_path() / "validation.csv").string(), "--schema",
                     (cfg.parent_path() / "schema.txt").string(), "--out", (root / "pred.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string p = slurp(root / "pred.csv");
  EXPECT_EQ(p.substr(0, p.find('\n')), "sample,label");
  EXPECT_EQ(lines(p), 25u);
}

TEST_F(CliTest, ResumeContinuesToSameResult) {
  const fs::path full_cfg = make_run("forecasting", 4);
  const fs::path straight = root / "straight", split = root / "split";
  ASSERT_EQ(cli({"train", "--config", full_cfg.string(), "--out", straight.string()}).code, 0);
  const fs::path half_cfg = root / "forecasting_data" / "half.cfg";
  std::string text = slurp(full_cfg);
  text.replace(text.find("train.epochs = 4"), 16, "train.epochs = 2");
  write(half_cfg, text);
  ASSERT_EQ(cli({"train", "--config", half_cfg.string(), "--out", split.string()}).code, 0);
  const Outcome r = cli({"train", "--config", full_cfg.string(), "--out", split.string(), "--resume"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"history.csv", "last.ckpt", "best.ckpt", "metrics.csv"}) {
    EXPECT_EQ(slurp(split / f), slurp(straight / f)) << f;
  }
}

TEST_F(CliTest, GradcheckPassesAndDetectsInjectedFault) {
  const Outcome ok = cli({"gradcheck", "--scope", "res2net", "--seeds", "2"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("gres2net_block"), std::string::npos) << ok.out;
  const Outcome bad = cli({"gradcheck", "--scope", "tensor", "--seeds", "1", "--inject-fault"});
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(cli({"gradcheck", "--scope", "bogus"}).code, 1);
}

TEST_F(CliTest, SynthRoundTripsAndSeedsDiffer) {
  const fs::path a = root / "a", b = root / "b";
  ASSERT_EQ(cli({"synth", "--task", "classification", "--seed", "7", "--out", a.string()}).code, 0);
  ASSERT_EQ(cli({"synth", "--task", "classification", "--seed", "8", "--out", b.string()}).code, 0);
  const RunConfig cfg = load_run_config((a / "run.cfg").string());
  EXPECT_EQ(load_run_data(cfg, false), make_synthetic(Task::classification, 7));
  EXPECT_NE(slurp(a / "train.csv"), slurp(b / "train.csv"));
}

TEST_F(CliTest, ConfigErrorsNameTheKey) {
  write(root / "bad.cfg", "task = classification\ndata.source = synthetic\ntrain.lr = 0.1\n");
  Outcome r = cli({"train", "--config", (root / "bad.cfg").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.lr"), std::string::npos) << r.err;

  write(root / "bad2.cfg", "task = classification\ndata.source = files\ndata.schema = nope.txt\ndata.train = x.csv\n");
  r = cli({"train", "--config", (root / "bad2.cfg").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("data.schema"), std::string::npos) << r.err;

  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"train"}).code, 1);
  EXPECT_EQ(cli({"train", "--config", (root / "missing.cfg").string()}).code, 1);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  const fs::path cfg = make_run("classification", 1);
  std::string csv = slurp(cfg.parent_path() / "train.csv");
  csv.replace(csv.find('\n') + 1, 0, "0,NA,1,1,0\n");
  write(cfg.parent_path() / "train.csv", csv);
  const Outcome r = cli({"train", "--config", cfg.string(), "--out", (root / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}
