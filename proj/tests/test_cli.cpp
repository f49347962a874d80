#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "test_support.hpp"

using namespace anae;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("anae_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d / "data");
    Dataset ds = fixtures::make_sbm_fixture({15, 15, 15}, 0.5, 0.02, 3, 10);
    std::ofstream content(d / "data" / "sbm.content"), cites(d / "data" / "sbm.cites");
    for (Index i = 0; i < ds.attributes.values.rows(); ++i) {
      content << ds.node_ids[static_cast<std::size_t>(i)];
      for (Index c = 0; c < ds.attributes.values.cols(); ++c) content << '\t' << ds.attributes.values(i, c);
      content << '\t' << ds.class_names[static_cast<std::size_t>(ds.labels.labels[static_cast<std::size_t>(i)])] << '\n';
    }
    for (auto [a, b] : ds.graph.undirected_edges()) cites << ds.node_ids[a] << '\t' << ds.node_ids[b] << '\n';
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(ANAE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string base_args(const std::string& out) {
  return "--dataset-dir " + (scratch() / "data").string() + " --dataset sbm --out " + (scratch() / out).string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Cli, TrainWritesSelfDescribingRun) {
  ASSERT_EQ(run("train " + base_args("train") + " --seed 7 --epochs 4"), 0);
  const fs::path dir = scratch() / "train";
  for (const char* f : {"checkpoint.bin", "train_log.csv", "config.json", "split.json", "embeddings.tsv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  auto log = lines(dir / "train_log.csv");
  EXPECT_EQ(log.front(), "epoch,loss,val_auc");
  EXPECT_EQ(log.size(), 5u);
  EXPECT_EQ(lines(dir / "embeddings.tsv").size(), 45u);

  auto cfg = nlohmann::json::parse(slurp(dir / "config.json"));
  EXPECT_EQ(cfg["seed"], 7);
  EXPECT_EQ(cfg["model"]["epochs"], 4);

  // Rerun from the snapshot alone, into a fresh directory.
  ASSERT_EQ(run("train --config " + (dir / "config.json").string() + " --out " + (scratch() / "rerun").string()), 0);
  EXPECT_EQ(slurp(dir / "checkpoint.bin"), slurp(scratch() / "rerun" / "checkpoint.bin"));
  EXPECT_EQ(slurp(dir / "train_log.csv"), slurp(scratch() / "rerun" / "train_log.csv"));
  EXPECT_EQ(slurp(dir / "split.json"), slurp(scratch() / "rerun" / "split.json"));
}

TEST(Cli, EvalLinkPrediction) {
  ASSERT_EQ(run("train " + base_args("lp") + " --seed 2 --epochs 3"), 0);
  ASSERT_EQ(run("eval " + base_args("lp") + " --seed 2 --epochs 3"), 0);
  auto rows = lines(scratch() / "lp" / "metrics.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "dataset,task,metric,value,stddev,seed");
  EXPECT_EQ(rows[1].rfind("sbm,link-pred,auc,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("sbm,link-pred,ap,", 0), 0u);
}

TEST(Cli, EvalNodeClassificationRowPerFraction) {
  const std::string args = base_args("nc") + " --task node-class --seed 4 --epochs 3";
  ASSERT_EQ(run("train " + args), 0);
  EXPECT_FALSE(fs::exists(scratch() / "nc" / "split.json"));
  ASSERT_EQ(run("eval " + args), 0);
  auto rows = lines(scratch() / "nc" / "metrics.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[1].rfind("sbm,node-class,micro_f1@0.1,", 0), 0u);
  EXPECT_EQ(rows[10].rfind("sbm,node-class,macro_f1@0.5,", 0), 0u);
}

TEST(Cli, DecoderAndAggregationVariants) {
  EXPECT_EQ(run("train " + base_args("mlp") + " --seed 1 --epochs 2 --decoder mlp"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(scratch() / "mlp" / "config.json"))["model"]["decoder"], "mlp");
  EXPECT_EQ(run("train " + base_args("gcn") + " --seed 1 --epochs 2 --aggregation gcn --dims 16,8 --heads 2,1"), 0);
  EXPECT_EQ(run("train " + base_args("gae") + " --seed 1 --epochs 2 --decoder structure"), 0);
  EXPECT_EQ(run("train " + base_args("mb") + " --seed 1 --epochs 2 --minibatch --fanout 3 --batch-size 16"), 0);
}

TEST(Cli, AblationSharesOneSplit) {
  ASSERT_EQ(run("ablation " + base_args("abl") + " --seed 5 --epochs 2"), 0);
  auto rows = lines(scratch() / "abl" / "ablation.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "variant,auc,ap,split_hash");
  const std::string hash = rows[1].substr(rows[1].rfind(',') + 1);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_EQ(rows[k].substr(rows[k].rfind(',') + 1), hash);
  EXPECT_EQ(rows[1].rfind("ANAE,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("ANAE-GCN,", 0), 0u);
  EXPECT_EQ(rows[3].rfind("ANAE-MLP,", 0), 0u);
}

TEST(Cli, SweepRowPerWidth) {
  ASSERT_EQ(run("sweep " + base_args("sweep") + " --seed 5 --epochs 2 --repeats 2"), 0);
  auto rows = lines(scratch() / "sweep" / "sweep.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "dim,hidden,fraction,micro_f1,macro_f1");
}

TEST(Cli, PrepareReportsSplit) {
  ASSERT_EQ(run("prepare " + base_args("prep") + " --seed 9"), 0);
  auto stats = nlohmann::json::parse(slurp(scratch() / "prep" / "dataset.json"));
  EXPECT_EQ(stats["nodes"], 45);
  EXPECT_EQ(stats["classes"], 3);
  const std::size_t e = stats["edges"];
  EXPECT_EQ(stats["train_edges"].get<std::size_t>() + stats["val_edges"].get<std::size_t>() +
                stats["test_edges"].get<std::size_t>(),
            e);
}

TEST(Cli, ExitCodes) {
  const std::string data = (scratch() / "data").string();
  EXPECT_EQ(run("train " + base_args("err")), 1);  // no seed
  EXPECT_EQ(run("train " + base_args("err") + " --seed 1 --task bogus"), 1);
  EXPECT_EQ(run("train --dataset-dir /nonexistent/dir --dataset sbm --seed 1"), 1);
  EXPECT_EQ(run("train " + base_args("err") + " --seed 1 --dropout 1.5"), 1);
  EXPECT_EQ(run("frobnicate"), 1);

  std::ofstream(scratch() / "broken.json") << "{ not json";
  EXPECT_EQ(run("train " + base_args("err") + " --config " + (scratch() / "broken.json").string()), 1);

  EXPECT_EQ(run("eval " + base_args("nothing-here") + " --seed 1"), 3);
  EXPECT_EQ(run("train --dataset-dir " + data + " --dataset absent --seed 1 --out " + (scratch() / "err").string()), 3);
  std::ofstream(scratch() / "junk.bin") << "garbage";
  EXPECT_EQ(run("eval " + base_args("err") + " --seed 1 --checkpoint " + (scratch() / "junk.bin").string()), 3);

  EXPECT_EQ(run("train " + base_args("nan") + " --seed 1 --epochs 3 --lr 1e200"), 2);
}
