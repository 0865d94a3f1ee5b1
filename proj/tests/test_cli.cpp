#include <sys/wait.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

const fs::path kDir = fs::temp_directory_path() / "laqsum_cli_smoke";

int run(const std::string& args, const std::string& stdout_file = "") {
  const std::string out = stdout_file.empty() ? "/dev/null" : (kDir / stdout_file).string();
  const std::string cmd = std::string(LAQSUM_CLI) + " " + args + " > " + out + " 2>> " + (kDir / "stderr.log").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream in(kDir / name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> jsonl(const std::string& name) {
  std::vector<nlohmann::json> rows;
  std::istringstream in(slurp(name));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

std::string p(const std::string& name) { return (kDir / name).string(); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    ASSERT_EQ(run("synth -n 40 --seed 3 -o " + p("train.jsonl")), 0);
    ASSERT_EQ(run("synth -n 3 --seed 5 --split qfs -o " + p("qfs.jsonl")), 0);
    std::ofstream(kDir / "tiny.cfg") << "d_model=16\nnum_heads=2\nff_dim=32\nshared_layers=1\ndecoder_layers=1\n"
                                        "batch_size=4\ntotal_steps=12\nwarmup_steps=2\nbpe_merges=80\n";
    ASSERT_EQ(run("train --corpus " + p("train.jsonl") + " --config " + p("tiny.cfg") + " --set lr=0.002 --output-dir " +
                      p("ckpt"),
                  "train.out"),
              0);
    const auto first = jsonl("qfs.jsonl").front();
    std::ofstream(kDir / "doc.txt") << first["document"].get<std::string>();
    query_ = first["query"].get<std::string>();
  }

  static std::string model() {
    std::string path = slurp("train.out");
    while (!path.empty() && std::isspace(static_cast<unsigned char>(path.back()))) path.pop_back();
    return path;
  }

  static inline std::string query_;
};

TEST_F(Cli, TrainWritesCheckpointAndMetrics) {
  EXPECT_TRUE(fs::exists(model())) << model();
  const auto metrics = slurp("ckpt/metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 13);
}

TEST_F(Cli, PresetThenOverrides) {
  ASSERT_EQ(run("train --corpus " + p("train.jsonl") + " --preset desk --config " + p("tiny.cfg") +
                    " --set total_steps=2 --output-dir " + p("preset")),
            0);
  const auto metrics = slurp("preset/metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
}

TEST_F(Cli, SynthSplits) {
  const auto generic = jsonl("train.jsonl");
  ASSERT_EQ(generic.size(), 40u);
  EXPECT_FALSE(generic[0].contains("query"));
  const auto qfs = jsonl("qfs.jsonl");
  ASSERT_EQ(qfs.size(), 6u);
  EXPECT_TRUE(qfs[0].contains("query"));
}

TEST_F(Cli, TagWithModelTokenizer) {
  ASSERT_EQ(run("tag --corpus " + p("train.jsonl") + " --model " + model() + " -o " + p("tags.jsonl")), 0);
  const auto rows = jsonl("tags.jsonl");
  ASSERT_EQ(rows.size(), 40u);
  EXPECT_EQ(rows[0]["units"].size(), rows[0]["labels"].size());
}

TEST_F(Cli, SummarizeGenericAndQueryFocused) {
  ASSERT_EQ(run("summarize --model " + model() + " --input " + p("doc.txt"), "generic.txt"), 0);
  ASSERT_EQ(run("summarize --model " + model() + " --input " + p("doc.txt") + " --query '" + query_ + "'", "qfs.txt"), 0);
  ASSERT_EQ(run("summarize --model " + model() + " --input " + p("doc.txt") + " --strategy beam --beam-width 3",
                "beam.txt"),
            0);
  EXPECT_FALSE(slurp("generic.txt").empty());
  EXPECT_FALSE(slurp("qfs.txt").empty());
}

TEST_F(Cli, SummarizeCluster) {
  std::ofstream(kDir / "cluster.jsonl") << nlohmann::json{{"id", "c0"},
                                                          {"documents", {slurp("doc.txt"), slurp("doc.txt")}},
                                                          {"query", query_}}
                                                  .dump()
                                           << "\n";
  ASSERT_EQ(run("summarize --model " + model() + " --cluster " + p("cluster.jsonl") + " --budget 20", "mds.txt"), 0);
  const auto rows = jsonl("mds.txt");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["id"], "c0");
  std::istringstream words(rows[0]["summary"].get<std::string>());
  int n = 0;
  for (std::string w; words >> w;) ++n;
  EXPECT_LE(n, 20);
}

TEST_F(Cli, EvaluateFourRowsPerExample) {
  std::ofstream(kDir / "cand.jsonl") << R"({"id":"a","summary":"the cat sat"})" "\n"
                                     << R"({"id":"b","summary":"dogs bark"})" "\n";
  std::ofstream(kDir / "ref.jsonl") << R"({"id":"a","summary":"the cat sat down"})" "\n"
                                    << R"({"id":"b","references":["a dog barks","dogs bark loudly"]})" "\n";
  ASSERT_EQ(run("evaluate --candidates " + p("cand.jsonl") + " --references " + p("ref.jsonl") +
                    " --variants R1,R2,RL,RSU4",
                "scores.csv"),
            0);
  std::istringstream in(slurp("scores.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "example_id,variant,precision,recall,f1");
  int a = 0, b = 0;
  for (std::string line; std::getline(in, line);) {
    a += line.rfind("a,", 0) == 0;
    b += line.rfind("b,", 0) == 0;
  }
  EXPECT_EQ(a, 4);
  EXPECT_EQ(b, 4);
}

TEST_F(Cli, InspectBelief) {
  std::ofstream(kDir / "sum.txt") << "some summary";
  ASSERT_EQ(run("inspect-belief --model " + model() + " --input " + p("doc.txt") + " --query '" + query_ +
                    "' --summary " + p("sum.txt") + " -o " + p("belief.jsonl")),
            0);
  const auto rows = jsonl("belief.jsonl");
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) {
    EXPECT_GE(r["prob"].get<double>(), 0.0);
    EXPECT_LE(r["prob"].get<double>(), 1.0);
    EXPECT_TRUE(r.contains("label"));
  }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("bogus"), 1);
  EXPECT_EQ(run("summarize --model"), 1);
  EXPECT_EQ(run("train --corpus " + p("train.jsonl") + " --set nonsense=3"), 1);
  EXPECT_EQ(run("train --corpus " + p("train.jsonl") + " --preset huge"), 1);
  EXPECT_EQ(run("summarize --model " + p("missing.ckpt") + " --input " + p("doc.txt")), 2);
  std::ofstream(kDir / "empty.txt") << "";
  EXPECT_EQ(run("summarize --model " + model() + " --input " + p("empty.txt")), 2);
  EXPECT_EQ(run("--help"), 0);
}

}  // namespace
