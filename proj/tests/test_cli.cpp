#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "t1/config.hpp"
#include "t1/toy_env.hpp"

namespace t1 {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("t1_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) const { std::ofstream(path(name)) << content; }

  // Runs the binary with the given arguments; `env` is a prefix such as "T1_TAU=0.1".
  Result run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = "cd '" + dir_.string() + "' && env " + env + " '" T1_CLI_PATH "' " + args + " > '" +
                            path("stdout") + "' 2> '" + path("stderr") + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testing::read_file(path("stdout"));
    r.err = testing::read_file(path("stderr"));
    return r;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpListsEveryConfigFlag) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const auto& k : config_keys()) EXPECT_NE(r.out.find(k.flag()), std::string::npos) << k.flag();
  for (const char* sub : {"encode", "index", "search", "reward", "toy-train", "eval", "docs"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST_F(Cli, EncodeDocsAndQueries) {
  write("docs.jsonl", R"({"id":"a","text":"alpha"}
{"id":"b","text":"beta"}
{"id":"c","text":"gamma"}
)");
  const auto docs = run("encode --input docs.jsonl --side doc --backend-dim 16");
  ASSERT_EQ(docs.code, 0) << docs.err;
  std::istringstream lines(docs.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j["token_found"].get<bool>());
    EXPECT_EQ(j["embedding"].size(), 16u);
    ++n;
  }
  EXPECT_EQ(n, 3);

  const auto q = run("encode --input docs.jsonl --side query");
  ASSERT_EQ(q.code, 0);
  EXPECT_FALSE(nlohmann::json::parse(q.out.substr(0, q.out.find('\n')))["reasoning"].get<std::string>().empty());
}

TEST_F(Cli, MalformedLineIsNamed) {
  write("bad.jsonl", "{\"id\":\"a\",\"text\":\"alpha\"}\n{not json\n");
  const auto r = run("encode --input bad.jsonl --side doc");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.jsonl:2"), std::string::npos) << r.err;
}

TEST_F(Cli, IndexSearchEval) {
  write("docs.jsonl", R"({"id":"a","embedding":[1,0,0]}
{"id":"b","embedding":[0,1,0]}
{"id":"c","embedding":[0.7,0.7,0]}
)");
  write("queries.jsonl", R"({"id":"q1","embedding":[0,1,0.1]}
{"id":"q2","embedding":[1,0.1,0]}
)");
  write("qrels.txt", "q1 0 a 1\nq2 0 a 1\n");
  ASSERT_EQ(run("index --input docs.jsonl --index-path idx.t1ix").code, 0);
  const auto s = run("search --queries queries.jsonl --k 50 --out run.txt --tag demo", "T1_INDEX_PATH=idx.t1ix");
  ASSERT_EQ(s.code, 0) << s.err;
  const auto run_text = testing::read_file(path("run.txt"));
  EXPECT_EQ(run_text.rfind("q1 Q0 b 1 0.99503719", 0), 0u) << run_text;
  EXPECT_TRUE(run_text.substr(0, run_text.find('\n')).ends_with(" demo"));
  EXPECT_EQ(std::count(run_text.begin(), run_text.end(), '\n'), 6);

  const auto e = run("eval --run run.txt --qrels qrels.txt --per-query --json report.json");
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("q1\t0.5\n"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("q2\t1\n"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("nDCG@10"), std::string::npos);
  const auto report = nlohmann::json::parse(testing::read_file(path("report.json")));
  EXPECT_EQ(report["average"].get<double>(), 0.75);

  write("qrels_missing.txt", "q1 0 a 1\n");
  const auto missing = run("eval --run run.txt --qrels qrels_missing.txt");
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(missing.err.find("q2"), std::string::npos);
}

TEST_F(Cli, EmptyQuerySetGivesEmptyRun) {
  write("docs.jsonl", "{\"id\":\"a\",\"embedding\":[1,0]}\n");
  write("empty.jsonl", "");
  ASSERT_EQ(run("index --input docs.jsonl --index-path idx.t1ix").code, 0);
  const auto r = run("search --queries empty.jsonl --index-path idx.t1ix");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, MissingIndexIsAnInputError) {
  write("q.jsonl", "{\"id\":\"q\",\"embedding\":[1,0]}\n");
  const auto r = run("search --queries q.jsonl --index-path nowhere.t1ix");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nowhere.t1ix"), std::string::npos);
}

TEST_F(Cli, BridgeExpandedToyQueryRanksPositiveFirst) {
  const auto task = generate_task(31);
  std::ostringstream corpus;
  for (const auto& d : task.corpus) {
    const auto e = embed_bag(d.tokens, 256);
    corpus << nlohmann::json{{"id", d.id}, {"embedding", std::vector<double>(e.values().begin(), e.values().end())}}.dump()
           << '\n';
  }
  write("corpus.jsonl", corpus.str());
  const auto q = embed_bag(task.expanded_query(task.bridge), 256);
  write("q.jsonl",
        nlohmann::json{{"id", "toy"}, {"embedding", std::vector<double>(q.values().begin(), q.values().end())}}.dump() + "\n");
  ASSERT_EQ(run("index --input corpus.jsonl --index-path toy.t1ix").code, 0);
  const auto r = run("search --queries q.jsonl --index-path toy.t1ix --k 100");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')).substr(0, 8 + task.positive_id.size()), "toy Q0 " + task.positive_id + " ");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), static_cast<long>(task.corpus.size()));
}

TEST_F(Cli, RewardLines) {
  write("r.jsonl", R"({"positives":[0.9],"negatives":[0.95,0.5,0.3],"tau":0.0001}
{"positives":[0.9],"negatives":[0.1],"output":"analysis <emb_token> trailing text"}
)");
  const auto r = run("reward --input r.jsonl");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string a, b;
  std::getline(lines, a);
  std::getline(lines, b);
  EXPECT_NEAR(nlohmann::json::parse(a)["r_total"].get<double>(), 0.5, 1e-3);
  const auto gated = nlohmann::json::parse(b);
  EXPECT_TRUE(gated["r_rank"].is_null());
  EXPECT_EQ(gated["r_total"].get<double>(), -1.0);
  EXPECT_EQ(gated["format_reason"].get<std::string>(), "token-not-terminal");
}

TEST_F(Cli, ToyTrainCsvIsDeterministic) {
  const std::string args = "toy-train --tasks 3 --iterations 5 --n-distractors 10 --toy-dim 64";
  const auto a = run(args);
  const auto b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.substr(0, a.out.find('\n')), "iteration,mean_reward,mean_r_rank,format_violation_rate");
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 6);
}

TEST_F(Cli, ConfigPrecedence) {
  write("t.conf", "iterations = 3\ntasks = 2\nn_distractors = 10\n");
  // Environment says 7 iterations; the file wins; the flag wins over both.
  auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  EXPECT_EQ(lines(run("--config t.conf toy-train", "T1_ITERATIONS=7").out), 4);
  EXPECT_EQ(lines(run("--config t.conf toy-train --iterations 2", "T1_ITERATIONS=7").out), 3);
  EXPECT_EQ(lines(run("toy-train --tasks 2 --n-distractors 10", "T1_ITERATIONS=4").out), 5);
}

TEST_F(Cli, ExitCodes) {
  write("bad.conf", "no_such_key = 1\n");
  EXPECT_EQ(run("--config bad.conf toy-train").code, 1);
  EXPECT_EQ(run("toy-train --tau -1").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  write("d.jsonl", "{\"id\":\"a\",\"text\":\"alpha\"}\n");
  EXPECT_EQ(run("encode --input d.jsonl --backend remote --backend-endpoint http://127.0.0.1:1/encode").code, 2);
}

TEST_F(Cli, DocsCheckDetectsDrift) {
  ASSERT_EQ(run("docs --out-dir site --tasks 2 --iterations 3").code, 0);
  EXPECT_EQ(run("docs --out-dir site --check --tasks 2 --iterations 3").code, 0);
  EXPECT_EQ(run("docs --out-dir site --check --tasks 2 --iterations 3 --tau 0.1").code, 3);
}

}  // namespace
}  // namespace t1
