// t1: command-line front end for the reasoning-then-embed retrieval toolkit.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "t1/commands.hpp"
#include "t1/config.hpp"
#include "t1/docsite.hpp"

namespace {

struct InputFile {
  std::ifstream file;
  std::istream* stream = &std::cin;
  std::string name = "<stdin>";

  explicit InputFile(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    t1::require(file.is_open(), t1::Errc::kIo, "cannot open '" + path + "'");
    stream = &file;
    name = path;
  }
};

struct OutputFile {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit OutputFile(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path, std::ios::trunc);
    t1::require(file.is_open(), t1::Errc::kIo, "cannot write '" + path + "'");
    stream = &file;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"t1: reasoning-then-embed retrieval toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key = value config file (flags > config file > T1_* environment)");

  std::vector<std::pair<const t1::ConfigKey*, CLI::Option*>> key_options;
  std::map<std::string, std::string> flag_storage;
  for (const auto& key : t1::config_keys()) {
    auto* opt = app.add_option(key.flag(), flag_storage[key.name],
                               key.help + " (config key " + key.name + ", env " + key.env_var() + ")");
    key_options.emplace_back(&key, opt);
  }

  std::string input, out = "-", side = "query", tag = "t1";
  std::size_t k = 10;

  auto* encode = app.add_subcommand("encode", "encode JSONL {\"id\",\"text\"} records into embedding records");
  encode->add_option("--input", input, "input JSONL ('-' for stdin)")->required();
  encode->add_option("--side", side, "query or doc")->check(CLI::IsMember({"query", "doc"}));
  encode->add_option("--out", out, "output JSONL ('-' for stdout)");

  auto* index = app.add_subcommand("index", "build the index from JSONL records with \"text\" or \"embedding\"");
  index->add_option("--input", input, "corpus JSONL ('-' for stdin)")->required();

  auto* search = app.add_subcommand("search", "top-k search for JSONL queries, written as a TREC run");
  search->add_option("--queries", input, "query JSONL with \"text\" or \"embedding\"")->required();
  search->add_option("--k", k, "hits per query")->check(CLI::PositiveNumber);
  search->add_option("--tag", tag, "run tag column");
  search->add_option("--out", out, "run file ('-' for stdout)");

  std::string reward_input = "-";
  auto* reward = app.add_subcommand("reward", "score JSONL {\"positives\",\"negatives\",\"tau\"} lines");
  reward->add_option("--input", reward_input, "input JSONL ('-' for stdin)");
  reward->add_option("--out", out, "output JSONL ('-' for stdout)");

  auto* toy = app.add_subcommand("toy-train", "GRPO on the synthetic environment; per-iteration CSV");
  toy->add_option("--out", out, "CSV output ('-' for stdout)");

  t1::EvalOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "nDCG@k report for a TREC run against qrels");
  eval->add_option("--run", eval_opt.run_path, "TREC run file")->required();
  eval->add_option("--qrels", eval_opt.qrels_path, "TREC qrels file")->required();
  eval->add_option("--k", eval_opt.k, "cutoff")->check(CLI::PositiveNumber);
  eval->add_option("--task-map", eval_opt.task_map_path, "'query_id task' lines for per-task averages");
  eval->add_option("--json", eval_opt.json_path, "also write the report as JSON");
  eval->add_flag("--per-query", eval_opt.per_query, "print per-query values");

  std::string docs_dir = "docs";
  bool docs_check = false;
  auto* docs = app.add_subcommand("docs", "regenerate the generated documentation tables");
  docs->add_option("--out-dir", docs_dir, "documentation directory");
  docs->add_flag("--check", docs_check, "compare instead of writing; exit 3 on drift");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : t1::kExitInput;
  }

  try {
    const auto env = t1::environment_values();
    const auto file = config_path.empty() ? t1::ConfigValues{} : t1::load_config_file(config_path);
    t1::ConfigValues flags;
    for (const auto& [key, opt] : key_options) {
      if (opt->count() > 0) flags[key->name] = flag_storage[key->name];
    }
    const auto config = t1::resolve_config({&env, &file, &flags});

    if (*encode) {
      InputFile in(input);
      OutputFile o(out);
      return t1::cmd_encode(config, *in.stream, in.name, side == "query", *o.stream, std::cerr);
    }
    if (*index) {
      InputFile in(input);
      return t1::cmd_index(config, *in.stream, in.name, std::cerr);
    }
    if (*search) {
      InputFile in(input);
      OutputFile o(out);
      return t1::cmd_search(config, *in.stream, in.name, k, tag, *o.stream, std::cerr);
    }
    if (*reward) {
      InputFile in(reward_input);
      OutputFile o(out);
      return t1::cmd_reward(config, *in.stream, in.name, *o.stream, std::cerr);
    }
    if (*toy) {
      OutputFile o(out);
      return t1::cmd_toy_train(config, *o.stream, std::cerr);
    }
    if (*eval) return t1::cmd_eval(eval_opt, std::cout);
    if (*docs) {
      const auto files = t1::regenerate_docs_fixtures(config);
      if (!docs_check) {
        t1::write_docs(files, docs_dir);
        std::cerr << "wrote " << files.size() << " files to " << docs_dir << '\n';
        return t1::kExitOk;
      }
      const auto drift = t1::docs_drift(files, docs_dir);
      for (const auto& name : drift) std::cerr << "docs drift: " << docs_dir << '/' << name << '\n';
      return drift.empty() ? t1::kExitOk : t1::kExitInternal;
    }
  } catch (const t1::Error& e) {
    std::cerr << "t1: " << e.what() << '\n';
    return t1::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "t1: internal error: " << e.what() << '\n';
    return t1::kExitInternal;
  }
  return t1::kExitOk;
}
