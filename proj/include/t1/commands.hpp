#pragma once

// Subcommand bodies behind the `t1` executable. Each takes resolved config
// plus streams and returns a process exit code:
//   0 success, 1 input error, 2 backend/transport error, 3 invariant violation.

#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "t1/config.hpp"
#include "t1/error.hpp"
#include "t1/eval.hpp"
#include "t1/grpo.hpp"
#include "t1/index.hpp"
#include "t1/protocol.hpp"
#include "t1/remote_backend.hpp"
#include "t1/reward.hpp"
#include "t1/toy_env.hpp"

namespace t1 {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitBackend = 2, kExitInternal = 3 };

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kTransport: return kExitBackend;
    case Errc::kInvariant: return kExitInternal;
    default: return kExitInput;
  }
}

namespace detail {

struct JsonLine {
  std::size_t lineno;
  nlohmann::json value;
};

// Calls fn for every non-blank line; parse and per-line errors are reported
// to `log` with the line number and folded into the returned exit code.
template <typename Fn>
int for_each_jsonl(std::istream& in, const std::string& source, std::ostream& log, Fn&& fn) {
  int worst = kExitOk;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::kParse, std::string("malformed JSON: ") + e.what());
      }
      require(j.is_object(), Errc::kParse, "expected a JSON object");
      fn(JsonLine{lineno, std::move(j)});
    } catch (const Error& e) {
      log << source << ":" << lineno << ": " << e.what() << '\n';
      worst = std::max(worst, exit_code_for(e.code()));
    } catch (const nlohmann::json::exception& e) {
      log << source << ":" << lineno << ": parse: " << e.what() << '\n';
      worst = std::max(worst, static_cast<int>(kExitInput));
    }
  }
  return worst;
}

inline std::string string_field(const nlohmann::json& j, const char* name) {
  require(j.contains(name) && j[name].is_string(), Errc::kParse, std::string("missing string field '") + name + "'");
  return j[name].get<std::string>();
}

inline Embedding embedding_field(const nlohmann::json& j) {
  require(j["embedding"].is_array(), Errc::kParse, "field 'embedding' must be an array of numbers");
  return Embedding(j["embedding"].get<std::vector<double>>());
}

// A record carries either a precomputed "embedding" or "text" to encode.
inline Embedding record_embedding(const nlohmann::json& j, const Config& config, const Backend& backend,
                                  bool query_side) {
  if (j.contains("embedding") && !j["embedding"].is_null()) return embedding_field(j);
  const auto text = string_field(j, "text");
  const auto r = query_side ? encode_query(backend, text, QueryPromptTemplate::for_stage(config.stage),
                                           config.backend.max_reasoning_tokens)
                            : encode_doc(backend, text);
  require(r.token_found && r.embedding, Errc::kTransport, "backend output did not reach <emb_token>");
  return *r.embedding;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_encode(const Config& config, std::istream& in, const std::string& source, bool query_side,
                      std::ostream& out, std::ostream& log) {
  const auto backend = make_backend(config.backend);
  const auto tpl = QueryPromptTemplate::for_stage(config.stage);
  std::size_t missing = 0;
  const int rc = detail::for_each_jsonl(in, source, log, [&](const detail::JsonLine& line) {
    const auto id = detail::string_field(line.value, "id");
    const auto text = detail::string_field(line.value, "text");
    const auto r = query_side ? encode_query(*backend, text, tpl, config.backend.max_reasoning_tokens)
                              : encode_doc(*backend, text);
    nlohmann::json rec{{"id", id}, {"side", query_side ? "query" : "doc"}, {"token_found", r.token_found},
                       {"generated_len", r.generated_len}};
    if (query_side) rec["reasoning"] = r.reasoning_text;
    if (r.embedding) {
      rec["embedding"] = std::vector<double>(r.embedding->values().begin(), r.embedding->values().end());
    } else {
      rec["embedding"] = nullptr;
      ++missing;
    }
    out << rec.dump() << '\n';
  });
  if (missing) log << missing << " record(s) did not reach <emb_token>; their embedding is null\n";
  return rc;
}

inline int cmd_index(const Config& config, std::istream& in, const std::string& source, std::ostream& log) {
  const auto backend = make_backend(config.backend);
  std::vector<IndexEntry> entries;
  const int rc = detail::for_each_jsonl(in, source, log, [&](const detail::JsonLine& line) {
    entries.push_back({detail::string_field(line.value, "id"),
                       detail::record_embedding(line.value, config, *backend, false)});
  });
  if (rc != kExitOk) return rc;
  const auto index = Index::build(std::move(entries));
  index.save(config.index_path);
  log << "indexed " << index.size() << " documents (dim " << index.dim() << ") into " << config.index_path << '\n';
  return kExitOk;
}

inline int cmd_search(const Config& config, std::istream& queries, const std::string& source, std::size_t k,
                      const std::string& tag, std::ostream& out, std::ostream& log) {
  require(k > 0, Errc::kInvalidInput, "k must be positive");
  const auto index = Index::load(config.index_path);
  const auto backend = make_backend(config.backend);
  RunFile run;
  run.tag = tag;
  const int rc = detail::for_each_jsonl(queries, source, log, [&](const detail::JsonLine& line) {
    const auto id = detail::string_field(line.value, "id");
    require(!run.queries.contains(id), Errc::kInvalidInput, "duplicate query id '" + id + "'");
    run.queries[id] = index.search_topk(detail::record_embedding(line.value, config, *backend, true), k);
  });
  write_run(out, run);
  return rc;
}

inline int cmd_reward(const Config& config, std::istream& in, const std::string& source, std::ostream& out,
                      std::ostream& log) {
  return detail::for_each_jsonl(in, source, log, [&](const detail::JsonLine& line) {
    const auto& j = line.value;
    ScoreSet scores;
    scores.positive_scores = j.at("positives").get<std::vector<double>>();
    scores.negative_scores = j.at("negatives").get<std::vector<double>>();
    scores.tau = j.contains("tau") ? j["tau"].get<double>() : config.tau;
    scores.validate();
    FormatVerdict verdict = FormatVerdict::ok();
    if (j.contains("output")) verdict = validate_output_format(j["output"].get<std::string>(), Stage::kStage3);
    auto rec = to_json(total_reward(scores, format_reward(verdict, config.format_policy)));
    if (!verdict.valid) rec["format_reason"] = format_failure_name(verdict.reason);
    out << rec.dump() << '\n';
  });
}

struct ToyTrainSummary {
  double baseline_r_rank = 0.0;
  double final_r_rank = 0.0;
  double bridge_argmax = 0.0;
  std::vector<IterationStats> history;
};

inline ToyTrainSummary run_toy_training(const Config& config,
                                        const std::function<void(const IterationStats&)>& on_iteration = {}) {
  config.validate();
  const auto env = ToyEnv::make(config.grpo.seed, config.tasks, config.toy_params(), config.format_policy);
  const auto policy = env.uniform_policy(config.policy_temperature);
  ToyTrainSummary s;
  s.baseline_r_rank = mean_expected_rank_reward(env, policy);
  auto trained = grpo_train(env, policy, config.grpo, on_iteration);
  s.final_r_rank = mean_expected_rank_reward(env, trained.policy);
  s.bridge_argmax = bridge_argmax_fraction(env, trained.policy);
  s.history = std::move(trained.history);
  return s;
}

inline std::string csv_row(const IterationStats& s) {
  return std::to_string(s.iteration) + "," + to_shortest(s.mean_reward) + "," + to_shortest(s.mean_r_rank) + "," +
         to_shortest(s.format_violation_rate);
}

inline int cmd_toy_train(const Config& config, std::ostream& out, std::ostream& log) {
  out << "iteration,mean_reward,mean_r_rank,format_violation_rate\n";
  const auto s = run_toy_training(config, [&](const IterationStats& st) { out << csv_row(st) << '\n'; });
  log << "expected r_rank: uniform " << to_shortest(s.baseline_r_rank) << " -> trained " << to_shortest(s.final_r_rank)
      << "; bridge is argmax on " << to_shortest(100.0 * s.bridge_argmax) << "% of tasks\n";
  return kExitOk;
}

struct EvalOptions {
  std::string run_path;
  std::string qrels_path;
  std::size_t k = 10;
  std::string task_map_path;  // optional: "query_id task" per line
  std::string json_path;      // optional
  bool per_query = false;
};

inline std::map<std::string, std::string> load_task_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kIo, "cannot open task map '" + path.string() + "'");
  std::map<std::string, std::string> map;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto cols = split_ws(line);
    require(cols.size() == 2, Errc::kParse, path.string() + ":" + std::to_string(lineno) + ": expected 'query_id task'");
    map[std::string(cols[0])] = std::string(cols[1]);
  }
  return map;
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const auto run = load_run(opt.run_path);
  const auto qrels = load_qrels(opt.qrels_path);
  const auto per_query = ndcg_at_k(run, qrels, opt.k);
  const auto report = opt.task_map_path.empty() ? aggregate(per_query)
                                                 : aggregate(per_query, load_task_map(opt.task_map_path));
  const std::string metric = "nDCG@" + std::to_string(opt.k);
  if (opt.per_query) {
    for (const auto& [qid, v] : report.per_query) out << qid << '\t' << to_shortest(v) << '\n';
  }
  out << format_report_table(report, metric);
  if (!opt.json_path.empty()) {
    std::ofstream js(opt.json_path, std::ios::trunc);
    require(static_cast<bool>(js), Errc::kIo, "cannot write '" + opt.json_path + "'");
    auto j = to_json(report);
    j["metric"] = metric;
    js << j.dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace t1
