#pragma once

// Generated documentation fixtures. Every numeric table under docs/ comes
// from here, so a changed constant shows up as a diff against the checked-in
// files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "t1/commands.hpp"
#include "t1/config.hpp"
#include "t1/losses.hpp"
#include "t1/reward.hpp"

namespace t1 {

using DocFiles = std::map<std::string, std::string>;

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline const char* kGeneratedNote = "<!-- Generated by `t1 docs`. Do not edit; run `t1 docs --out-dir docs`. -->\n\n";

inline std::string loss_weights_doc(const Config& config) {
  std::ostringstream os;
  os << kGeneratedNote << "# Stage loss weights\n\n"
     << "Stage losses are linear combinations of four components:\n\n"
     << "    L = w_sft * L_sft + w_nce * L_nce + w_tri * L_tri + w_kl * L_kl\n\n"
     << "| stage | w_sft | w_nce | w_tri | w_kl | sum of weights |\n"
     << "|-------|-------|-------|-------|------|----------------|\n";
  for (const auto& w : {StageLossWeights::stage1(), StageLossWeights::stage2()}) {
    os << "| " << stage_name(w.stage) << " | " << to_shortest(w.sft) << " | " << to_shortest(w.nce) << " | "
       << to_shortest(w.tri) << " | " << to_shortest(w.kl) << " | "
       << to_shortest(combine_stage(w, {1.0, 1.0, 1.0, 1.0})) << " |\n";
  }
  os << "\nThe sum column is `combine_stage` applied to unit components.\n\n"
     << "## Kernel defaults\n\n"
     << "| constant | value |\n|----------|-------|\n"
     << "| InfoNCE temperature | " << to_shortest(config.nce_temperature) << " |\n"
     << "| triplet margin | " << to_shortest(config.triplet_margin) << " |\n"
     << "| in-batch negatives | off |\n"
     << "| hinge subgradient at the boundary | 0 |\n";
  return os.str();
}

inline std::string reward_doc(const Config& config) {
  const auto& fp = config.format_policy;
  std::ostringstream os;
  os << kGeneratedNote << "# Reward reference\n\n"
     << "    Rank(p)  = 1 + sum_{n in N} sigmoid((s(q,n) - s(q,p)) / tau)\n"
     << "    R_rank   = 1 - mean_{p in P} log Rank(p) / log(|N| + 1)\n"
     << "    R_total  = R_rank + R_format            (ungated)\n"
     << "    R_total  = R_format                     (gated)\n\n"
     << "With no negatives, R_rank is defined as 1.\n\n"
     << "## Defaults\n\n| constant | value |\n|----------|-------|\n"
     << "| tau | " << to_shortest(config.tau) << " |\n"
     << "| penalty_valid | " << to_shortest(fp.penalty_valid) << " |\n"
     << "| penalty_invalid | " << to_shortest(fp.penalty_invalid) << " |\n"
     << "| gating | " << (fp.gating ? "on" : "off") << " |\n\n"
     << "## Format policy\n\n"
     << "| output | R_format | gated | R_total |\n|--------|----------|-------|---------|\n";
  const auto valid = format_reward(FormatVerdict::ok(), fp);
  const auto invalid = format_reward(FormatVerdict::rejected(FormatFailure::kMissingToken), fp);
  os << "| reasoning then one terminal `<emb_token>` | " << to_shortest(valid.r_format) << " | "
     << (valid.gated ? "yes" : "no") << " | R_rank + " << to_shortest(valid.r_format) << " |\n";
  os << "| anything else | " << to_shortest(invalid.r_format) << " | " << (invalid.gated ? "yes" : "no") << " | "
     << (invalid.gated ? to_shortest(invalid.r_format) : "R_rank + " + to_shortest(invalid.r_format)) << " |\n\n";

  os << "## Reference values\n\n"
     << "| positives | negatives | tau | Rank(first positive) | hard rank | R_rank |\n"
     << "|-----------|-----------|-----|----------------------|-----------|--------|\n";
  struct Row {
    std::vector<double> pos, neg;
    double tau;
  };
  const std::vector<Row> rows = {
      {{0.9}, {0.95, 0.5, 0.3}, 1e-4},
      {{0.9}, {0.95, 0.5, 0.3}, config.tau},
      {{0.5}, {0.5}, config.tau},
      {{0.8, 0.6}, {0.7, 0.2, 0.1, 0.0}, config.tau},
      {{0.2}, {}, config.tau},
  };
  auto list = [](const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + to_shortest(v[i]);
    return s + "]";
  };
  for (const auto& r : rows) {
    const ScoreSet set{r.pos, r.neg, r.tau};
    os << "| " << list(r.pos) << " | " << list(r.neg) << " | " << to_shortest(r.tau) << " | "
       << fixed(soft_rank(r.pos[0], r.neg, r.tau)) << " | " << to_shortest(hard_rank_oracle(r.pos[0], r.neg)) << " | "
       << fixed(rank_reward(set)) << " |\n";
  }
  return os.str();
}

inline std::string worked_example_doc(const Config& config, const ToyTrainSummary& s) {
  std::ostringstream os;
  os << kGeneratedNote << "# Worked example: GRPO on the toy environment\n\n"
     << "Reproduce with\n\n"
     << "    t1 toy-train --seed " << config.grpo.seed << " --tasks " << config.tasks << " --group-size "
     << config.grpo.group_size << " --iterations " << config.grpo.iterations << " --lr "
     << to_shortest(config.grpo.learning_rate) << " --tau " << to_shortest(config.tau) << "\n\n"
     << "The full per-iteration CSV is in `toy_train.csv`.\n\n"
     << "## Configuration\n\n| key | value |\n|-----|-------|\n";
  for (const char* key : {"seed", "tasks", "group_size", "iterations", "lr", "advantage_epsilon", "tau",
                          "policy_temperature", "vocab_size", "n_expansions", "n_distractors", "toy_dim",
                          "malformed_decoys", "penalty_invalid", "penalty_valid", "gating"}) {
    os << "| " << key << " | " << find_config_key(key)->get(config) << " |\n";
  }
  os << "\n## Outcome\n\n| quantity | value |\n|----------|-------|\n"
     << "| expected R_rank, uniform policy | " << fixed(s.baseline_r_rank) << " |\n"
     << "| expected R_rank, trained policy | " << fixed(s.final_r_rank) << " |\n"
     << "| improvement | " << fixed(s.final_r_rank - s.baseline_r_rank) << " |\n"
     << "| tasks where the bridge is the argmax | " << fixed(100.0 * s.bridge_argmax, 1) << "% |\n\n"
     << "## Learning curve (sampled means)\n\n"
     << "| iteration | mean reward | mean R_rank | format violations |\n"
     << "|-----------|-------------|-------------|-------------------|\n";
  const std::size_t stride = std::max<std::size_t>(1, s.history.size() / 10);
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    if (i % stride != 0 && i + 1 != s.history.size()) continue;
    const auto& h = s.history[i];
    os << "| " << h.iteration << " | " << fixed(h.mean_reward) << " | " << fixed(h.mean_r_rank) << " | "
       << fixed(h.format_violation_rate) << " |\n";
  }
  return os.str();
}

}  // namespace detail

inline DocFiles regenerate_docs_fixtures(const Config& config) {
  const auto summary = run_toy_training(config);
  std::ostringstream csv;
  csv << "iteration,mean_reward,mean_r_rank,format_violation_rate\n";
  for (const auto& h : summary.history) csv << csv_row(h) << '\n';
  return {
      {"loss_weights.md", detail::loss_weights_doc(config)},
      {"reward_reference.md", detail::reward_doc(config)},
      {"worked_example.md", detail::worked_example_doc(config, summary)},
      {"toy_train.csv", csv.str()},
  };
}

inline void write_docs(const DocFiles& files, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::kIo, "cannot write '" + (dir / name).string() + "'");
    out << content;
  }
}

// Names of files whose on-disk content differs from `files` (missing counts).
inline std::vector<std::string> docs_drift(const DocFiles& files, const std::filesystem::path& dir) {
  std::vector<std::string> drifted;
  for (const auto& [name, content] : files) {
    std::ifstream in(dir / name, std::ios::binary);
    const std::string on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.is_open() || on_disk != content) drifted.push_back(name);
  }
  return drifted;
}

}  // namespace t1
