#pragma once

// Synthetic vocabulary-mismatch retrieval environment.
//
// Each task has a short query whose relevant document shares none of its
// tokens. Lexical distractors share query tokens, so the bare query ranks
// them above the positive. One candidate expansion (the bridge) carries
// tokens of the positive document; every other expansion (a decoy) carries
// tokens of a distractor that also overlaps the query. Only choosing the
// bridge puts the positive on top, which is what the policy has to learn.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "t1/embedding.hpp"
#include "t1/error.hpp"
#include "t1/index.hpp"
#include "t1/policy.hpp"
#include "t1/protocol.hpp"
#include "t1/reward.hpp"
#include "t1/rng.hpp"

namespace t1 {

using Token = std::uint32_t;
using Tokens = std::vector<Token>;

inline constexpr std::uint64_t kTokenTableSeed = 0x7431'746f'6b65'6e73ULL;

struct ToyEnvParams {
  std::size_t vocab_size = 1000;
  std::size_t n_expansions = 8;
  std::size_t n_distractors = 50;
  std::size_t dim = 256;
  std::size_t query_len = 4;
  std::size_t expansion_len = 4;
  std::size_t doc_len = 8;
  // Decoys rendered without the terminal <emb_token>; exercises format gating.
  std::size_t malformed_decoys = 0;
  double tau = kDefaultRankTau;

  std::size_t tokens_needed() const {
    return query_len + doc_len + (n_expansions - 1) * expansion_len + doc_len;
  }

  void validate() const {
    require(n_expansions >= 2, Errc::kInvalidInput, "need at least two expansions (bridge + decoy)");
    require(vocab_size > n_expansions, Errc::kInvalidInput, "vocab_size must exceed n_expansions");
    require(n_distractors >= 1, Errc::kInvalidInput, "need at least one distractor");
    require(dim > 0 && query_len > 0 && expansion_len > 0, Errc::kInvalidInput, "sizes must be positive");
    require(expansion_len <= doc_len && query_len <= doc_len, Errc::kInvalidInput,
            "expansion_len and query_len must not exceed doc_len");
    require(vocab_size >= tokens_needed(), Errc::kInvalidInput,
            "vocab_size " + std::to_string(vocab_size) + " too small, need " + std::to_string(tokens_needed()));
    require(malformed_decoys < n_expansions, Errc::kInvalidInput, "malformed_decoys must leave the bridge");
    require(tau > 0.0, Errc::kInvalidInput, "tau must be positive");
  }
};

// Fixed pseudo-random unit vector for one token.
inline std::vector<double> token_vector(Token token, std::size_t dim) {
  Rng rng(hash_combine(kTokenTableSeed, token));
  std::vector<double> v(dim);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
  return v;
}

// Normalized sum of token vectors. Tokens are summed in sorted order so the
// result is independent of input order down to the last bit.
inline Embedding embed_bag(Tokens tokens, std::size_t dim) {
  require(!tokens.empty(), Errc::kInvalidInput, "cannot embed an empty token list");
  require(dim > 0, Errc::kInvalidInput, "dim must be positive");
  std::sort(tokens.begin(), tokens.end());
  std::vector<double> sum(dim, 0.0);
  for (Token t : tokens) {
    const auto v = token_vector(t, dim);
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  return Embedding::normalized_from(std::move(sum));
}

struct ToyDocument {
  std::string id;
  Tokens tokens;
};

struct SyntheticTask {
  std::string query_id;
  Tokens query_tokens;
  std::vector<Tokens> expansions;
  std::vector<bool> malformed;  // per expansion
  std::size_t bridge = 0;
  std::vector<ToyDocument> corpus;
  std::string positive_id;
  Index index;
  double tau = kDefaultRankTau;

  const ToyDocument& positive() const {
    return *std::find_if(corpus.begin(), corpus.end(), [&](const auto& d) { return d.id == positive_id; });
  }

  Tokens expanded_query(std::size_t expansion) const {
    require(expansion < expansions.size(), Errc::kInvalidInput, "unknown expansion");
    Tokens t = query_tokens;
    t.insert(t.end(), expansions[expansion].begin(), expansions[expansion].end());
    return t;
  }
};

inline std::string render_tokens(const Tokens& tokens) {
  std::string out;
  for (Token t : tokens) {
    if (!out.empty()) out += ' ';
    out += 'w' + std::to_string(t);
  }
  return out;
}

// Text the toy "model" emits for an expansion: the expansion words then the
// terminal token, or the words alone for a malformed expansion.
inline std::string generated_text(const SyntheticTask& task, std::size_t expansion) {
  std::string text = render_tokens(task.expansions.at(expansion));
  if (!task.malformed.at(expansion)) text.append(" ").append(kEmbToken);
  return text;
}

inline ScoreSet score_expansion(const SyntheticTask& task, std::optional<std::size_t> expansion) {
  const Tokens q = expansion ? task.expanded_query(*expansion) : task.query_tokens;
  const auto scores = task.index.score_all(embed_bag(q, task.index.dim()));
  ScoreSet set;
  set.tau = task.tau;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (task.index.entries()[i].doc_id == task.positive_id) {
      set.positive_scores.push_back(scores[i]);
    } else {
      set.negative_scores.push_back(scores[i]);
    }
  }
  return set;
}

inline RewardBreakdown evaluate_expansion(const SyntheticTask& task, std::size_t expansion,
                                          const FormatPolicy& policy = {}) {
  const auto verdict = validate_output_format(generated_text(task, expansion), Stage::kStage3);
  const auto format = format_reward(verdict, policy);
  if (format.gated) return total_reward(std::nullopt, format);
  return total_reward(score_expansion(task, expansion), format);
}

namespace detail {

inline bool bridge_dominates(const SyntheticTask& task) {
  const auto bridge_scores = score_expansion(task, task.bridge);
  if (hard_rank_oracle(bridge_scores.positive_scores[0], bridge_scores.negative_scores) != 1.0) return false;
  const double bridge_reward = rank_reward(bridge_scores);
  for (std::size_t e = 0; e < task.expansions.size(); ++e) {
    if (e != task.bridge && rank_reward(score_expansion(task, e)) >= bridge_reward) return false;
  }
  return true;
}

inline SyntheticTask draw_task(Rng& rng, const ToyEnvParams& p, std::string query_id) {
  std::vector<Token> perm(p.vocab_size);
  std::iota(perm.begin(), perm.end(), Token{0});
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

  // Reserved disjoint token blocks: query | positive | decoys ; rest is filler.
  auto cursor = perm.begin();
  auto take = [&](std::size_t n) {
    Tokens t(cursor, cursor + static_cast<std::ptrdiff_t>(n));
    cursor += static_cast<std::ptrdiff_t>(n);
    return t;
  };
  SyntheticTask task;
  task.query_id = std::move(query_id);
  task.tau = p.tau;
  task.query_tokens = take(p.query_len);
  const Tokens positive = take(p.doc_len);
  const Tokens bridge(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(p.expansion_len));
  std::vector<Tokens> decoys;
  for (std::size_t j = 0; j + 1 < p.n_expansions; ++j) decoys.push_back(take(p.expansion_len));
  const Tokens filler(cursor, perm.end());

  auto pick = [&](const Tokens& from, std::size_t n) {
    Tokens out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(from[rng.below(from.size())]);
    return out;
  };
  const std::size_t query_overlap = std::max<std::size_t>(1, p.query_len / 2);

  std::vector<Tokens> distractors;
  for (std::size_t k = 0; k < p.n_distractors; ++k) {
    Tokens d = pick(task.query_tokens, query_overlap);
    if (k < decoys.size()) {
      // Target of decoy k: the decoy's tokens plus query overlap.
      d.insert(d.end(), decoys[k].begin(), decoys[k].end());
    }
    const Tokens fill = pick(filler, p.doc_len - std::min(p.doc_len, d.size()));
    d.insert(d.end(), fill.begin(), fill.end());
    distractors.push_back(std::move(d));
  }

  // Expansion order and the positive's position in the corpus are shuffled.
  const std::size_t n_docs = p.n_distractors + 1;
  const std::size_t positive_slot = rng.below(n_docs);
  for (std::size_t i = 0, k = 0; i < n_docs; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "d%03zu", i);
    if (i == positive_slot) {
      task.positive_id = id;
      task.corpus.push_back({id, positive});
    } else {
      task.corpus.push_back({id, distractors[k++]});
    }
  }

  task.bridge = rng.below(p.n_expansions);
  task.expansions.resize(p.n_expansions);
  task.malformed.assign(p.n_expansions, false);
  for (std::size_t e = 0, j = 0; e < p.n_expansions; ++e) {
    if (e == task.bridge) {
      task.expansions[e] = bridge;
    } else {
      task.malformed[e] = j < p.malformed_decoys;
      task.expansions[e] = decoys[j++];
    }
  }

  std::vector<IndexEntry> entries;
  for (const auto& d : task.corpus) entries.push_back({d.id, embed_bag(d.tokens, p.dim)});
  task.index = Index::build(std::move(entries));
  return task;
}

}  // namespace detail

// Tasks that fail the bridge-dominance check (possible through hash noise at
// small dim) are redrawn from the same seeded stream.
inline SyntheticTask generate_task(std::uint64_t seed, const ToyEnvParams& params = {},
                                   std::string query_id = {}) {
  params.validate();
  if (query_id.empty()) query_id = "q" + std::to_string(seed);
  Rng rng(hash_combine(seed, 0x7461736bULL));
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    auto task = detail::draw_task(rng, params, query_id);
    if (detail::bridge_dominates(task)) return task;
  }
  fail(Errc::kInvalidInput, "could not draw a task where the bridge dominates; increase dim or vocab_size");
}

struct ToyEnv {
  ToyEnvParams params;
  FormatPolicy format;
  std::vector<SyntheticTask> tasks;

  static ToyEnv make(std::uint64_t seed, std::size_t n_tasks, const ToyEnvParams& params = {},
                     const FormatPolicy& format = {}) {
    require(n_tasks > 0, Errc::kInvalidInput, "need at least one task");
    ToyEnv env{params, format, {}};
    for (std::size_t i = 0; i < n_tasks; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "t%03zu", i);
      env.tasks.push_back(generate_task(hash_combine(seed, i), params, id));
    }
    return env;
  }

  ToyPolicy uniform_policy(double temperature = 1.0) const {
    return ToyPolicy(tasks.size(), params.n_expansions, temperature);
  }
};

// Samples group_size expansions for the task's policy row and scores each one
// through the index and the reward module.
inline std::vector<GroupSample> rollout(const ToyPolicy& policy, const SyntheticTask& task, std::size_t row,
                                        std::size_t group_size, std::uint64_t seed,
                                        const FormatPolicy& format = {}) {
  require(policy.actions() == task.expansions.size(), Errc::kInvalidInput,
          "policy action count does not match the task's expansions");
  require(group_size > 0, Errc::kInvalidInput, "group_size must be positive");
  Rng rng(seed);
  std::vector<GroupSample> samples;
  samples.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    const ActionRef ref{row, policy.sample(row, rng)};
    samples.push_back({task.query_id, i, ref, policy.logprob(ref), evaluate_expansion(task, ref.action, format),
                       !task.malformed[ref.action]});
  }
  return samples;
}

// Expected ranking reward of the policy row on the task, by enumeration.
// Gated (malformed) expansions contribute zero ranking reward.
inline double expected_rank_reward(const ToyPolicy& policy, const SyntheticTask& task, std::size_t row,
                                   const FormatPolicy& format = {}) {
  const auto probs = policy.probabilities(row);
  double total = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    total += probs[a] * evaluate_expansion(task, a, format).r_rank.value_or(0.0);
  }
  return total;
}

}  // namespace t1
