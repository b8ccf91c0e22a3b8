#pragma once

// Group-relative policy optimization on the toy environment: sample a group
// of expansions per query, z-score the rewards within the group, and take a
// REINFORCE step with those advantages. No clipping and no KL-to-reference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "t1/error.hpp"
#include "t1/policy.hpp"
#include "t1/rng.hpp"
#include "t1/toy_env.hpp"

namespace t1 {

struct GrpoConfig {
  std::size_t group_size = 8;
  double learning_rate = 0.1;
  double advantage_epsilon = 1e-8;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;

  void validate() const {
    require(group_size >= 2, Errc::kInvalidInput, "group_size must be >= 2");
    require(std::isfinite(learning_rate) && learning_rate > 0.0, Errc::kInvalidInput,
            "learning_rate must be positive");
    require(std::isfinite(advantage_epsilon) && advantage_epsilon > 0.0, Errc::kInvalidInput,
            "advantage_epsilon must be positive");
    require(iterations > 0, Errc::kInvalidInput, "iterations must be positive");
  }
};

// a_i = (r_i - mean) / (std + eps) with the population std. A group whose
// rewards are all identical gets exactly zero advantages.
inline std::vector<double> group_advantages(std::span<const double> rewards, double epsilon = 1e-8) {
  require(rewards.size() >= 2, Errc::kInvalidInput, "a group needs at least two rewards");
  require(epsilon > 0.0, Errc::kInvalidInput, "advantage epsilon must be positive");
  for (double r : rewards) require(std::isfinite(r), Errc::kInvalidInput, "non-finite reward");
  std::vector<double> adv(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) return adv;

  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

// logits += lr * sum_i a_i * d log pi(a_i) / d logits, with every gradient
// evaluated at the incoming policy.
inline ToyPolicy policy_gradient_step(const ToyPolicy& policy, std::span<const GroupSample> samples,
                                      std::span<const double> advantages, double lr) {
  require(samples.size() == advantages.size(), Errc::kInvalidInput,
          "samples and advantages have different lengths");
  require(std::isfinite(lr) && lr > 0.0, Errc::kInvalidInput, "learning rate must be positive");
  for (const auto& s : samples) policy.check(s.action);

  ToyPolicy next = policy;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (advantages[i] == 0.0) continue;
    const auto& ref = samples[i].action;
    const auto g = policy.logprob_gradient(ref);
    for (std::size_t j = 0; j < g.size(); ++j) next.logit(ref.row, j) += lr * advantages[i] * g[j];
  }
  return next;
}

struct IterationStats {
  std::size_t iteration = 0;
  double mean_reward = 0.0;
  double mean_r_rank = 0.0;  // over ungated samples
  double format_violation_rate = 0.0;
};

struct IterationResult {
  IterationStats stats;
  ToyPolicy policy;
};

inline std::uint64_t rollout_seed(std::uint64_t seed, std::size_t iteration, std::size_t task) {
  return hash_combine(hash_combine(seed, iteration), task);
}

// One GRPO iteration: a group per task, one policy update per group. Policy
// row i belongs to env.tasks[i].
inline IterationResult grpo_iteration(const ToyEnv& env, const ToyPolicy& policy, const GrpoConfig& config,
                                      std::size_t iteration = 0) {
  config.validate();
  require(policy.rows() == env.tasks.size(), Errc::kInvalidInput, "policy rows must match the task count");
  IterationResult out{{iteration, 0.0, 0.0, 0.0}, policy};
  std::size_t n_samples = 0, n_ranked = 0, n_invalid = 0;
  double rank_sum = 0.0;
  for (std::size_t t = 0; t < env.tasks.size(); ++t) {
    const auto samples = rollout(out.policy, env.tasks[t], t, config.group_size,
                                 rollout_seed(config.seed, iteration, t), env.format);
    std::vector<double> rewards;
    rewards.reserve(samples.size());
    for (const auto& s : samples) {
      rewards.push_back(s.reward.r_total);
      out.stats.mean_reward += s.reward.r_total;
      if (s.reward.r_rank) {
        rank_sum += *s.reward.r_rank;
        ++n_ranked;
      }
      if (!s.format_valid) ++n_invalid;
      ++n_samples;
    }
    const auto adv = group_advantages(rewards, config.advantage_epsilon);
    out.policy = policy_gradient_step(out.policy, samples, adv, config.learning_rate);
  }
  out.stats.mean_reward /= static_cast<double>(n_samples);
  out.stats.mean_r_rank = n_ranked ? rank_sum / static_cast<double>(n_ranked) : 0.0;
  out.stats.format_violation_rate = static_cast<double>(n_invalid) / static_cast<double>(n_samples);
  return out;
}

struct TrainResult {
  ToyPolicy policy;
  std::vector<IterationStats> history;
};

inline TrainResult grpo_train(const ToyEnv& env, ToyPolicy policy, const GrpoConfig& config,
                              const std::function<void(const IterationStats&)>& on_iteration = {}) {
  config.validate();
  TrainResult result{std::move(policy), {}};
  result.history.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    auto step = grpo_iteration(env, result.policy, config, it);
    result.policy = std::move(step.policy);
    if (on_iteration) on_iteration(step.stats);
    result.history.push_back(step.stats);
  }
  return result;
}

// Mean over tasks of the policy's expected ranking reward.
inline double mean_expected_rank_reward(const ToyEnv& env, const ToyPolicy& policy) {
  double total = 0.0;
  for (std::size_t t = 0; t < env.tasks.size(); ++t) total += expected_rank_reward(policy, env.tasks[t], t, env.format);
  return total / static_cast<double>(env.tasks.size());
}

inline double bridge_argmax_fraction(const ToyEnv& env, const ToyPolicy& policy) {
  std::size_t hits = 0;
  for (std::size_t t = 0; t < env.tasks.size(); ++t) hits += policy.argmax(t) == env.tasks[t].bridge;
  return static_cast<double>(hits) / static_cast<double>(env.tasks.size());
}

}  // namespace t1
