#pragma once

// Stage-3 reward: a sigmoid-smoothed rank of each positive among the
// negatives, normalized into [0,1], plus a format term that can gate the
// ranking reward off entirely for malformed outputs.
//
//   Rank(p) = 1 + sum_n sigmoid((s_n - s_p) / tau)
//   R_rank  = 1 - mean_p log Rank(p) / log(|N| + 1)
//   R_total = R_rank + R_format

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "t1/error.hpp"
#include "t1/protocol.hpp"

namespace t1 {

inline constexpr double kDefaultRankTau = 0.05;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// sigmoid'(x) = sigmoid(x) * sigmoid(-x), without cancellation in the tails.
inline double sigmoid_derivative(double x) { return sigmoid(x) * sigmoid(-x); }

struct ScoreSet {
  std::vector<double> positive_scores;
  std::vector<double> negative_scores;
  double tau = kDefaultRankTau;

  void validate() const {
    require(!positive_scores.empty(), Errc::kInvalidInput, "score set needs at least one positive");
    require(std::isfinite(tau) && tau > 0.0, Errc::kInvalidInput, "tau must be positive and finite");
    for (double s : positive_scores) require(std::isfinite(s), Errc::kInvalidInput, "non-finite positive score");
    for (double s : negative_scores) require(std::isfinite(s), Errc::kInvalidInput, "non-finite negative score");
  }
};

inline double soft_rank(double p_score, std::span<const double> negative_scores, double tau) {
  require(std::isfinite(tau) && tau > 0.0, Errc::kInvalidInput, "tau must be positive and finite");
  require(std::isfinite(p_score), Errc::kInvalidInput, "non-finite positive score");
  double rank = 1.0;
  for (double n : negative_scores) {
    require(std::isfinite(n), Errc::kInvalidInput, "non-finite negative score");
    rank += sigmoid((n - p_score) / tau);
  }
  return rank;
}

// Zero-temperature limit of soft_rank: ties count one half, like sigmoid(0).
inline double hard_rank_oracle(double p_score, std::span<const double> negative_scores) {
  double rank = 1.0;
  for (double n : negative_scores) {
    if (n > p_score) {
      rank += 1.0;
    } else if (n == p_score) {
      rank += 0.5;
    }
  }
  return rank;
}

// Natural log internally; `log_base` exists to demonstrate that the ratio is
// base-free. With no negatives the positive trivially ranks first and the
// reward is 1.
inline double rank_reward(const ScoreSet& scores, double log_base = std::numbers::e) {
  scores.validate();
  require(log_base > 0.0 && log_base != 1.0, Errc::kInvalidInput, "log base must be positive and != 1");
  if (scores.negative_scores.empty()) return 1.0;
  const double ln_base = std::log(log_base);
  double mean_log_rank = 0.0;
  for (double p : scores.positive_scores) {
    mean_log_rank += std::log(soft_rank(p, scores.negative_scores, scores.tau)) / ln_base;
  }
  mean_log_rank /= static_cast<double>(scores.positive_scores.size());
  const double denom = std::log(static_cast<double>(scores.negative_scores.size()) + 1.0) / ln_base;
  return 1.0 - mean_log_rank / denom;
}

// Gradient of rank_reward with respect to every score, positives first then
// negatives, in input order.
inline std::vector<double> rank_reward_grad(const ScoreSet& scores) {
  scores.validate();
  const auto& pos = scores.positive_scores;
  const auto& neg = scores.negative_scores;
  std::vector<double> grad(pos.size() + neg.size(), 0.0);
  if (neg.empty()) return grad;

  const double tau = scores.tau;
  // R = 1 - c * sum_p log Rank(p), c = 1 / (|P| log(|N|+1))
  const double c = 1.0 / (static_cast<double>(pos.size()) * std::log(static_cast<double>(neg.size()) + 1.0));
  for (std::size_t j = 0; j < pos.size(); ++j) {
    const double rank = soft_rank(pos[j], neg, tau);
    const double scale = c / (rank * tau);
    for (std::size_t k = 0; k < neg.size(); ++k) {
      const double d = sigmoid_derivative((neg[k] - pos[j]) / tau) * scale;
      grad[j] += d;               // dRank/ds_p = -sigma'/tau, and R has -c/Rank in front
      grad[pos.size() + k] -= d;  // dRank/ds_n = +sigma'/tau
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Format term

struct FormatPolicy {
  double penalty_invalid = -1.0;
  double penalty_valid = 0.0;
  bool gating = true;

  void validate() const {
    require(std::isfinite(penalty_invalid) && std::isfinite(penalty_valid), Errc::kInvalidInput,
            "format penalties must be finite");
    require(penalty_invalid <= penalty_valid && penalty_valid <= 0.0, Errc::kInvalidInput,
            "format penalties must satisfy penalty_invalid <= penalty_valid <= 0");
  }
};

struct FormatReward {
  double r_format = 0.0;
  bool gated = false;
};

inline FormatReward format_reward(const FormatVerdict& verdict, const FormatPolicy& policy = {}) {
  policy.validate();
  if (verdict.valid) return {policy.penalty_valid, false};
  return {policy.penalty_invalid, policy.gating};
}

struct RewardBreakdown {
  std::optional<double> r_rank;  // absent when gated
  double r_format = 0.0;
  double r_total = 0.0;
  bool gated = false;
};

inline RewardBreakdown total_reward(const std::optional<ScoreSet>& scores, const FormatReward& format) {
  RewardBreakdown out;
  out.r_format = format.r_format;
  out.gated = format.gated;
  if (format.gated) {
    out.r_total = format.r_format;
    return out;
  }
  require(scores.has_value(), Errc::kInvalidInput, "ungated reward needs a score set");
  out.r_rank = rank_reward(*scores);
  out.r_total = *out.r_rank + format.r_format;
  return out;
}

inline nlohmann::json to_json(const RewardBreakdown& r) {
  nlohmann::json j;
  j["r_rank"] = r.r_rank ? nlohmann::json(*r.r_rank) : nlohmann::json(nullptr);
  j["r_format"] = r.r_format;
  j["r_total"] = r.r_total;
  j["gated"] = r.gated;
  return j;
}

}  // namespace t1
