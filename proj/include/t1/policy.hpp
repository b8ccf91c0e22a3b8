#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "t1/error.hpp"
#include "t1/reward.hpp"
#include "t1/rng.hpp"

namespace t1 {

struct ActionRef {
  std::size_t row = 0;     // query type
  std::size_t action = 0;  // expansion index

  friend bool operator==(const ActionRef&, const ActionRef&) = default;
};

// Tabular softmax policy: one row of logits per query type, one column per
// candidate reasoning expansion. pi(a | row) = softmax(logits[row] / temperature).
class ToyPolicy {
 public:
  ToyPolicy(std::size_t rows, std::size_t actions, double temperature = 1.0)
      : rows_(rows), actions_(actions), temperature_(temperature), logits_(rows * actions, 0.0) {
    require(rows > 0 && actions > 0, Errc::kInvalidInput, "policy needs at least one row and one action");
    require(std::isfinite(temperature) && temperature > 0.0, Errc::kInvalidInput,
            "policy temperature must be positive");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t actions() const noexcept { return actions_; }
  double temperature() const noexcept { return temperature_; }

  std::span<const double> logits(std::size_t row) const {
    check_row(row);
    return std::span<const double>(logits_).subspan(row * actions_, actions_);
  }

  double& logit(std::size_t row, std::size_t action) {
    check(ActionRef{row, action});
    return logits_[row * actions_ + action];
  }

  std::vector<double> probabilities(std::size_t row) const {
    const auto l = logits(row);
    double top = -std::numeric_limits<double>::infinity();
    for (double v : l) top = std::max(top, v / temperature_);
    std::vector<double> p(actions_);
    double sum = 0.0;
    for (std::size_t a = 0; a < actions_; ++a) sum += (p[a] = std::exp(l[a] / temperature_ - top));
    for (double& v : p) v /= sum;
    return p;
  }

  double logprob(const ActionRef& ref) const {
    check(ref);
    const auto l = logits(ref.row);
    double top = -std::numeric_limits<double>::infinity();
    for (double v : l) top = std::max(top, v / temperature_);
    double sum = 0.0;
    for (double v : l) sum += std::exp(v / temperature_ - top);
    return std::min(0.0, l[ref.action] / temperature_ - top - std::log(sum));
  }

  // d log pi(action | row) / d logits[row][j] = ([j == action] - pi_j) / temperature
  std::vector<double> logprob_gradient(const ActionRef& ref) const {
    check(ref);
    auto g = probabilities(ref.row);
    for (std::size_t j = 0; j < actions_; ++j) g[j] = ((j == ref.action ? 1.0 : 0.0) - g[j]) / temperature_;
    return g;
  }

  std::size_t argmax(std::size_t row) const {
    const auto l = logits(row);
    return static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
  }

  // Inverse-CDF draw from the row distribution.
  std::size_t sample(std::size_t row, Rng& rng) const {
    const auto p = probabilities(row);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t a = 0; a < actions_; ++a) {
      acc += p[a];
      if (u < acc) return a;
    }
    return actions_ - 1;
  }

  void check(const ActionRef& ref) const {
    check_row(ref.row);
    require(ref.action < actions_, Errc::kInvalidInput,
            "unknown action " + std::to_string(ref.action) + " (policy has " + std::to_string(actions_) + ")");
  }

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  void check_row(std::size_t row) const {
    require(row < rows_, Errc::kInvalidInput,
            "unknown policy row " + std::to_string(row) + " (policy has " + std::to_string(rows_) + ")");
  }

  std::size_t rows_;
  std::size_t actions_;
  double temperature_;
  std::vector<double> logits_;
};

// One sampled trajectory for a query.
struct GroupSample {
  std::string query_id;
  std::size_t trajectory_id = 0;
  ActionRef action;
  double logprob = 0.0;
  RewardBreakdown reward;
  bool format_valid = true;
};

}  // namespace t1
