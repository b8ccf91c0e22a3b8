#pragma once

// Training loss kernels and their stage-weighted combination. Similarity is
// cosine: embeddings are normalized inside the kernels, and grad_query is the
// gradient with respect to the raw (unnormalized) query components.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "t1/embedding.hpp"
#include "t1/error.hpp"
#include "t1/protocol.hpp"

namespace t1 {

inline constexpr double kDefaultNceTemperature = 0.05;
inline constexpr double kDefaultTripletMargin = 0.2;

struct StageLossWeights {
  double sft = 0.0;
  double nce = 0.0;
  double tri = 0.0;
  double kl = 0.0;
  Stage stage = Stage::kStage1;

  // Cold start: SFT-heavy, large triplet weight, weak KL regularizer.
  static constexpr StageLossWeights stage1() { return {0.8, 1.0, 15.0, 0.02, Stage::kStage1}; }
  // Reasoning alignment: more SFT, smaller triplet, KL dropped.
  static constexpr StageLossWeights stage2() { return {2.4, 1.0, 6.9, 0.0, Stage::kStage2}; }

  static StageLossWeights for_stage(Stage s) {
    require(s != Stage::kStage3, Errc::kInvalidInput, "stage 3 is reward-driven and has no loss weights");
    return s == Stage::kStage1 ? stage1() : stage2();
  }

  void validate() const {
    for (double w : {sft, nce, tri, kl}) {
      require(std::isfinite(w) && w >= 0.0, Errc::kInvalidInput, "stage loss weights must be finite and >= 0");
    }
  }
};

struct LossComponents {
  double sft = 0.0;
  double nce = 0.0;
  double tri = 0.0;
  double kl = 0.0;
};

inline double combine_stage(const StageLossWeights& w, const LossComponents& c) {
  for (double v : {c.sft, c.nce, c.tri, c.kl}) {
    require(std::isfinite(v), Errc::kInvalidInput, "loss component is not finite");
  }
  return w.sft * c.sft + w.nce * c.nce + w.tri * c.tri + w.kl * c.kl;
}

struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad_query;
};

// ---------------------------------------------------------------------------
// Score-level kernels

// -log softmax of the positive among {positive} U negatives, scores / t.
inline double info_nce_from_scores(double positive, std::span<const double> negatives, double temperature) {
  require(!negatives.empty(), Errc::kInvalidInput, "InfoNCE needs at least one negative");
  require(temperature > 0.0, Errc::kInvalidInput, "temperature must be positive");
  double top = positive / temperature;
  for (double s : negatives) top = std::max(top, s / temperature);
  double sum = std::exp(positive / temperature - top);
  for (double s : negatives) sum += std::exp(s / temperature - top);
  return std::max(0.0, top + std::log(sum) - positive / temperature);
}

inline double triplet_from_scores(double positive, double negative, double margin) {
  require(margin >= 0.0, Errc::kInvalidInput, "triplet margin must be >= 0");
  return std::max(0.0, margin - positive + negative);
}

namespace detail {

// Cosine similarity of q with d and its gradient with respect to q.
struct CosineGrad {
  double value;
  std::vector<double> grad;
};

inline CosineGrad cosine_with_grad(std::span<const double> q, std::span<const double> d) {
  require(q.size() == d.size(), Errc::kDimMismatch, "embedding dims differ");
  const double qn = l2_norm(q);
  const double dn = l2_norm(d);
  require(qn > 0.0 && dn > 0.0, Errc::kInvalidInput, "zero vector in similarity");
  const double cos = dot(q, d) / (qn * dn);
  std::vector<double> grad(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) grad[i] = (d[i] / dn - cos * q[i] / qn) / qn;
  return {cos, std::move(grad)};
}

inline void axpy(double a, std::span<const double> x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding-level kernels

struct ContrastiveBatch {
  Embedding query;
  Embedding positive;
  std::vector<Embedding> negatives;
  double temperature = kDefaultNceTemperature;
};

inline LossAndGrad info_nce(const ContrastiveBatch& batch) {
  require(!batch.negatives.empty(), Errc::kInvalidInput, "InfoNCE needs at least one negative");
  require(batch.temperature > 0.0, Errc::kInvalidInput, "temperature must be positive");
  const double t = batch.temperature;

  std::vector<detail::CosineGrad> sims;
  sims.reserve(batch.negatives.size() + 1);
  sims.push_back(detail::cosine_with_grad(batch.query.values(), batch.positive.values()));
  for (const auto& n : batch.negatives) sims.push_back(detail::cosine_with_grad(batch.query.values(), n.values()));

  double top = -std::numeric_limits<double>::infinity();
  for (const auto& s : sims) top = std::max(top, s.value / t);
  std::vector<double> weights(sims.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) sum += (weights[i] = std::exp(sims[i].value / t - top));

  LossAndGrad out;
  out.value = std::max(0.0, top + std::log(sum) - sims[0].value / t);
  out.grad_query.assign(batch.query.dim(), 0.0);
  // dL/ds_i = (softmax_i - [i is positive]) / t
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const double coeff = (weights[i] / sum - (i == 0 ? 1.0 : 0.0)) / t;
    detail::axpy(coeff, sims[i].grad, out.grad_query);
  }
  return out;
}

struct BatchLoss {
  double mean = 0.0;
  // d(mean)/d(query_i) for every query in the batch.
  std::vector<std::vector<double>> grad_queries;
};

// Mean InfoNCE over a batch of queries. With in-batch negatives, the positives
// of the other queries are appended to each query's own negatives.
inline BatchLoss info_nce_mean(std::span<const ContrastiveBatch> batches, bool in_batch_negatives = false) {
  require(!batches.empty(), Errc::kInvalidInput, "empty InfoNCE batch");
  const double inv = 1.0 / static_cast<double>(batches.size());
  BatchLoss total;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    ContrastiveBatch b = batches[i];
    if (in_batch_negatives) {
      for (std::size_t j = 0; j < batches.size(); ++j) {
        if (j != i) b.negatives.push_back(batches[j].positive);
      }
    }
    auto r = info_nce(b);
    total.mean += r.value * inv;
    for (double& g : r.grad_query) g *= inv;
    total.grad_queries.push_back(std::move(r.grad_query));
  }
  return total;
}

inline LossAndGrad triplet(const Embedding& query, const Embedding& positive, const Embedding& negative,
                           double margin = kDefaultTripletMargin) {
  require(margin >= 0.0, Errc::kInvalidInput, "triplet margin must be >= 0");
  require(query.dim() == positive.dim() && query.dim() == negative.dim(), Errc::kDimMismatch,
          "triplet embeddings have different dims");
  const auto sp = detail::cosine_with_grad(query.values(), positive.values());
  const auto sn = detail::cosine_with_grad(query.values(), negative.values());
  LossAndGrad out;
  out.grad_query.assign(query.dim(), 0.0);
  const double slack = margin - sp.value + sn.value;
  // Subgradient at the hinge (slack == 0) is taken as zero.
  if (slack > 0.0) {
    out.value = slack;
    detail::axpy(-1.0, sp.grad, out.grad_query);
    detail::axpy(1.0, sn.grad, out.grad_query);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token-level terms

struct TokenLogProbs {
  std::vector<double> policy_logp;
  std::optional<std::vector<double>> reference_logp;
  std::vector<bool> response_mask;

  void validate() const {
    require(response_mask.size() == policy_logp.size(), Errc::kInvalidInput,
            "response_mask and policy_logp lengths differ");
    auto check = [](const std::vector<double>& logp, const char* name) {
      for (double v : logp) {
        require(std::isfinite(v) && v <= 0.0, Errc::kInvalidInput,
                std::string(name) + " must be finite log-probabilities (<= 0)");
      }
    };
    check(policy_logp, "policy_logp");
    if (reference_logp) {
      require(reference_logp->size() == policy_logp.size(), Errc::kInvalidInput,
              "reference_logp and policy_logp lengths differ");
      check(*reference_logp, "reference_logp");
    }
  }

  std::size_t response_count() const {
    return static_cast<std::size_t>(std::count(response_mask.begin(), response_mask.end(), true));
  }
};

// Mean negative log-likelihood over response tokens.
inline double sft_nll(const TokenLogProbs& tokens) {
  tokens.validate();
  const std::size_t n = tokens.response_count();
  require(n > 0, Errc::kInvalidInput, "no response tokens under the mask");
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.policy_logp.size(); ++i) {
    if (tokens.response_mask[i]) sum += tokens.policy_logp[i];
  }
  return -sum / static_cast<double>(n);
}

// Per-token KL estimator against a reference policy on policy samples:
// mean over response tokens of (log pi - log pi_ref).
inline double kl_reg(const TokenLogProbs& tokens) {
  require(tokens.reference_logp.has_value(), Errc::kInvalidInput, "KL term needs reference log-probabilities");
  tokens.validate();
  const std::size_t n = tokens.response_count();
  require(n > 0, Errc::kInvalidInput, "no response tokens under the mask");
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.policy_logp.size(); ++i) {
    if (tokens.response_mask[i]) sum += tokens.policy_logp[i] - (*tokens.reference_logp)[i];
  }
  return sum / static_cast<double>(n);
}

}  // namespace t1
