#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fundalloc/errors.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {

enum class LossKind { Esj, Ziln, Mse };

inline const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Esj:
      return "esj";
    case LossKind::Ziln:
      return "ziln";
    case LossKind::Mse:
      return "mse";
  }
  return "?";
}

struct PredictionTriple {
  double p_c = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

struct TrainConfig {
  double epsilon = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  long epochs = 10;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::Esj;
  double sigma_floor = 1e-3;

  void validate() const {
    if (epsilon < 0.0) throw Error(ErrorCode::InvalidConfig, "epsilon must be >= 0");
    if (sigma_floor <= 0.0) throw Error(ErrorCode::InvalidConfig, "sigma_floor must be > 0");
    if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (!(learning_rate >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "learning_rate must be >= 0");
    }
  }
};

/// Smallest log-density the counterfactual branch is allowed to contribute;
/// exp(-745) sits just above double underflow, so the branch degrades to a
/// negligible probability instead of flushing to -inf.
inline constexpr double kCounterfactualLogFloor = -745.0;

/// Density of the shifted log-normal at the observed point, in log space:
/// log[1/(sqrt(2 pi) sigma y_v)] - (v - mu)^2 / (2 sigma^2), where v = log(y_v)
/// and y_v is the revenue shifted by one.
inline double lognormal_logpdf(double v_obs, double mu, double sigma, double y_v) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::NonpositiveSigma,
                "sigma must be positive, got " + std::to_string(sigma));
  }
  constexpr double half_log_2pi = 0.91893853320467274178;  // log(sqrt(2 pi))
  const double z = (v_obs - mu) / sigma;
  return -half_log_2pi - std::log(sigma) - std::log(y_v) - 0.5 * z * z;
}

namespace detail {

inline void check_batch(const std::vector<LabeledSample>& batch,
                        const std::vector<PredictionTriple>& triples) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "loss over an empty batch is undefined");
  if (triples.size() != batch.size()) {
    throw Error(ErrorCode::DimMismatch, "got " + std::to_string(triples.size()) +
                                            " prediction triples for " +
                                            std::to_string(batch.size()) + " samples");
  }
}

/// log(1 - p + p * exp(l)) via two-term log-sum-exp so a tiny l cannot
/// underflow the whole expression.
inline double negative_log_inner(double p, double l) {
  const double a = std::log1p(-p);           // log(1 - p)
  const double b = std::log(p) + std::max(l, kCounterfactualLogFloor);
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

}  // namespace detail

/// Joint loss over the entire sample space: positives pay cross-entropy plus
/// the log-normal regression term; negatives pay the mixture of "never
/// intended" and "intended but produced only the counterfactual revenue
/// epsilon". Disabling the counterfactual branch reduces negatives to plain
/// cross-entropy.
inline double esj_loss(const std::vector<LabeledSample>& batch,
                       const std::vector<PredictionTriple>& triples, double epsilon,
                       bool counterfactual = true) {
  detail::check_batch(batch, triples);
  const double v_cf = std::log1p(epsilon);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledSample& s = batch[i];
    const PredictionTriple& t = triples[i];
    if (s.y != 0) {
      const double v = std::log1p(s.revenue);
      total += std::log(t.p_c) + lognormal_logpdf(v, t.mu, t.sigma, s.revenue + 1.0);
    } else if (counterfactual) {
      const double l_cf = lognormal_logpdf(v_cf, t.mu, t.sigma, epsilon + 1.0);
      total += detail::negative_log_inner(t.p_c, l_cf);
    } else {
      total += std::log1p(-t.p_c);
    }
  }
  return -total / static_cast<double>(batch.size());
}

/// Zero-inflated log-normal baseline: cross-entropy on every sample plus the
/// log-normal regression on positives only. Written out independently of
/// esj_loss so the equivalence between the two is a checkable fact rather
/// than a tautology.
inline double ziln_loss(const std::vector<LabeledSample>& batch,
                        const std::vector<PredictionTriple>& triples) {
  detail::check_batch(batch, triples);
  double cross_entropy = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p = triples[i].p_c;
    cross_entropy -= batch[i].y != 0 ? std::log(p) : std::log1p(-p);
  }
  double regression = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].y == 0) continue;
    const double v = std::log1p(batch[i].revenue);
    regression -= lognormal_logpdf(v, triples[i].mu, triples[i].sigma, batch[i].revenue + 1.0);
  }
  return (cross_entropy + regression) / static_cast<double>(batch.size());
}

/// Multi-task MSE baseline: mean binary cross-entropy on the conversion head
/// plus the mean squared error between mu and the log-shifted revenue over
/// the positive samples.
inline double mse_loss(const std::vector<LabeledSample>& batch,
                       const std::vector<PredictionTriple>& triples) {
  detail::check_batch(batch, triples);
  double cross_entropy = 0.0;
  double squared = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p = triples[i].p_c;
    if (batch[i].y != 0) {
      cross_entropy -= std::log(p);
      const double d = triples[i].mu - std::log1p(batch[i].revenue);
      squared += d * d;
      ++positives;
    } else {
      cross_entropy -= std::log1p(-p);
    }
  }
  double loss = cross_entropy / static_cast<double>(batch.size());
  if (positives > 0) loss += squared / static_cast<double>(positives);
  return loss;
}

/// Expected (log-shifted) revenue of a prediction: P_c * exp(mu + sigma^2/2).
inline double expected_revenue(const PredictionTriple& t) {
  return t.p_c * std::exp(t.mu + 0.5 * t.sigma * t.sigma);
}

/// Per-sample loss gradient. `d_logit_p` is taken with respect to the logit
/// of P_c (the form p*w - (1-p)*r stays bounded where the plain d/dp blows
/// up as P_c saturates); `d_mu` and `d_sigma` are direct. Values are
/// unnormalized: batch assembly divides by the relevant counts.
struct SampleGrad {
  double d_logit_p = 0.0;
  double d_mu = 0.0;
  double d_sigma = 0.0;
};

/// Gradient of the positive-sample term shared by ESJ and ZILN:
/// -(log p + lognormal_logpdf(v, mu, sigma, y_v)).
inline SampleGrad positive_sample_grad(const LabeledSample& s, const PredictionTriple& t) {
  const double v = std::log1p(s.revenue);
  SampleGrad g;
  g.d_logit_p = t.p_c - 1.0;
  g.d_mu = -(v - t.mu) / (t.sigma * t.sigma);
  g.d_sigma = 1.0 / t.sigma - (v - t.mu) * (v - t.mu) / (t.sigma * t.sigma * t.sigma);
  return g;
}

/// Gradient of the ESJ negative-sample term -log(1 - p + p exp(l_cf)).
inline SampleGrad esj_negative_grad(const PredictionTriple& t, double epsilon) {
  const double v_cf = std::log1p(epsilon);
  const double l_cf =
      std::max(lognormal_logpdf(v_cf, t.mu, t.sigma, epsilon + 1.0), kCounterfactualLogFloor);
  const double inner = detail::negative_log_inner(t.p_c, l_cf);
  const double w = std::exp(std::log1p(-t.p_c) - inner);      // (1-p)/I
  const double r = std::exp(std::log(t.p_c) + l_cf - inner);  // p exp(l_cf)/I
  SampleGrad g;
  g.d_logit_p = t.p_c * w - (1.0 - t.p_c) * r;
  const double zs = (v_cf - t.mu) / (t.sigma * t.sigma);
  g.d_mu = -r * zs;
  g.d_sigma = -r * (-1.0 / t.sigma + (v_cf - t.mu) * (v_cf - t.mu) /
                                         (t.sigma * t.sigma * t.sigma));
  return g;
}

/// Gradient of a single sample's contribution, unnormalized. For MSE the
/// regression part is returned raw (2 * (mu - v)); the caller applies the
/// per-positive normalization that mse_loss uses.
inline SampleGrad sample_grad(LossKind kind, const LabeledSample& s, const PredictionTriple& t,
                              double epsilon, bool counterfactual = true) {
  if (kind == LossKind::Mse) {
    SampleGrad g;
    g.d_logit_p = t.p_c - static_cast<double>(s.y);
    if (s.y != 0) g.d_mu = 2.0 * (t.mu - std::log1p(s.revenue));
    return g;
  }
  if (s.y != 0) return positive_sample_grad(s, t);
  if (kind == LossKind::Esj && counterfactual) return esj_negative_grad(t, epsilon);
  SampleGrad g;
  g.d_logit_p = t.p_c;
  return g;
}

}  // namespace fundalloc
