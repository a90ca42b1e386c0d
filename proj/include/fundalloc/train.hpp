#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fundalloc/domain.hpp"
#include "fundalloc/errors.hpp"
#include "fundalloc/loss.hpp"
#include "fundalloc/net.hpp"
#include "fundalloc/rng.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {

inline double batch_loss(const MlpModel& model, const std::vector<LabeledSample>& batch,
                         const TrainConfig& config) {
  std::vector<PredictionTriple> triples(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    triples[i] = model.forward(batch[i].customer_features, batch[i].fund_features);
  }
  switch (config.loss) {
    case LossKind::Esj:
      return esj_loss(batch, triples, config.epsilon);
    case LossKind::Ziln:
      return ziln_loss(batch, triples);
    case LossKind::Mse:
      return mse_loss(batch, triples);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown loss kind");
}

/// Loss and parameter gradient over one batch, normalized exactly the way
/// the corresponding batch loss is (per-sample terms by batch size; the MSE
/// regression term by the batch's positive count).
inline double batch_gradient(const MlpModel& model, const std::vector<LabeledSample>& batch,
                             const TrainConfig& config, std::vector<double>& grad) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "gradient over an empty batch is undefined");
  grad.assign(model.param_count(), 0.0);

  std::size_t positives = 0;
  for (const LabeledSample& s : batch) positives += s.y != 0 ? 1 : 0;
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  const double inv_pos = positives > 0 ? 1.0 / static_cast<double>(positives) : 0.0;

  std::vector<PredictionTriple> triples(batch.size());
  MlpModel::Cache cache;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledSample& s = batch[i];
    const PredictionTriple t = model.forward_cached(s.customer_features, s.fund_features, cache);
    triples[i] = t;
    SampleGrad g = sample_grad(config.loss, s, t, config.epsilon);
    if (config.loss == LossKind::Mse) {
      g.d_logit_p *= inv_m;
      g.d_mu *= inv_pos;
    } else {
      g.d_logit_p *= inv_m;
      g.d_mu *= inv_m;
      g.d_sigma *= inv_m;
    }
    model.backward(cache, g, grad);
  }

  switch (config.loss) {
    case LossKind::Esj:
      return esj_loss(batch, triples, config.epsilon);
    case LossKind::Ziln:
      return ziln_loss(batch, triples);
    case LossKind::Mse:
      return mse_loss(batch, triples);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown loss kind");
}

namespace detail {

inline void check_finite_params(const std::vector<double>& params) {
  for (double p : params) {
    if (!std::isfinite(p)) {
      throw Error(ErrorCode::Diverged, "model parameters became non-finite during training");
    }
  }
}

}  // namespace detail

/// Minibatch Adam over a 90/10 train/validation split. Returns the snapshot
/// with the lowest validation loss seen after any epoch; identical seeds
/// yield bit-identical models. `val_history`, when given, receives the
/// validation loss before training and after every epoch.
inline MlpModel train(const std::vector<LabeledSample>& dataset, const TrainConfig& config,
                      std::vector<double>* val_history = nullptr) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyBatch, "training set is empty");

  const std::size_t customer_dim = dataset.front().customer_features.size();
  const std::size_t fund_dim = dataset.front().fund_features.size();
  for (const LabeledSample& s : dataset) {
    if (s.customer_features.size() != customer_dim || s.fund_features.size() != fund_dim) {
      throw Error(ErrorCode::DimMismatch, "inconsistent feature dimensions in training set");
    }
  }

  MlpModel model(customer_dim, fund_dim, 64, 32, config.sigma_floor);
  model.set_train_epsilon(config.epsilon);
  {
    Rng init_rng(derive_seed(config.seed, 10));
    model.init(init_rng);
  }

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng split_rng(derive_seed(config.seed, 11));
    split_rng.shuffle(order);
  }
  const std::size_t n_val = dataset.size() >= 10 ? dataset.size() / 10 : (dataset.size() > 1 ? 1 : 0);
  const std::size_t n_train = dataset.size() - n_val;

  std::vector<LabeledSample> val;
  val.reserve(n_val);
  for (std::size_t i = n_train; i < dataset.size(); ++i) val.push_back(dataset[order[i]]);

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));

  auto validation_loss = [&](const MlpModel& m) {
    return batch_loss(m, val.empty() ? dataset : val, config);
  };

  AdamState adam(model.param_count());
  std::vector<double> grad;
  std::vector<LabeledSample> batch;
  MlpModel best = model;
  double best_val = validation_loss(model);
  if (val_history) val_history->push_back(best_val);

  for (long epoch = 0; epoch < config.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(train_idx);
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[train_idx[i]]);
      const double loss = batch_gradient(model, batch, config, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::Diverged,
                    "training loss became non-finite at epoch " + std::to_string(epoch));
      }
      adam_step(model.params(), grad, adam, config.learning_rate);
      detail::check_finite_params(model.params());
    }
    const double val_loss = validation_loss(model);
    if (!std::isfinite(val_loss)) {
      throw Error(ErrorCode::Diverged,
                  "validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (val_history) val_history->push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
    }
  }
  return best;
}

struct EvalMetrics {
  double auc = 0.0;
  double mse = 0.0;
  double mae = 0.0;
};

/// Mann-Whitney AUC of `scores` against binary `labels`, with average ranks
/// on tied scores.
inline double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::DimMismatch, "scores and labels differ in length");
  }
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0 ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorCode::SingleClass, "AUC needs both classes, got " + std::to_string(n_pos) +
                                            " positives out of " + std::to_string(labels.size()));
  }

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] != 0) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// AUC of P_c against y (rank statistic with average ranks on ties) plus
/// MSE/MAE between mu and the observed log-shifted revenue over the whole
/// test set.
inline EvalMetrics evaluate(const MlpModel& model, const std::vector<LabeledSample>& test) {
  if (test.empty()) throw Error(ErrorCode::EmptyBatch, "evaluation set is empty");

  std::vector<double> scores(test.size());
  std::vector<int> labels(test.size());
  EvalMetrics out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const PredictionTriple t = model.forward(test[i].customer_features, test[i].fund_features);
    scores[i] = t.p_c;
    labels[i] = test[i].y;
    const double err = t.mu - std::log1p(test[i].revenue);
    out.mse += err * err;
    out.mae += std::abs(err);
  }
  out.mse /= static_cast<double>(test.size());
  out.mae /= static_cast<double>(test.size());
  out.auc = rank_auc(scores, labels);
  return out;
}

/// Expected revenue for every (customer, fund) pair, with the risk mask
/// applied so ineligible cells never enter downstream sums.
inline RevenueMatrix predict_matrix(const MlpModel& model, const std::vector<Customer>& customers,
                                    const std::vector<Fund>& funds) {
  RevenueMatrix out(customers.size(), funds.size());
  for (std::size_t u = 0; u < customers.size(); ++u) {
    for (std::size_t f = 0; f < funds.size(); ++f) {
      const PredictionTriple t = model.forward(customers[u].features, funds[f].features);
      out.set(u, f, expected_revenue(t));
    }
  }
  return apply_risk_mask(out, customers, funds);
}

}  // namespace fundalloc
