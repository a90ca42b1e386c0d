#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fundalloc/errors.hpp"
#include "fundalloc/loss.hpp"
#include "fundalloc/rng.hpp"

namespace fundalloc {

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double stable_softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

/// Three-head MLP over concatenated (customer, fund) features. A shared
/// trunk of two softplus layers feeds three linear heads; the first is read
/// through a logistic link as P_c, the second directly as mu, the third
/// through softplus plus a positive floor as sigma.
class MlpModel {
 public:
  MlpModel() = default;

  MlpModel(std::size_t customer_dim, std::size_t fund_dim, std::size_t hidden1 = 64,
           std::size_t hidden2 = 32, double sigma_floor = 1e-3)
      : customer_dim_(customer_dim),
        fund_dim_(fund_dim),
        hidden1_(hidden1),
        hidden2_(hidden2),
        sigma_floor_(sigma_floor) {
    if (in_dim() == 0) throw Error(ErrorCode::InvalidConfig, "model input dimension is zero");
    if (hidden1_ == 0 || hidden2_ == 0) {
      throw Error(ErrorCode::InvalidConfig, "hidden layer sizes must be >= 1");
    }
    if (!(sigma_floor_ > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "sigma_floor must be > 0");
    }
    params_.assign(param_count(), 0.0);
  }

  std::size_t customer_dim() const { return customer_dim_; }
  std::size_t fund_dim() const { return fund_dim_; }
  std::size_t in_dim() const { return customer_dim_ + fund_dim_; }
  std::size_t hidden1() const { return hidden1_; }
  std::size_t hidden2() const { return hidden2_; }
  double sigma_floor() const { return sigma_floor_; }

  double train_epsilon() const { return train_epsilon_; }
  void set_train_epsilon(double epsilon) { train_epsilon_ = epsilon; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::size_t param_count() const {
    return hidden1_ * in_dim() + hidden1_ + hidden2_ * hidden1_ + hidden2_ + 3 * hidden2_ + 3;
  }

  /// Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  void init(Rng& rng) {
    std::size_t at = 0;
    auto layer = [&](std::size_t rows, std::size_t cols) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      for (std::size_t i = 0; i < rows * cols; ++i) params_[at++] = rng.uniform(-bound, bound);
      for (std::size_t i = 0; i < rows; ++i) params_[at++] = 0.0;
    };
    layer(hidden1_, in_dim());
    layer(hidden2_, hidden1_);
    layer(3, hidden2_);
  }

  struct Cache {
    std::vector<double> x;   // concatenated input
    std::vector<double> z1;  // first-layer pre-activations
    std::vector<double> a1;
    std::vector<double> z2;
    std::vector<double> a2;
    double head[3] = {0.0, 0.0, 0.0};  // linear head outputs (pre-link)
  };

  PredictionTriple forward(const std::vector<double>& customer_features,
                           const std::vector<double>& fund_features) const {
    Cache cache;
    return forward_cached(customer_features, fund_features, cache);
  }

  PredictionTriple forward_cached(const std::vector<double>& customer_features,
                                  const std::vector<double>& fund_features, Cache& cache) const {
    if (customer_features.size() != customer_dim_ || fund_features.size() != fund_dim_) {
      throw Error(ErrorCode::DimMismatch,
                  "model expects " + std::to_string(customer_dim_) + "+" +
                      std::to_string(fund_dim_) + " features, got " +
                      std::to_string(customer_features.size()) + "+" +
                      std::to_string(fund_features.size()));
    }
    cache.x.resize(in_dim());
    std::copy(customer_features.begin(), customer_features.end(), cache.x.begin());
    std::copy(fund_features.begin(), fund_features.end(),
              cache.x.begin() + static_cast<std::ptrdiff_t>(customer_dim_));

    const double* w1 = params_.data();
    const double* b1 = w1 + hidden1_ * in_dim();
    const double* w2 = b1 + hidden1_;
    const double* b2 = w2 + hidden2_ * hidden1_;
    const double* w3 = b2 + hidden2_;
    const double* b3 = w3 + 3 * hidden2_;

    cache.z1.resize(hidden1_);
    cache.a1.resize(hidden1_);
    for (std::size_t i = 0; i < hidden1_; ++i) {
      double z = b1[i];
      const double* row = w1 + i * in_dim();
      for (std::size_t j = 0; j < in_dim(); ++j) z += row[j] * cache.x[j];
      cache.z1[i] = z;
      cache.a1[i] = stable_softplus(z);
    }
    cache.z2.resize(hidden2_);
    cache.a2.resize(hidden2_);
    for (std::size_t i = 0; i < hidden2_; ++i) {
      double z = b2[i];
      const double* row = w2 + i * hidden1_;
      for (std::size_t j = 0; j < hidden1_; ++j) z += row[j] * cache.a1[j];
      cache.z2[i] = z;
      cache.a2[i] = stable_softplus(z);
    }
    for (std::size_t h = 0; h < 3; ++h) {
      double z = b3[h];
      const double* row = w3 + h * hidden2_;
      for (std::size_t j = 0; j < hidden2_; ++j) z += row[j] * cache.a2[j];
      cache.head[h] = z;
    }

    PredictionTriple t;
    t.p_c = stable_sigmoid(cache.head[0]);
    t.mu = cache.head[1];
    t.sigma = stable_softplus(cache.head[2]) + sigma_floor_;
    return t;
  }

  /// Accumulates d(loss)/d(params) into `grad` (same layout as params) given
  /// the head-space gradient of one sample: d_logit_p is already with respect
  /// to the first head's pre-link output; mu's head is the identity; sigma's
  /// softplus link contributes a sigmoid factor.
  void backward(const Cache& cache, const SampleGrad& g, std::vector<double>& grad) const {
    const double* w2 = params_.data() + hidden1_ * in_dim() + hidden1_;
    const double* w3 = w2 + hidden2_ * hidden1_ + hidden2_;

    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + hidden1_ * in_dim();
    double* g_w2 = g_b1 + hidden1_;
    double* g_b2 = g_w2 + hidden2_ * hidden1_;
    double* g_w3 = g_b2 + hidden2_;
    double* g_b3 = g_w3 + 3 * hidden2_;

    const double gh[3] = {g.d_logit_p, g.d_mu, g.d_sigma * stable_sigmoid(cache.head[2])};

    std::vector<double> da2(hidden2_, 0.0);
    for (std::size_t h = 0; h < 3; ++h) {
      if (gh[h] == 0.0) continue;
      double* row = g_w3 + h * hidden2_;
      const double* w_row = w3 + h * hidden2_;
      for (std::size_t j = 0; j < hidden2_; ++j) {
        row[j] += gh[h] * cache.a2[j];
        da2[j] += gh[h] * w_row[j];
      }
      g_b3[h] += gh[h];
    }

    std::vector<double> da1(hidden1_, 0.0);
    for (std::size_t i = 0; i < hidden2_; ++i) {
      const double dz = da2[i] * stable_sigmoid(cache.z2[i]);
      if (dz == 0.0) continue;
      double* row = g_w2 + i * hidden1_;
      const double* w_row = w2 + i * hidden1_;
      for (std::size_t j = 0; j < hidden1_; ++j) {
        row[j] += dz * cache.a1[j];
        da1[j] += dz * w_row[j];
      }
      g_b2[i] += dz;
    }

    for (std::size_t i = 0; i < hidden1_; ++i) {
      const double dz = da1[i] * stable_sigmoid(cache.z1[i]);
      if (dz == 0.0) continue;
      double* row = g_w1 + i * in_dim();
      for (std::size_t j = 0; j < in_dim(); ++j) row[j] += dz * cache.x[j];
      g_b1[i] += dz;
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["customer_dim"] = customer_dim_;
    j["fund_dim"] = fund_dim_;
    j["hidden"] = {hidden1_, hidden2_};
    j["links"] = {{"p_c", "logistic"}, {"mu", "identity"}, {"sigma", "softplus_floor"}};
    j["sigma_floor"] = sigma_floor_;
    j["epsilon"] = train_epsilon_;
    j["params"] = params_;
    return j;
  }

  static MlpModel from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"].get<int>() != 1) {
      throw Error(ErrorCode::SchemaError, "unsupported model version");
    }
    MlpModel m(j.at("customer_dim").get<std::size_t>(), j.at("fund_dim").get<std::size_t>(),
               j.at("hidden").at(0).get<std::size_t>(), j.at("hidden").at(1).get<std::size_t>(),
               j.at("sigma_floor").get<double>());
    m.train_epsilon_ = j.value("epsilon", 0.0);
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.param_count()) {
      throw Error(ErrorCode::SchemaError,
                  "model has " + std::to_string(params.size()) + " parameters, expected " +
                      std::to_string(m.param_count()));
    }
    m.params_ = std::move(params);
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
  }

  static MlpModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("invalid model file: ") + e.what());
    }
    try {
      return from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError, std::string("model file: ") + e.what());
    }
  }

 private:
  std::size_t customer_dim_ = 0;
  std::size_t fund_dim_ = 0;
  std::size_t hidden1_ = 64;
  std::size_t hidden2_ = 32;
  double sigma_floor_ = 1e-3;
  double train_epsilon_ = 0.0;
  std::vector<double> params_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace fundalloc
