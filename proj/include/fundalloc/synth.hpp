#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fundalloc/domain.hpp"
#include "fundalloc/errors.hpp"
#include "fundalloc/rng.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {

/// How fund demands are chosen. Both schemes sum to K * |customers|.
///   Proportional: random shares, then repaired so the necessary feasibility
///     checks always pass (and, for K=1, so a feasible assignment exists).
///   Witness: demands are the fill counts of a hidden random assignment, so a
///     feasible assignment exists by construction for any K.
enum class DemandScheme { Proportional, Witness };

/// Fixed values overriding the random draws; used for golden instances.
struct PinnedInstance {
  std::vector<double> revenue;  // row-major n x m
  std::vector<long> demands;
  std::vector<int> tolerances;
  std::vector<int> risk_levels;
};

struct TruthTriple {
  double p = 0.0;
  double mu = 0.0;
  double sigma = 1.0;
};

/// Per-pair ground truth of a generated instance.
struct GroundTruth {
  std::size_t n_customers = 0;
  std::size_t n_funds = 0;
  std::vector<double> p;      // row-major n x m
  std::vector<double> mu;
  std::vector<double> sigma;
  RevenueMatrix expected;     // p * exp(mu + sigma^2/2)

  TruthTriple at(std::size_t u, std::size_t f) const {
    const std::size_t i = u * n_funds + f;
    return {p[i], mu[i], sigma[i]};
  }
};

/// Everything the generators need; a seed fully determines all outputs.
/// Ground-truth heads are linear in the concatenated feature vector
/// [customer_features, fund_features].
struct GeneratorConfig {
  std::size_t n_customers = 0;
  std::size_t n_funds = 0;
  int k = 1;
  std::size_t customer_dim = 8;
  std::size_t fund_dim = 4;
  int risk_levels = 3;
  DemandScheme scheme = DemandScheme::Proportional;
  double feature_scale = 1.0;

  std::vector<double> w_logit_p;
  double b_logit_p = -1.6;
  // Log-revenue bulk sits well above zero, matching transaction-value data
  // where purchase amounts are orders of magnitude above the currency unit;
  // the zero-revenue clip in generate_training_data is then a rare event.
  std::vector<double> w_mu;
  double b_mu = 2.5;
  std::vector<double> w_log_sigma;
  double b_log_sigma = -0.2;

  /// Probability that an intending customer has already converted when
  /// observed; 1 - q of them form the not-yet-purchased subspace (y=0, R=0
  /// despite intent).
  double q = 0.9;

  std::uint64_t seed = 1;
  std::optional<PinnedInstance> pinned;

  /// Config with ground-truth weights drawn from the seed, scaled so that
  /// logit p*, mu*, log sigma* have spreads ~0.5/0.6/0.3 around their biases.
  static GeneratorConfig defaults(std::size_t n, std::size_t m, int k, std::uint64_t seed,
                                  std::size_t customer_dim = 8, std::size_t fund_dim = 4) {
    GeneratorConfig config;
    config.n_customers = n;
    config.n_funds = m;
    config.k = k;
    config.seed = seed;
    config.customer_dim = customer_dim;
    config.fund_dim = fund_dim;
    const std::size_t d = config.customer_dim + config.fund_dim;
    Rng rng(derive_seed(seed, 100));
    const double root_d = std::sqrt(static_cast<double>(d));
    config.w_logit_p.resize(d);
    config.w_mu.resize(d);
    config.w_log_sigma.resize(d);
    for (std::size_t i = 0; i < d; ++i) config.w_logit_p[i] = rng.normal(0.0, 0.5 / root_d);
    for (std::size_t i = 0; i < d; ++i) config.w_mu[i] = rng.normal(0.0, 0.6 / root_d);
    for (std::size_t i = 0; i < d; ++i) config.w_log_sigma[i] = rng.normal(0.0, 0.3 / root_d);
    return config;
  }

  void validate() const {
    if (n_customers < 1 || n_funds < 1) {
      throw Error(ErrorCode::InvalidConfig, "need at least one customer and one fund");
    }
    if (k < 1 || static_cast<std::size_t>(k) > n_funds) {
      throw Error(ErrorCode::InvalidConfig, "top-K must satisfy 1 <= K <= n_funds");
    }
    if (customer_dim < 1 || fund_dim < 1) {
      throw Error(ErrorCode::InvalidConfig, "feature dimensions must be positive");
    }
    if (risk_levels < 1) {
      throw Error(ErrorCode::InvalidConfig, "risk_levels must be >= 1");
    }
    if (q < 0.0 || q > 1.0) {
      throw Error(ErrorCode::InvalidConfig, "q must lie in [0, 1]");
    }
    const std::size_t d = customer_dim + fund_dim;
    if (w_logit_p.size() != d || w_mu.size() != d || w_log_sigma.size() != d) {
      throw Error(ErrorCode::InvalidConfig,
                  "ground-truth weight vectors must have length customer_dim + fund_dim");
    }
    if (pinned) {
      if (pinned->revenue.size() != n_customers * n_funds ||
          pinned->demands.size() != n_funds || pinned->tolerances.size() != n_customers ||
          pinned->risk_levels.size() != n_funds) {
        throw Error(ErrorCode::InvalidConfig, "pinned instance sizes do not match config");
      }
    }
  }
};

inline TruthTriple ground_truth_triple(const GeneratorConfig& config,
                                       const std::vector<double>& x_u,
                                       const std::vector<double>& x_f) {
  double zp = config.b_logit_p;
  double zm = config.b_mu;
  double zs = config.b_log_sigma;
  for (std::size_t i = 0; i < x_u.size(); ++i) {
    zp += config.w_logit_p[i] * x_u[i];
    zm += config.w_mu[i] * x_u[i];
    zs += config.w_log_sigma[i] * x_u[i];
  }
  for (std::size_t j = 0; j < x_f.size(); ++j) {
    const std::size_t i = x_u.size() + j;
    zp += config.w_logit_p[i] * x_f[j];
    zm += config.w_mu[i] * x_f[j];
    zs += config.w_log_sigma[i] * x_f[j];
  }
  TruthTriple t;
  t.p = 1.0 / (1.0 + std::exp(-zp));
  t.mu = zm;
  t.sigma = std::exp(zs);
  return t;
}

namespace detail {

// Features, tolerances and risk levels shared by generate_instance and
// generate_training_data (identical draws for identical configs). Tolerances
// are clamped to the K-th smallest fund risk so every customer keeps at least
// K eligible funds.
struct SyntheticBase {
  std::vector<Customer> customers;
  std::vector<Fund> funds;
};

inline SyntheticBase synthetic_base(const GeneratorConfig& config) {
  SyntheticBase base;
  const std::size_t n = config.n_customers;
  const std::size_t m = config.n_funds;

  Rng feature_rng(derive_seed(config.seed, 1));
  base.customers.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    base.customers[u].id = static_cast<int>(u + 1);
    base.customers[u].features.resize(config.customer_dim);
    for (double& x : base.customers[u].features) {
      x = config.feature_scale * feature_rng.normal();
    }
  }
  base.funds.resize(m);
  for (std::size_t f = 0; f < m; ++f) {
    base.funds[f].id = static_cast<int>(f + 1);
    base.funds[f].features.resize(config.fund_dim);
    for (double& x : base.funds[f].features) {
      x = config.feature_scale * feature_rng.normal();
    }
  }

  Rng risk_rng(derive_seed(config.seed, 2));
  if (config.pinned) {
    for (std::size_t f = 0; f < m; ++f) base.funds[f].risk_level = config.pinned->risk_levels[f];
    for (std::size_t u = 0; u < n; ++u) {
      base.customers[u].risk_tolerance = config.pinned->tolerances[u];
    }
    return base;
  }
  for (std::size_t f = 0; f < m; ++f) {
    base.funds[f].risk_level = static_cast<int>(risk_rng.uniform_int(1, config.risk_levels));
  }
  std::vector<int> sorted_risks(m);
  for (std::size_t f = 0; f < m; ++f) sorted_risks[f] = base.funds[f].risk_level;
  std::sort(sorted_risks.begin(), sorted_risks.end());
  const int kth_risk = sorted_risks[static_cast<std::size_t>(config.k) - 1];
  for (std::size_t u = 0; u < n; ++u) {
    const int drawn = static_cast<int>(risk_rng.uniform_int(1, config.risk_levels));
    base.customers[u].risk_tolerance = std::max(drawn, kth_risk);
  }
  return base;
}

// Largest-remainder apportionment of `total` into weights-proportional
// nonnegative integers.
inline std::vector<long> apportion(const std::vector<double>& weights, long total) {
  const std::size_t m = weights.size();
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  std::vector<long> out(m, 0);
  std::vector<std::pair<double, std::size_t>> remainders(m);
  long assigned = 0;
  for (std::size_t f = 0; f < m; ++f) {
    const double share = static_cast<double>(total) * weights[f] / weight_sum;
    out[f] = static_cast<long>(share);
    assigned += out[f];
    remainders[f] = {share - static_cast<double>(out[f]), f};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (long i = 0; i < total - assigned; ++i) out[remainders[static_cast<std::size_t>(i)].second]++;
  return out;
}

// Moves demand toward low-risk funds until (1) no fund demands more than its
// eligible-customer count and (2) for every risk level l, funds at level <= l
// can absorb all impressions owed by customers with tolerance <= l. For K=1
// the result is feasible outright, not just necessary-check clean.
inline void repair_demands(std::vector<long>& demands, const std::vector<Fund>& funds,
                           const std::vector<Customer>& customers, int k, int levels) {
  const std::size_t m = funds.size();
  std::vector<long> eligible_count(m, 0);
  for (std::size_t f = 0; f < m; ++f) {
    for (const Customer& c : customers) {
      if (c.risk_tolerance >= funds[f].risk_level) ++eligible_count[f];
    }
  }
  std::vector<std::size_t> by_risk_asc(m);
  for (std::size_t f = 0; f < m; ++f) by_risk_asc[f] = f;
  std::sort(by_risk_asc.begin(), by_risk_asc.end(), [&](std::size_t a, std::size_t b) {
    if (funds[a].risk_level != funds[b].risk_level) {
      return funds[a].risk_level < funds[b].risk_level;
    }
    return a < b;
  });

  auto give_to_receivers = [&](long amount, int max_level) {
    for (std::size_t f : by_risk_asc) {
      if (amount == 0) break;
      if (funds[f].risk_level > max_level) break;
      const long slack = eligible_count[f] - demands[f];
      const long moved = std::min(amount, slack);
      if (moved > 0) {
        demands[f] += moved;
        amount -= moved;
      }
    }
    if (amount > 0) {
      throw Error(ErrorCode::InvalidConfig, "demand repair failed: no eligible capacity left");
    }
  };

  for (auto it = by_risk_asc.rbegin(); it != by_risk_asc.rend(); ++it) {
    const std::size_t f = *it;
    if (demands[f] > eligible_count[f]) {
      const long overflow = demands[f] - eligible_count[f];
      demands[f] = eligible_count[f];
      give_to_receivers(overflow, levels);
    }
  }

  for (int level = 1; level < levels; ++level) {
    long have = 0;
    long owed = 0;
    for (std::size_t f = 0; f < m; ++f) {
      if (funds[f].risk_level <= level) have += demands[f];
    }
    for (const Customer& c : customers) {
      if (c.risk_tolerance <= level) owed += k;
    }
    long deficit = owed - have;
    if (deficit <= 0) continue;
    for (auto it = by_risk_asc.rbegin(); it != by_risk_asc.rend() && deficit > 0; ++it) {
      const std::size_t f = *it;
      if (funds[f].risk_level <= level) break;
      const long taken = std::min(deficit, demands[f]);
      if (taken > 0) {
        demands[f] -= taken;
        give_to_receivers(taken, level);
        deficit -= taken;
      }
    }
    if (deficit > 0) {
      throw Error(ErrorCode::InvalidConfig, "demand repair failed: risk levels too tight");
    }
  }
}

}  // namespace detail

/// Generates a random allocation instance plus its ground truth. The revenue
/// matrix holds the true expected revenue E* = p* exp(mu* + sigma*^2/2);
/// pipeline runs overwrite it with model predictions instead.
inline std::pair<AllocationInstance, GroundTruth> generate_instance(
    const GeneratorConfig& config) {
  config.validate();
  const std::size_t n = config.n_customers;
  const std::size_t m = config.n_funds;

  detail::SyntheticBase base = detail::synthetic_base(config);

  GroundTruth truth;
  truth.n_customers = n;
  truth.n_funds = m;
  truth.p.resize(n * m);
  truth.mu.resize(n * m);
  truth.sigma.resize(n * m);
  truth.expected = RevenueMatrix(n, m);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t f = 0; f < m; ++f) {
      const TruthTriple t =
          ground_truth_triple(config, base.customers[u].features, base.funds[f].features);
      const std::size_t i = u * m + f;
      truth.p[i] = t.p;
      truth.mu[i] = t.mu;
      truth.sigma[i] = t.sigma;
      truth.expected.set(u, f, t.p * std::exp(t.mu + 0.5 * t.sigma * t.sigma));
    }
  }

  AllocationInstance instance;
  instance.customers = std::move(base.customers);
  instance.funds = std::move(base.funds);
  instance.k = config.k;
  instance.revenue = truth.expected;
  if (config.pinned) {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t f = 0; f < m; ++f) {
        instance.revenue.set(u, f, config.pinned->revenue[u * m + f]);
      }
    }
    for (std::size_t f = 0; f < m; ++f) instance.funds[f].demand = config.pinned->demands[f];
    return {std::move(instance), std::move(truth)};
  }

  Rng demand_rng(derive_seed(config.seed, 3));
  std::vector<long> demands(m, 0);
  if (config.scheme == DemandScheme::Witness) {
    std::vector<std::size_t> options;
    for (std::size_t u = 0; u < n; ++u) {
      options.clear();
      for (std::size_t f = 0; f < m; ++f) {
        if (instance.customers[u].risk_tolerance >= instance.funds[f].risk_level) {
          options.push_back(f);
        }
      }
      // Partial Fisher-Yates: the first K entries become this customer's
      // hidden assignment.
      for (int j = 0; j < config.k; ++j) {
        const std::size_t swap_at = static_cast<std::size_t>(
            demand_rng.uniform_int(static_cast<long>(j), static_cast<long>(options.size()) - 1));
        std::swap(options[static_cast<std::size_t>(j)], options[swap_at]);
        ++demands[options[static_cast<std::size_t>(j)]];
      }
    }
  } else {
    std::vector<double> weights(m);
    for (double& w : weights) w = demand_rng.uniform(0.5, 1.5);
    demands = detail::apportion(weights, static_cast<long>(n) * config.k);
    detail::repair_demands(demands, instance.funds, instance.customers, config.k,
                           config.risk_levels);
  }
  for (std::size_t f = 0; f < m; ++f) instance.funds[f].demand = demands[f];
  return {std::move(instance), std::move(truth)};
}

/// Draws one labeled interaction per (customer, fund) pair of the configured
/// instance, in row-major pair order. Latent intent C ~ Bernoulli(p*); an
/// intending customer is observed converted with probability q; conversions
/// draw R = exp(N(mu*, sigma*^2)) - 1, clipped at zero. A conversion whose
/// clipped revenue is zero is indistinguishable from a non-conversion and is
/// relabeled y = 0 to keep the y = 1 <=> R > 0 invariant.
inline std::vector<LabeledSample> generate_training_data(const GeneratorConfig& config) {
  config.validate();
  detail::SyntheticBase base = detail::synthetic_base(config);
  Rng outcome_rng(derive_seed(config.seed, 4));

  std::vector<LabeledSample> samples;
  samples.reserve(config.n_customers * config.n_funds);
  for (std::size_t u = 0; u < config.n_customers; ++u) {
    for (std::size_t f = 0; f < config.n_funds; ++f) {
      const TruthTriple t =
          ground_truth_triple(config, base.customers[u].features, base.funds[f].features);
      LabeledSample sample;
      sample.customer_features = base.customers[u].features;
      sample.fund_features = base.funds[f].features;
      const bool intends = outcome_rng.uniform() < t.p;
      const bool observed = intends && outcome_rng.uniform() < config.q;
      if (observed) {
        const double v = outcome_rng.normal(t.mu, t.sigma);
        sample.revenue = std::max(0.0, std::exp(v) - 1.0);
        sample.y = sample.revenue > 0.0 ? 1 : 0;
      }
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

/// The two-fund workflow example: three customers, demands (2, 1), K = 1.
inline GeneratorConfig golden_config() {
  GeneratorConfig config = GeneratorConfig::defaults(3, 2, 1, 7);
  config.risk_levels = 1;
  PinnedInstance pinned;
  pinned.revenue = {510.0, 450.0, 900.0, 600.0, 500.0, 300.0};
  pinned.demands = {2, 1};
  pinned.tolerances = {1, 1, 1};
  pinned.risk_levels = {1, 1};
  config.pinned = std::move(pinned);
  return config;
}

}  // namespace fundalloc
