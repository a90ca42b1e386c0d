#pragma once

#include <cstdint>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fundalloc/errors.hpp"

namespace fundalloc {

/// A customer eligible to receive fund impressions. `risk_tolerance` is an
/// integer level in [1, L]; a fund may be shown to the customer only if its
/// risk level does not exceed this tolerance.
struct Customer {
  int id = 0;
  int risk_tolerance = 1;
  std::vector<double> features;
};

/// A fund with a guaranteed-delivery contract: it must be exposed to exactly
/// `demand` customers during the allocation period.
struct Fund {
  int id = 0;
  int risk_level = 1;
  long demand = 0;
  std::vector<double> features;
};

/// One observed customer-fund interaction: conversion flag y and realized
/// revenue R, with y = 1 exactly when R > 0. Regression targets use the
/// shifted log scale v = log(R + 1).
struct LabeledSample {
  std::vector<double> customer_features;
  std::vector<double> fund_features;
  int y = 0;
  double revenue = 0.0;
};

/// Dense |U|x|F| grid of expected-revenue coefficients with an eligibility
/// mask. Ineligible cells are excluded from every sum and argmax; they are
/// never represented by a sentinel value.
class RevenueMatrix {
 public:
  RevenueMatrix() = default;
  RevenueMatrix(std::size_t n_customers, std::size_t n_funds, double value = 0.0,
                bool eligible = true)
      : n_customers_(n_customers),
        n_funds_(n_funds),
        values_(n_customers * n_funds, value),
        eligible_(n_customers * n_funds, eligible ? 1 : 0) {}

  std::size_t n_customers() const { return n_customers_; }
  std::size_t n_funds() const { return n_funds_; }

  double value(std::size_t u, std::size_t f) const { return values_[u * n_funds_ + f]; }
  bool eligible(std::size_t u, std::size_t f) const { return eligible_[u * n_funds_ + f] != 0; }

  void set(std::size_t u, std::size_t f, double value, bool eligible = true) {
    values_[u * n_funds_ + f] = value;
    eligible_[u * n_funds_ + f] = eligible ? 1 : 0;
  }
  void set_eligible(std::size_t u, std::size_t f, bool eligible) {
    eligible_[u * n_funds_ + f] = eligible ? 1 : 0;
  }

  bool same_shape(const RevenueMatrix& other) const {
    return n_customers_ == other.n_customers_ && n_funds_ == other.n_funds_;
  }

 private:
  std::size_t n_customers_ = 0;
  std::size_t n_funds_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> eligible_;
};

/// Binary assignment grid X, row-major over (customer, fund).
class Assignment {
 public:
  Assignment() = default;
  Assignment(std::size_t n_customers, std::size_t n_funds)
      : n_customers_(n_customers), n_funds_(n_funds), bits_(n_customers * n_funds, 0) {}

  std::size_t n_customers() const { return n_customers_; }
  std::size_t n_funds() const { return n_funds_; }

  bool at(std::size_t u, std::size_t f) const { return bits_[u * n_funds_ + f] != 0; }
  void set(std::size_t u, std::size_t f, bool value) { bits_[u * n_funds_ + f] = value ? 1 : 0; }

  long row_sum(std::size_t u) const {
    long s = 0;
    for (std::size_t f = 0; f < n_funds_; ++f) s += bits_[u * n_funds_ + f];
    return s;
  }
  long col_sum(std::size_t f) const {
    long s = 0;
    for (std::size_t u = 0; u < n_customers_; ++u) s += bits_[u * n_funds_ + f];
    return s;
  }

  bool operator==(const Assignment& other) const {
    return n_customers_ == other.n_customers_ && n_funds_ == other.n_funds_ &&
           bits_ == other.bits_;
  }

 private:
  std::size_t n_customers_ = 0;
  std::size_t n_funds_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct AllocationInstance {
  std::vector<Customer> customers;
  std::vector<Fund> funds;
  RevenueMatrix revenue;
  int k = 1;
};

struct AllocationResult {
  Assignment assignment;
  double objective = 0.0;
  std::vector<long> fill_counts;
};

struct Violation {
  std::string code;
  std::string message;
};

/// Findings of the necessary-condition checks on an instance. A clean report
/// does not prove feasibility; only the exact flow solver certifies that.
struct ValidationReport {
  bool feasible_necessary = true;
  std::vector<Violation> violations;
  long supply_total = 0;  // sum of fund demands
  long demand_total = 0;  // K * |U|
};

/// Per-run solver diagnostics. `gap` is 1 - objective/oracle_objective when
/// an oracle value is available.
struct SolverStats {
  double wall_ms = 0.0;
  long rounds = 0;
  double objective = 0.0;
  std::optional<double> gap;
};

inline void check_instance_shape(const AllocationInstance& instance) {
  if (instance.revenue.n_customers() != instance.customers.size() ||
      instance.revenue.n_funds() != instance.funds.size()) {
    throw Error(ErrorCode::DimMismatch,
                "revenue matrix is " + std::to_string(instance.revenue.n_customers()) + "x" +
                    std::to_string(instance.revenue.n_funds()) + " but instance has " +
                    std::to_string(instance.customers.size()) + " customers and " +
                    std::to_string(instance.funds.size()) + " funds");
  }
  if (instance.k < 1 || static_cast<std::size_t>(instance.k) > instance.funds.size()) {
    throw Error(ErrorCode::InvalidConfig,
                "top-K must satisfy 1 <= K <= |funds| (got K=" + std::to_string(instance.k) +
                    ", |funds|=" + std::to_string(instance.funds.size()) + ")");
  }
}

}  // namespace fundalloc
