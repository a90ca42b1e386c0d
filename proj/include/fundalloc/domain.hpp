#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fundalloc/errors.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {

/// Checks the necessary feasibility conditions of an instance:
///   (a) total fund demand equals K * |customers|,
///   (b) each fund has at least `demand` risk-eligible customers,
///   (c) each customer has at least K risk-eligible funds.
/// The report lists every violated condition; an empty list does not prove
/// that a feasible assignment exists.
inline ValidationReport validate_instance(const AllocationInstance& instance) {
  check_instance_shape(instance);
  const std::size_t n = instance.customers.size();
  const std::size_t m = instance.funds.size();

  ValidationReport report;
  for (const Fund& fund : instance.funds) report.supply_total += fund.demand;
  report.demand_total = static_cast<long>(instance.k) * static_cast<long>(n);

  if (report.supply_total != report.demand_total) {
    report.violations.push_back(
        {"SUPPLY_MISMATCH", "sum of fund demands (" + std::to_string(report.supply_total) +
                                ") != K*|U| (" + std::to_string(report.demand_total) + ")"});
  }
  for (std::size_t f = 0; f < m; ++f) {
    long eligible = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (instance.customers[u].risk_tolerance >= instance.funds[f].risk_level) ++eligible;
    }
    if (instance.funds[f].demand > eligible) {
      report.violations.push_back(
          {"RISK_STARVED", "fund " + std::to_string(instance.funds[f].id) + " demands " +
                               std::to_string(instance.funds[f].demand) + " customers but only " +
                               std::to_string(eligible) + " tolerate its risk level"});
    }
  }
  for (std::size_t u = 0; u < n; ++u) {
    long eligible = 0;
    for (std::size_t f = 0; f < m; ++f) {
      if (instance.customers[u].risk_tolerance >= instance.funds[f].risk_level) ++eligible;
    }
    if (eligible < instance.k) {
      report.violations.push_back(
          {"CUSTOMER_STARVED", "customer " + std::to_string(instance.customers[u].id) +
                                   " tolerates only " + std::to_string(eligible) +
                                   " funds but K=" + std::to_string(instance.k)});
    }
  }
  report.feasible_necessary = report.violations.empty();
  return report;
}

/// Intersects the eligibility mask with the risk constraint: a cell stays
/// eligible only if the customer's tolerance covers the fund's risk level.
/// Cells already ineligible (e.g. absent from an input file) stay ineligible.
/// Idempotent.
inline RevenueMatrix apply_risk_mask(const RevenueMatrix& revenue,
                                     const std::vector<Customer>& customers,
                                     const std::vector<Fund>& funds) {
  if (revenue.n_customers() != customers.size() || revenue.n_funds() != funds.size()) {
    throw Error(ErrorCode::DimMismatch, "risk mask dimensions do not match revenue matrix");
  }
  RevenueMatrix masked = revenue;
  for (std::size_t u = 0; u < customers.size(); ++u) {
    for (std::size_t f = 0; f < funds.size(); ++f) {
      if (customers[u].risk_tolerance < funds[f].risk_level) masked.set_eligible(u, f, false);
    }
  }
  return masked;
}

/// Total expected revenue of an assignment, summed in row-major index order.
inline double objective_value(const Assignment& x, const RevenueMatrix& revenue) {
  if (x.n_customers() != revenue.n_customers() || x.n_funds() != revenue.n_funds()) {
    throw Error(ErrorCode::DimMismatch, "assignment dimensions do not match revenue matrix");
  }
  double total = 0.0;
  for (std::size_t u = 0; u < x.n_customers(); ++u) {
    for (std::size_t f = 0; f < x.n_funds(); ++f) {
      if (!x.at(u, f)) continue;
      if (!revenue.eligible(u, f)) {
        throw Error(ErrorCode::AssignedIneligible,
                    "assignment marks ineligible cell (" + std::to_string(u) + "," +
                        std::to_string(f) + ")");
      }
      total += revenue.value(u, f);
    }
  }
  return total;
}

/// True iff every customer row sums to K, every fund column sums to its
/// demand, and no ineligible cell is set.
inline bool is_feasible(const Assignment& x, const AllocationInstance& instance) {
  check_instance_shape(instance);
  if (x.n_customers() != instance.customers.size() || x.n_funds() != instance.funds.size()) {
    return false;
  }
  const RevenueMatrix masked =
      apply_risk_mask(instance.revenue, instance.customers, instance.funds);
  for (std::size_t u = 0; u < x.n_customers(); ++u) {
    for (std::size_t f = 0; f < x.n_funds(); ++f) {
      if (x.at(u, f) && !masked.eligible(u, f)) return false;
    }
    if (x.row_sum(u) != instance.k) return false;
  }
  for (std::size_t f = 0; f < x.n_funds(); ++f) {
    if (x.col_sum(f) != instance.funds[f].demand) return false;
  }
  return true;
}

inline std::vector<long> fill_counts(const Assignment& x) {
  std::vector<long> counts(x.n_funds(), 0);
  for (std::size_t f = 0; f < x.n_funds(); ++f) counts[f] = x.col_sum(f);
  return counts;
}

/// Conversions per thousand exposures.
inline double cpme(long conversions, long exposures) {
  if (exposures <= 0) throw Error(ErrorCode::ZeroExposures, "cpme requires exposures > 0");
  return static_cast<double>(conversions) / static_cast<double>(exposures) * 1000.0;
}

/// Revenue per thousand exposures.
inline double rpme(double revenue_sum, long exposures) {
  if (exposures <= 0) throw Error(ErrorCode::ZeroExposures, "rpme requires exposures > 0");
  return revenue_sum / static_cast<double>(exposures) * 1000.0;
}

}  // namespace fundalloc
