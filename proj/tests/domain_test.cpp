#include <gtest/gtest.h>

#include "fundalloc/domain.hpp"
#include "fundalloc/synth.hpp"

namespace fundalloc {
namespace {

AllocationInstance make_instance(std::size_t n, std::size_t m, int k,
                                 std::vector<long> demands, std::vector<int> tolerances,
                                 std::vector<int> risks, std::vector<double> revenue) {
  AllocationInstance inst;
  inst.k = k;
  inst.customers.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    inst.customers[u].id = static_cast<int>(u + 1);
    inst.customers[u].risk_tolerance = tolerances[u];
  }
  inst.funds.resize(m);
  for (std::size_t f = 0; f < m; ++f) {
    inst.funds[f].id = static_cast<int>(f + 1);
    inst.funds[f].risk_level = risks[f];
    inst.funds[f].demand = demands[f];
  }
  inst.revenue = RevenueMatrix(n, m);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t f = 0; f < m; ++f) inst.revenue.set(u, f, revenue[u * m + f]);
  }
  return inst;
}

AllocationInstance golden() {
  return generate_instance(golden_config()).first;
}

bool has_violation(const ValidationReport& report, const std::string& code) {
  for (const Violation& v : report.violations) {
    if (v.code == code) return true;
  }
  return false;
}

TEST(ValidateInstance, GoldenIsClean) {
  const ValidationReport report = validate_instance(golden());
  EXPECT_TRUE(report.feasible_necessary);
  EXPECT_TRUE(report.violations.empty());
  EXPECT_EQ(report.supply_total, 3);
  EXPECT_EQ(report.demand_total, 3);
}

TEST(ValidateInstance, SupplyMismatch) {
  auto inst = make_instance(3, 2, 1, {2, 2}, {1, 1, 1}, {1, 1},
                            {510, 450, 900, 600, 500, 300});
  const ValidationReport report = validate_instance(inst);
  EXPECT_FALSE(report.feasible_necessary);
  EXPECT_TRUE(has_violation(report, "SUPPLY_MISMATCH"));
  EXPECT_EQ(report.supply_total, 4);
  EXPECT_EQ(report.demand_total, 3);
}

TEST(ValidateInstance, RiskStarvedFund) {
  // Fund 1 wants two customers but only one can tolerate its risk level.
  auto inst = make_instance(3, 2, 1, {2, 1}, {3, 1, 1}, {2, 1},
                            {510, 450, 900, 600, 500, 300});
  const ValidationReport report = validate_instance(inst);
  EXPECT_FALSE(report.feasible_necessary);
  EXPECT_TRUE(has_violation(report, "RISK_STARVED"));
}

TEST(ValidateInstance, CustomerStarved) {
  auto inst = make_instance(2, 2, 1, {1, 1}, {1, 3}, {2, 2},
                            {510, 450, 900, 600});
  const ValidationReport report = validate_instance(inst);
  EXPECT_FALSE(report.feasible_necessary);
  EXPECT_TRUE(has_violation(report, "CUSTOMER_STARVED"));
}

TEST(ValidateInstance, ReportsEveryViolation) {
  auto inst = make_instance(2, 2, 1, {2, 2}, {1, 1}, {2, 2}, {1, 1, 1, 1});
  const ValidationReport report = validate_instance(inst);
  EXPECT_TRUE(has_violation(report, "SUPPLY_MISMATCH"));
  EXPECT_TRUE(has_violation(report, "RISK_STARVED"));
  EXPECT_TRUE(has_violation(report, "CUSTOMER_STARVED"));
}

TEST(ApplyRiskMask, IntersectsWithTolerance) {
  auto inst = make_instance(2, 2, 1, {1, 1}, {2, 1}, {1, 2}, {1, 2, 3, 4});
  const RevenueMatrix masked = apply_risk_mask(inst.revenue, inst.customers, inst.funds);
  EXPECT_TRUE(masked.eligible(0, 0));
  EXPECT_TRUE(masked.eligible(0, 1));   // tolerance 2 covers risk 2
  EXPECT_TRUE(masked.eligible(1, 0));
  EXPECT_FALSE(masked.eligible(1, 1));  // tolerance 1 cannot take risk 2
  EXPECT_EQ(masked.value(0, 1), 2.0);
}

TEST(ApplyRiskMask, NeverResurrectsIneligibleCells) {
  auto inst = make_instance(1, 2, 1, {1, 0}, {3, 3}, {1, 1}, {5, 6});
  inst.revenue.set_eligible(0, 1, false);
  const RevenueMatrix masked = apply_risk_mask(inst.revenue, inst.customers, inst.funds);
  EXPECT_TRUE(masked.eligible(0, 0));
  EXPECT_FALSE(masked.eligible(0, 1));
}

TEST(ApplyRiskMask, Idempotent) {
  auto inst = make_instance(3, 2, 1, {2, 1}, {1, 2, 1}, {1, 2},
                            {510, 450, 900, 600, 500, 300});
  const RevenueMatrix once = apply_risk_mask(inst.revenue, inst.customers, inst.funds);
  const RevenueMatrix twice = apply_risk_mask(once, inst.customers, inst.funds);
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t f = 0; f < 2; ++f) {
      EXPECT_EQ(once.eligible(u, f), twice.eligible(u, f));
      EXPECT_EQ(once.value(u, f), twice.value(u, f));
    }
  }
}

TEST(ObjectiveValue, SumsAssignedCells) {
  auto inst = golden();
  Assignment x(3, 2);
  x.set(0, 1, true);
  x.set(1, 0, true);
  x.set(2, 0, true);
  EXPECT_DOUBLE_EQ(objective_value(x, inst.revenue), 1850.0);
}

TEST(ObjectiveValue, RejectsIneligibleAssignment) {
  auto inst = make_instance(1, 2, 1, {1, 0}, {1, 1}, {1, 2}, {5, 6});
  const RevenueMatrix masked = apply_risk_mask(inst.revenue, inst.customers, inst.funds);
  Assignment x(1, 2);
  x.set(0, 1, true);
  EXPECT_THROW(
      {
        try {
          objective_value(x, masked);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::AssignedIneligible);
          throw;
        }
      },
      Error);
}

TEST(IsFeasible, AcceptsExactAssignment) {
  auto inst = golden();
  Assignment x(3, 2);
  x.set(0, 1, true);
  x.set(1, 0, true);
  x.set(2, 0, true);
  EXPECT_TRUE(is_feasible(x, inst));
}

TEST(IsFeasible, RejectsWrongRowSum) {
  auto inst = golden();
  Assignment x(3, 2);
  x.set(0, 0, true);
  x.set(0, 1, true);  // row sum 2, K = 1
  x.set(1, 0, true);
  EXPECT_FALSE(is_feasible(x, inst));
}

TEST(IsFeasible, RejectsWrongColumnSum) {
  auto inst = golden();
  Assignment x(3, 2);
  x.set(0, 1, true);
  x.set(1, 1, true);  // fund 2 has demand 1
  x.set(2, 0, true);
  EXPECT_FALSE(is_feasible(x, inst));
}

TEST(IsFeasible, RejectsRiskViolation) {
  auto inst = make_instance(2, 2, 1, {1, 1}, {1, 2}, {1, 2}, {1, 2, 3, 4});
  Assignment x(2, 2);
  x.set(0, 1, true);  // tolerance 1 vs risk 2
  x.set(1, 0, true);
  EXPECT_FALSE(is_feasible(x, inst));
}

TEST(FillCounts, CountsPerFund) {
  Assignment x(3, 2);
  x.set(0, 1, true);
  x.set(1, 0, true);
  x.set(2, 0, true);
  const std::vector<long> fills = fill_counts(x);
  ASSERT_EQ(fills.size(), 2u);
  EXPECT_EQ(fills[0], 2);
  EXPECT_EQ(fills[1], 1);
}

TEST(ExposureMetrics, PerThousand) {
  EXPECT_DOUBLE_EQ(cpme(269, 100000), 2.69);
  EXPECT_DOUBLE_EQ(rpme(500.0, 1000), 500.0);
  EXPECT_THROW(cpme(1, 0), Error);
  EXPECT_THROW(rpme(1.0, -5), Error);
}

TEST(InstanceShape, RejectsMismatchedMatrix) {
  auto inst = golden();
  inst.revenue = RevenueMatrix(2, 2);
  EXPECT_THROW(
      {
        try {
          check_instance_shape(inst);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
          throw;
        }
      },
      Error);
}

TEST(InstanceShape, RejectsBadK) {
  auto inst = golden();
  inst.k = 3;
  EXPECT_THROW(check_instance_shape(inst), Error);
  inst.k = 0;
  EXPECT_THROW(check_instance_shape(inst), Error);
}

}  // namespace
}  // namespace fundalloc
