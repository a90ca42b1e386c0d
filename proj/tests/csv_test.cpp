#include "fundalloc/csv.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fundalloc/rng.hpp"
#include "fundalloc/synth.hpp"

namespace fundalloc {
namespace {

class TempDir {
 public:
  TempDir() : base_(std::string(::testing::TempDir())) {}
  std::string path(const std::string& name) const { return base_ + "/" + name; }

 private:
  std::string base_;
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

TEST(Csv, InstanceRoundTripIsIdentity) {
  const auto [instance, truth] =
      generate_instance(GeneratorConfig::defaults(12, 4, 2, 99));
  (void)truth;

  TempDir dir;
  csv::write_customers(dir.path("customers.csv"), instance.customers);
  csv::write_funds(dir.path("funds.csv"), instance.funds);
  csv::write_revenue(dir.path("revenue.csv"), instance.revenue, instance.customers,
                     instance.funds);

  const AllocationInstance loaded = csv::read_instance(
      dir.path("customers.csv"), dir.path("funds.csv"), dir.path("revenue.csv"), 2);

  ASSERT_EQ(loaded.customers.size(), instance.customers.size());
  for (std::size_t u = 0; u < instance.customers.size(); ++u) {
    EXPECT_EQ(loaded.customers[u].id, instance.customers[u].id);
    EXPECT_EQ(loaded.customers[u].risk_tolerance, instance.customers[u].risk_tolerance);
    EXPECT_EQ(loaded.customers[u].features, instance.customers[u].features);
  }
  ASSERT_EQ(loaded.funds.size(), instance.funds.size());
  for (std::size_t f = 0; f < instance.funds.size(); ++f) {
    EXPECT_EQ(loaded.funds[f].id, instance.funds[f].id);
    EXPECT_EQ(loaded.funds[f].risk_level, instance.funds[f].risk_level);
    EXPECT_EQ(loaded.funds[f].demand, instance.funds[f].demand);
    EXPECT_EQ(loaded.funds[f].features, instance.funds[f].features);
  }
  for (std::size_t u = 0; u < instance.customers.size(); ++u) {
    for (std::size_t f = 0; f < instance.funds.size(); ++f) {
      EXPECT_EQ(loaded.revenue.eligible(u, f), instance.revenue.eligible(u, f));
      if (instance.revenue.eligible(u, f)) {
        EXPECT_DOUBLE_EQ(loaded.revenue.value(u, f), instance.revenue.value(u, f));
      }
    }
  }
}

TEST(Csv, WriteIsByteDeterministic) {
  const auto [instance, truth] =
      generate_instance(GeneratorConfig::defaults(8, 3, 1, 123));
  (void)truth;
  TempDir dir;
  csv::write_customers(dir.path("a.csv"), instance.customers);
  csv::write_customers(dir.path("b.csv"), instance.customers);

  std::ifstream a(dir.path("a.csv"));
  std::ifstream b(dir.path("b.csv"));
  const std::string text_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string text_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text_a, text_b);
  EXPECT_FALSE(text_a.empty());
}

TEST(Csv, MissingDemandColumnIsSchemaError) {
  TempDir dir;
  write_text(dir.path("funds_bad.csv"), "id,risk_level,feat_0\n1,1,0.5\n");
  try {
    csv::read_funds(dir.path("funds_bad.csv"));
    FAIL() << "expected SCHEMA_ERROR";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_NE(std::string(e.what()).find("demand"), std::string::npos);
  }
}

TEST(Csv, UnknownFundIdIsParseErrorWithLine) {
  TempDir dir;
  write_text(dir.path("c.csv"), "id,risk_tolerance\n1,1\n2,1\n");
  write_text(dir.path("f.csv"), "id,risk_level,demand\n10,1,1\n");
  write_text(dir.path("r.csv"), "customer_id,fund_id,value\n1,10,5.0\n2,99,6.0\n");
  const auto customers = csv::read_customers(dir.path("c.csv"));
  const auto funds = csv::read_funds(dir.path("f.csv"));
  try {
    csv::read_revenue(dir.path("r.csv"), customers, funds);
    FAIL() << "expected PARSE_ERROR";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
}

TEST(Csv, MalformedNumberReportsLineAndField) {
  TempDir dir;
  write_text(dir.path("c.csv"), "id,risk_tolerance,feat_0\n1,1,0.5\n2,oops,0.25\n");
  try {
    csv::read_customers(dir.path("c.csv"));
    FAIL() << "expected PARSE_ERROR";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("field 2"), std::string::npos);
  }
}

TEST(Csv, DuplicateRevenuePairRejected) {
  TempDir dir;
  write_text(dir.path("c.csv"), "id,risk_tolerance\n1,1\n");
  write_text(dir.path("f.csv"), "id,risk_level,demand\n5,1,1\n");
  write_text(dir.path("r.csv"), "customer_id,fund_id,value\n1,5,2.0\n1,5,3.0\n");
  const auto customers = csv::read_customers(dir.path("c.csv"));
  const auto funds = csv::read_funds(dir.path("f.csv"));
  EXPECT_THROW(csv::read_revenue(dir.path("r.csv"), customers, funds), Error);
}

TEST(Csv, AbsentRevenuePairsAreIneligible) {
  TempDir dir;
  write_text(dir.path("c.csv"), "id,risk_tolerance\n1,1\n2,2\n");
  write_text(dir.path("f.csv"), "id,risk_level,demand\n7,1,1\n8,1,1\n");
  write_text(dir.path("r.csv"), "customer_id,fund_id,value\n1,7,4.5\n2,8,1.25\n");
  const auto customers = csv::read_customers(dir.path("c.csv"));
  const auto funds = csv::read_funds(dir.path("f.csv"));
  const RevenueMatrix matrix = csv::read_revenue(dir.path("r.csv"), customers, funds);
  EXPECT_TRUE(matrix.eligible(0, 0));
  EXPECT_FALSE(matrix.eligible(0, 1));
  EXPECT_FALSE(matrix.eligible(1, 0));
  EXPECT_TRUE(matrix.eligible(1, 1));
  EXPECT_DOUBLE_EQ(matrix.value(0, 0), 4.5);
  EXPECT_DOUBLE_EQ(matrix.value(1, 1), 1.25);
}

TEST(Csv, AllocationRoundTrip) {
  TempDir dir;
  write_text(dir.path("c.csv"), "id,risk_tolerance\n1,1\n2,1\n3,1\n");
  write_text(dir.path("f.csv"), "id,risk_level,demand\n4,1,2\n5,1,1\n");
  const auto customers = csv::read_customers(dir.path("c.csv"));
  const auto funds = csv::read_funds(dir.path("f.csv"));

  Assignment assignment(3, 2);
  assignment.set(0, 1, true);
  assignment.set(1, 0, true);
  assignment.set(2, 0, true);
  csv::write_allocation(dir.path("x.csv"), assignment, customers, funds);
  const Assignment loaded = csv::read_allocation(dir.path("x.csv"), customers, funds);
  EXPECT_TRUE(loaded == assignment);
}

TEST(Csv, TrainingRoundTripPreservesEverySample) {
  GeneratorConfig config = GeneratorConfig::defaults(15, 4, 1, 321);
  const std::vector<LabeledSample> samples = generate_training_data(config);

  TempDir dir;
  csv::write_training(dir.path("training.csv"), samples);
  const std::vector<LabeledSample> loaded = csv::read_training(dir.path("training.csv"));

  ASSERT_EQ(loaded.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(loaded[i].customer_features, samples[i].customer_features);
    EXPECT_EQ(loaded[i].fund_features, samples[i].fund_features);
    EXPECT_EQ(loaded[i].y, samples[i].y);
    EXPECT_DOUBLE_EQ(loaded[i].revenue, samples[i].revenue);
  }
}

TEST(Csv, TrainingRejectsBadHeaderAndBadLabel) {
  TempDir dir;
  write_text(dir.path("t1.csv"), "cust_0,fund_0,label,R\n0.5,0.5,1,2.0\n");
  EXPECT_THROW(csv::read_training(dir.path("t1.csv")), Error);

  write_text(dir.path("t2.csv"), "cust_0,fund_0,y,R\n0.5,0.5,2,2.0\n");
  try {
    csv::read_training(dir.path("t2.csv"));
    FAIL() << "expected PARSE_ERROR";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(Csv, MissingFileIsIoError) {
  try {
    csv::read_customers("/nonexistent/customers.csv");
    FAIL() << "expected IO_ERROR";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

}  // namespace
}  // namespace fundalloc
