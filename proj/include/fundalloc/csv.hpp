#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fundalloc/errors.hpp"
#include "fundalloc/synth.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {
namespace csv {

namespace detail {

inline std::string fmt(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] inline void parse_fail(const std::string& file, std::size_t line, std::size_t field,
                                    const std::string& what) {
  throw Error(ErrorCode::ParseError, file + " line " + std::to_string(line) + ", field " +
                                         std::to_string(field) + ": " + what);
}

template <typename T>
T parse_number(const std::string& token, const std::string& file, std::size_t line,
               std::size_t field) {
  T value{};
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    parse_fail(file, line, field, "cannot parse '" + token + "'");
  }
  return value;
}

/// Reads all rows of a CSV file, checks the fixed header prefix followed by
/// `feature_prefix`-numbered columns, and returns data rows as token lists.
struct Table {
  std::vector<std::vector<std::string>> rows;  // data rows, header excluded
  std::size_t n_features = 0;
};

inline Table read_table(const std::string& path, const std::vector<std::string>& fixed,
                        const std::string& feature_prefix) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::SchemaError, path + ": missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line);

  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (i >= header.size() || header[i] != fixed[i]) {
      throw Error(ErrorCode::SchemaError, path + ": missing column '" + fixed[i] + "'");
    }
  }
  std::size_t n_features = 0;
  if (!feature_prefix.empty()) {
    for (std::size_t i = fixed.size(); i < header.size(); ++i) {
      const std::string expected = feature_prefix + std::to_string(i - fixed.size());
      if (header[i] != expected) {
        throw Error(ErrorCode::SchemaError,
                    path + ": expected column '" + expected + "', found '" + header[i] + "'");
      }
      ++n_features;
    }
  } else if (header.size() != fixed.size()) {
    throw Error(ErrorCode::SchemaError, path + ": unexpected extra column '" +
                                            header[fixed.size()] + "'");
  }

  Table table;
  table.n_features = n_features;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split(line);
    if (fields.size() != fixed.size() + n_features) {
      parse_fail(path, line_no, fields.size(),
                 "expected " + std::to_string(fixed.size() + n_features) + " fields, got " +
                     std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace detail

inline void write_customers(const std::string& path, const std::vector<Customer>& customers) {
  std::ofstream out = detail::open_out(path);
  out << "id,risk_tolerance";
  const std::size_t dim = customers.empty() ? 0 : customers.front().features.size();
  for (std::size_t i = 0; i < dim; ++i) out << ",feat_" << i;
  out << '\n';
  for (const Customer& c : customers) {
    out << c.id << ',' << c.risk_tolerance;
    for (double x : c.features) out << ',' << detail::fmt(x);
    out << '\n';
  }
  detail::finish(out, path);
}

inline std::vector<Customer> read_customers(const std::string& path) {
  const detail::Table table = detail::read_table(path, {"id", "risk_tolerance"}, "feat_");
  std::vector<Customer> customers;
  customers.reserve(table.rows.size());
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    Customer c;
    c.id = detail::parse_number<int>(row[0], path, line_no, 1);
    c.risk_tolerance = detail::parse_number<int>(row[1], path, line_no, 2);
    c.features.resize(table.n_features);
    for (std::size_t i = 0; i < table.n_features; ++i) {
      c.features[i] = detail::parse_number<double>(row[2 + i], path, line_no, 3 + i);
    }
    customers.push_back(std::move(c));
  }
  return customers;
}

inline void write_funds(const std::string& path, const std::vector<Fund>& funds) {
  std::ofstream out = detail::open_out(path);
  out << "id,risk_level,demand";
  const std::size_t dim = funds.empty() ? 0 : funds.front().features.size();
  for (std::size_t i = 0; i < dim; ++i) out << ",feat_" << i;
  out << '\n';
  for (const Fund& f : funds) {
    out << f.id << ',' << f.risk_level << ',' << f.demand;
    for (double x : f.features) out << ',' << detail::fmt(x);
    out << '\n';
  }
  detail::finish(out, path);
}

inline std::vector<Fund> read_funds(const std::string& path) {
  const detail::Table table = detail::read_table(path, {"id", "risk_level", "demand"}, "feat_");
  std::vector<Fund> funds;
  funds.reserve(table.rows.size());
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    Fund f;
    f.id = detail::parse_number<int>(row[0], path, line_no, 1);
    f.risk_level = detail::parse_number<int>(row[1], path, line_no, 2);
    f.demand = detail::parse_number<long>(row[2], path, line_no, 3);
    f.features.resize(table.n_features);
    for (std::size_t i = 0; i < table.n_features; ++i) {
      f.features[i] = detail::parse_number<double>(row[3 + i], path, line_no, 4 + i);
    }
    funds.push_back(std::move(f));
  }
  return funds;
}

namespace detail {

inline std::unordered_map<int, std::size_t> id_index(const std::vector<Customer>& customers,
                                                     const std::string& path) {
  std::unordered_map<int, std::size_t> map;
  for (std::size_t i = 0; i < customers.size(); ++i) {
    if (!map.emplace(customers[i].id, i).second) {
      throw Error(ErrorCode::ParseError,
                  path + ": duplicate customer id " + std::to_string(customers[i].id));
    }
  }
  return map;
}

inline std::unordered_map<int, std::size_t> id_index(const std::vector<Fund>& funds,
                                                     const std::string& path) {
  std::unordered_map<int, std::size_t> map;
  for (std::size_t i = 0; i < funds.size(); ++i) {
    if (!map.emplace(funds[i].id, i).second) {
      throw Error(ErrorCode::ParseError,
                  path + ": duplicate fund id " + std::to_string(funds[i].id));
    }
  }
  return map;
}

}  // namespace detail

/// One row per eligible cell; pairs absent from the file are ineligible.
inline void write_revenue(const std::string& path, const RevenueMatrix& matrix,
                          const std::vector<Customer>& customers,
                          const std::vector<Fund>& funds) {
  if (!matrix.same_shape(RevenueMatrix(customers.size(), funds.size()))) {
    throw Error(ErrorCode::DimMismatch, "revenue matrix shape does not match instance");
  }
  std::ofstream out = detail::open_out(path);
  out << "customer_id,fund_id,value\n";
  for (std::size_t u = 0; u < matrix.n_customers(); ++u) {
    for (std::size_t f = 0; f < matrix.n_funds(); ++f) {
      if (!matrix.eligible(u, f)) continue;
      out << customers[u].id << ',' << funds[f].id << ',' << detail::fmt(matrix.value(u, f))
          << '\n';
    }
  }
  detail::finish(out, path);
}

inline RevenueMatrix read_revenue(const std::string& path, const std::vector<Customer>& customers,
                                  const std::vector<Fund>& funds) {
  const auto cid = detail::id_index(customers, path);
  const auto fid = detail::id_index(funds, path);
  const detail::Table table = detail::read_table(path, {"customer_id", "fund_id", "value"}, "");

  RevenueMatrix matrix(customers.size(), funds.size(), 0.0, false);
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const int customer_id = detail::parse_number<int>(row[0], path, line_no, 1);
    const int fund_id = detail::parse_number<int>(row[1], path, line_no, 2);
    const double value = detail::parse_number<double>(row[2], path, line_no, 3);
    const auto cu = cid.find(customer_id);
    if (cu == cid.end()) {
      detail::parse_fail(path, line_no, 1, "unknown customer id " + std::to_string(customer_id));
    }
    const auto fu = fid.find(fund_id);
    if (fu == fid.end()) {
      detail::parse_fail(path, line_no, 2, "unknown fund id " + std::to_string(fund_id));
    }
    if (matrix.eligible(cu->second, fu->second)) {
      detail::parse_fail(path, line_no, 1,
                         "duplicate pair (" + row[0] + ", " + row[1] + ")");
    }
    matrix.set(cu->second, fu->second, value, true);
  }
  return matrix;
}

inline void write_allocation(const std::string& path, const Assignment& assignment,
                             const std::vector<Customer>& customers,
                             const std::vector<Fund>& funds) {
  std::ofstream out = detail::open_out(path);
  out << "customer_id,fund_id\n";
  for (std::size_t u = 0; u < assignment.n_customers(); ++u) {
    for (std::size_t f = 0; f < assignment.n_funds(); ++f) {
      if (assignment.at(u, f)) out << customers[u].id << ',' << funds[f].id << '\n';
    }
  }
  detail::finish(out, path);
}

inline Assignment read_allocation(const std::string& path,
                                  const std::vector<Customer>& customers,
                                  const std::vector<Fund>& funds) {
  const auto cid = detail::id_index(customers, path);
  const auto fid = detail::id_index(funds, path);
  const detail::Table table = detail::read_table(path, {"customer_id", "fund_id"}, "");

  Assignment assignment(customers.size(), funds.size());
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const int customer_id = detail::parse_number<int>(row[0], path, line_no, 1);
    const int fund_id = detail::parse_number<int>(row[1], path, line_no, 2);
    const auto cu = cid.find(customer_id);
    if (cu == cid.end()) {
      detail::parse_fail(path, line_no, 1, "unknown customer id " + std::to_string(customer_id));
    }
    const auto fu = fid.find(fund_id);
    if (fu == fid.end()) {
      detail::parse_fail(path, line_no, 2, "unknown fund id " + std::to_string(fund_id));
    }
    assignment.set(cu->second, fu->second, true);
  }
  return assignment;
}

inline void write_training(const std::string& path, const std::vector<LabeledSample>& samples) {
  std::ofstream out = detail::open_out(path);
  const std::size_t cd = samples.empty() ? 0 : samples.front().customer_features.size();
  const std::size_t fd = samples.empty() ? 0 : samples.front().fund_features.size();
  for (std::size_t i = 0; i < cd; ++i) out << "cust_" << i << ',';
  for (std::size_t i = 0; i < fd; ++i) out << "fund_" << i << ',';
  out << "y,R\n";
  for (const LabeledSample& s : samples) {
    for (double x : s.customer_features) out << detail::fmt(x) << ',';
    for (double x : s.fund_features) out << detail::fmt(x) << ',';
    out << s.y << ',' << detail::fmt(s.revenue) << '\n';
  }
  detail::finish(out, path);
}

inline std::vector<LabeledSample> read_training(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, path + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = detail::split(line);

  std::size_t cd = 0;
  std::size_t at = 0;
  while (at < header.size() && header[at] == "cust_" + std::to_string(cd)) {
    ++cd;
    ++at;
  }
  std::size_t fd = 0;
  while (at < header.size() && header[at] == "fund_" + std::to_string(fd)) {
    ++fd;
    ++at;
  }
  if (at + 2 != header.size() || header[at] != "y" || header[at + 1] != "R") {
    throw Error(ErrorCode::SchemaError,
                path + ": header must be cust_*..., fund_*..., y, R");
  }

  std::vector<LabeledSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split(line);
    if (fields.size() != header.size()) {
      detail::parse_fail(path, line_no, fields.size(),
                         "expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
    }
    LabeledSample s;
    s.customer_features.resize(cd);
    s.fund_features.resize(fd);
    std::size_t field = 0;
    for (std::size_t i = 0; i < cd; ++i, ++field) {
      s.customer_features[i] = detail::parse_number<double>(fields[field], path, line_no, field + 1);
    }
    for (std::size_t i = 0; i < fd; ++i, ++field) {
      s.fund_features[i] = detail::parse_number<double>(fields[field], path, line_no, field + 1);
    }
    s.y = detail::parse_number<int>(fields[field], path, line_no, field + 1);
    if (s.y != 0 && s.y != 1) {
      detail::parse_fail(path, line_no, field + 1, "y must be 0 or 1");
    }
    ++field;
    s.revenue = detail::parse_number<double>(fields[field], path, line_no, field + 1);
    samples.push_back(std::move(s));
  }
  return samples;
}

inline void write_truth(const std::string& path, const GroundTruth& truth,
                        const std::vector<Customer>& customers,
                        const std::vector<Fund>& funds) {
  std::ofstream out = detail::open_out(path);
  out << "customer_id,fund_id,p_star,mu_star,sigma_star\n";
  for (std::size_t u = 0; u < truth.n_customers; ++u) {
    for (std::size_t f = 0; f < truth.n_funds; ++f) {
      const TruthTriple t = truth.at(u, f);
      out << customers[u].id << ',' << funds[f].id << ',' << detail::fmt(t.p) << ','
          << detail::fmt(t.mu) << ',' << detail::fmt(t.sigma) << '\n';
    }
  }
  detail::finish(out, path);
}

/// Loads the three instance files; K arrives separately (it is a run
/// parameter, not part of the data).
inline AllocationInstance read_instance(const std::string& customers_path,
                                        const std::string& funds_path,
                                        const std::string& revenue_path, int k) {
  AllocationInstance instance;
  instance.customers = read_customers(customers_path);
  instance.funds = read_funds(funds_path);
  instance.revenue = read_revenue(revenue_path, instance.customers, instance.funds);
  instance.k = k;
  return instance;
}

}  // namespace csv
}  // namespace fundalloc
