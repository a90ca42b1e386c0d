#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fundalloc/domain.hpp"
#include "fundalloc/errors.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {

inline constexpr std::size_t kBruteForceMaxCustomers = 10;
inline constexpr std::size_t kBruteForceMaxFunds = 4;

namespace detail {

// Enumerates K-subsets of `items` in lexicographic order (items are given in
// ascending order), invoking fn(subset) for each.
template <typename Fn>
void for_each_subset(const std::vector<std::size_t>& items, std::size_t k, Fn&& fn) {
  if (items.size() < k) return;
  std::vector<std::size_t> pick(k);
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    for (std::size_t i = 0; i < k; ++i) pick[i] = items[idx[i]];
    fn(pick);
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (idx[i] != i + items.size() - k) {
        ++idx[i];
        for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
        i = 1;
        break;
      }
      if (i == 0) return;
    }
    if (i == 0 && k == 0) return;
  }
}

}  // namespace detail

/// Globally optimal assignment by demand-state dynamic programming over the
/// full enumeration space. Guarded to tiny instances; ties resolve to the
/// lexicographically smallest assignment (customers in index order, each
/// taking the smallest eligible fund combination among optimal completions).
inline AllocationResult allocate_exact_bruteforce(const AllocationInstance& instance) {
  check_instance_shape(instance);
  const std::size_t n = instance.customers.size();
  const std::size_t m = instance.funds.size();
  const std::size_t k = static_cast<std::size_t>(instance.k);
  if (n > kBruteForceMaxCustomers || m > kBruteForceMaxFunds) {
    throw Error(ErrorCode::TooLarge,
                "exhaustive search is guarded to " + std::to_string(kBruteForceMaxCustomers) +
                    " customers and " + std::to_string(kBruteForceMaxFunds) + " funds");
  }
  const RevenueMatrix revenue =
      apply_risk_mask(instance.revenue, instance.customers, instance.funds);

  // Demand-state encoding: mixed radix over (demand_f + 1).
  std::vector<std::uint64_t> stride(m, 1);
  std::uint64_t radix = 1;
  for (std::size_t f = 0; f < m; ++f) {
    stride[f] = radix;
    radix *= static_cast<std::uint64_t>(instance.funds[f].demand + 1);
  }

  const double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::unordered_map<std::uint64_t, double>> memo(n + 1);

  std::vector<std::vector<std::size_t>> eligible(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t f = 0; f < m; ++f) {
      if (revenue.eligible(u, f)) eligible[u].push_back(f);
    }
  }

  std::vector<long> demand(m);
  std::uint64_t initial_code = 0;
  for (std::size_t f = 0; f < m; ++f) {
    demand[f] = instance.funds[f].demand;
    initial_code += stride[f] * static_cast<std::uint64_t>(demand[f]);
  }

  // best(u, code): max revenue allocating customers u..n-1 with the remaining
  // demands encoded by `code`; -inf when no completion exists.
  auto best = [&](auto&& self, std::size_t u, std::uint64_t code,
                  std::vector<long>& rem) -> double {
    if (u == n) return code == 0 ? 0.0 : kNegInf;
    auto it = memo[u].find(code);
    if (it != memo[u].end()) return it->second;
    double value = kNegInf;
    detail::for_each_subset(eligible[u], k, [&](const std::vector<std::size_t>& pick) {
      double gain = 0.0;
      for (std::size_t f : pick) {
        if (rem[f] == 0) return;
        gain += revenue.value(u, f);
      }
      std::uint64_t next = code;
      for (std::size_t f : pick) {
        --rem[f];
        next -= stride[f];
      }
      const double rest = self(self, u + 1, next, rem);
      for (std::size_t f : pick) ++rem[f];
      if (rest != kNegInf && gain + rest > value) value = gain + rest;
    });
    memo[u].emplace(code, value);
    return value;
  };

  const double optimum = best(best, 0, initial_code, demand);
  if (optimum == kNegInf) {
    throw Error(ErrorCode::Infeasible, "no assignment satisfies the constraints");
  }

  // Reconstruct the lexicographically smallest optimal assignment: subsets are
  // enumerated in lexicographic order and values re-derive bit-identically, so
  // the first subset matching the memoized optimum is the smallest one.
  Assignment x(n, m);
  std::uint64_t code = initial_code;
  for (std::size_t u = 0; u < n; ++u) {
    const double want = best(best, u, code, demand);
    bool placed = false;
    detail::for_each_subset(eligible[u], k, [&](const std::vector<std::size_t>& pick) {
      if (placed) return;
      double gain = 0.0;
      for (std::size_t f : pick) {
        if (demand[f] == 0) return;
        gain += revenue.value(u, f);
      }
      std::uint64_t next = code;
      for (std::size_t f : pick) {
        --demand[f];
        next -= stride[f];
      }
      const double rest = best(best, u + 1, next, demand);
      if (rest != kNegInf && gain + rest == want) {
        placed = true;
        for (std::size_t f : pick) x.set(u, f, true);
        code = next;
      } else {
        for (std::size_t f : pick) ++demand[f];
      }
    });
  }

  AllocationResult result;
  result.assignment = std::move(x);
  result.objective = objective_value(result.assignment, revenue);
  result.fill_counts = fill_counts(result.assignment);
  return result;
}

/// Exact K=1 solver: successive shortest augmenting paths with fund
/// potentials on the bipartite flow network (source -> customers, cap 1;
/// customer -> eligible fund, cap 1, cost -E; fund -> sink, cap demand).
/// Funds are few, so paths are searched in a fund-level residual graph where
/// the cheapest reassignment between two funds is kept in a lazy-deletion
/// heap per fund pair.
inline AllocationResult allocate_exact_flow(const AllocationInstance& instance) {
  check_instance_shape(instance);
  if (instance.k != 1) {
    throw Error(ErrorCode::UnsupportedK,
                "flow oracle requires K=1 (got K=" + std::to_string(instance.k) + ")");
  }
  const std::size_t n = instance.customers.size();
  const std::size_t m = instance.funds.size();
  const RevenueMatrix revenue =
      apply_risk_mask(instance.revenue, instance.customers, instance.funds);

  long supply = 0;
  for (const Fund& fund : instance.funds) supply += fund.demand;
  if (supply != static_cast<long>(n)) {
    throw Error(ErrorCode::Infeasible, "total fund demand (" + std::to_string(supply) +
                                           ") != number of customers (" + std::to_string(n) +
                                           "); every fund must fill exactly");
  }

  // Shift costs to c = C - E >= 0 so the first Dijkstra needs no priming.
  double max_revenue = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t f = 0; f < m; ++f) {
      if (revenue.eligible(u, f)) max_revenue = std::max(max_revenue, revenue.value(u, f));
    }
  }
  auto cost = [&](std::size_t u, std::size_t f) { return max_revenue - revenue.value(u, f); };

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<int> assign(n, -1);
  std::vector<long> fill(m, 0);
  std::vector<double> potential(m, 0.0);

  // heaps[g*m + t]: candidates to move a customer off fund g onto fund t,
  // keyed by the cost delta of that move. Entries go stale when the customer
  // leaves g; staleness is resolved lazily at peek time.
  using HeapEntry = std::pair<double, std::size_t>;
  std::vector<std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>>>
      heaps(m * m);

  auto push_heaps = [&](std::size_t u, std::size_t g) {
    for (std::size_t t = 0; t < m; ++t) {
      if (t != g && revenue.eligible(u, t)) {
        heaps[g * m + t].emplace(cost(u, t) - cost(u, g), u);
      }
    }
  };

  std::vector<double> dist(m);
  std::vector<int> pred_fund(m);
  std::vector<std::size_t> pred_cust(m);
  std::vector<std::uint8_t> done(m);

  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t f = 0; f < m; ++f) {
      dist[f] = revenue.eligible(u, f) ? cost(u, f) - potential[f] : kInf;
      pred_fund[f] = -1;
      pred_cust[f] = 0;
      done[f] = 0;
    }
    int target = -1;
    while (true) {
      int next = -1;
      for (std::size_t f = 0; f < m; ++f) {
        if (!done[f] && dist[f] < kInf && (next < 0 || dist[f] < dist[static_cast<std::size_t>(next)])) {
          next = static_cast<int>(f);
        }
      }
      if (next < 0) break;
      const std::size_t g = static_cast<std::size_t>(next);
      if (fill[g] < instance.funds[g].demand) {
        target = next;
        break;
      }
      done[g] = 1;
      for (std::size_t t = 0; t < m; ++t) {
        if (t == g || done[t]) continue;
        auto& heap = heaps[g * m + t];
        while (!heap.empty() && assign[heap.top().second] != static_cast<int>(g)) heap.pop();
        if (heap.empty()) continue;
        // Residual reduced cost; clamp tiny negatives from potential drift.
        const double weight =
            std::max(0.0, heap.top().first + potential[g] - potential[t]);
        const double candidate = dist[g] + weight;
        if (candidate < dist[t]) {
          dist[t] = candidate;
          pred_fund[t] = next;
          pred_cust[t] = heap.top().second;
        }
      }
    }
    if (target < 0) {
      throw Error(ErrorCode::Infeasible,
                  "customer " + std::to_string(instance.customers[u].id) +
                      " cannot be routed to any fund with remaining capacity");
    }
    const double d_target = dist[static_cast<std::size_t>(target)];
    for (std::size_t f = 0; f < m; ++f) {
      if (done[f]) potential[f] += dist[f] - d_target;
    }
    std::size_t f = static_cast<std::size_t>(target);
    while (pred_fund[f] >= 0) {
      const std::size_t w = pred_cust[f];
      const std::size_t g = static_cast<std::size_t>(pred_fund[f]);
      assign[w] = static_cast<int>(f);
      push_heaps(w, f);
      f = g;
    }
    assign[u] = static_cast<int>(f);
    push_heaps(u, f);
    ++fill[static_cast<std::size_t>(target)];
  }

  Assignment x(n, m);
  for (std::size_t u = 0; u < n; ++u) x.set(u, static_cast<std::size_t>(assign[u]), true);

  AllocationResult result;
  result.assignment = std::move(x);
  result.objective = objective_value(result.assignment, revenue);
  result.fill_counts = fill_counts(result.assignment);
  return result;
}

}  // namespace fundalloc
