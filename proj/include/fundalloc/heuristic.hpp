#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fundalloc/domain.hpp"
#include "fundalloc/errors.hpp"
#include "fundalloc/types.hpp"

namespace fundalloc {

/// Thrown when a solver cannot complete an allocation without violating a
/// constraint. Carries the partial assignment for diagnosis.
class AllocationError : public Error {
 public:
  AllocationError(const std::string& message, AllocationResult partial)
      : Error(ErrorCode::InfeasibleDuringAllocation, message), partial_(std::move(partial)) {}

  const AllocationResult& partial() const noexcept { return partial_; }

 private:
  AllocationResult partial_;
};

/// Per-fund consumption rates alpha_f = (sum of eligible expected revenue) /
/// (remaining demand). A fund whose remaining demand is zero has no rate.
struct ConsumptionRates {
  std::vector<double> alpha;
  std::vector<std::uint8_t> active;

  double at(std::size_t f) const {
    if (f >= active.size() || !active[f]) {
      throw Error(ErrorCode::ZeroDemand,
                  "fund " + std::to_string(f) + " has no remaining demand");
    }
    return alpha[f];
  }
};

struct HeuristicScores {
  std::vector<double> h;
};

enum class ScoreVariant { Eq8, Top3 };

/// Consumption rate per fund with remaining demand. `row_active`, when given,
/// restricts the revenue sums to the still-unallocated customers.
inline ConsumptionRates consumption_rates(const RevenueMatrix& revenue,
                                          const std::vector<long>& remaining_demand,
                                          const std::vector<std::uint8_t>* row_active = nullptr) {
  const std::size_t n = revenue.n_customers();
  const std::size_t m = revenue.n_funds();
  if (remaining_demand.size() != m) {
    throw Error(ErrorCode::DimMismatch, "remaining_demand size does not match fund count");
  }
  ConsumptionRates rates;
  rates.alpha.assign(m, 0.0);
  rates.active.assign(m, 0);
  std::vector<double> sums(m, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    if (row_active && !(*row_active)[u]) continue;
    for (std::size_t f = 0; f < m; ++f) {
      if (revenue.eligible(u, f) && remaining_demand[f] > 0) sums[f] += revenue.value(u, f);
    }
  }
  for (std::size_t f = 0; f < m; ++f) {
    if (remaining_demand[f] > 0) {
      rates.active[f] = 1;
      rates.alpha[f] = sums[f] / static_cast<double>(remaining_demand[f]);
    }
  }
  return rates;
}

namespace detail {

// Eligible remaining funds of a customer, sorted by descending revenue with
// ascending fund index breaking ties.
inline void sorted_eligible_funds(const RevenueMatrix& revenue, const ConsumptionRates& rates,
                                  std::size_t u, std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t f = 0; f < revenue.n_funds(); ++f) {
    if (rates.active[f] && revenue.eligible(u, f)) out.push_back(f);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    const double ea = revenue.value(u, a);
    const double eb = revenue.value(u, b);
    if (ea != eb) return ea > eb;
    return a < b;
  });
}

// Heuristic score over a descending-revenue fund list. A customer down to
// `promote_at` funds or fewer is promoted to infinite priority: it must be
// served before any of those funds exhausts.
inline double score_from_sorted(const RevenueMatrix& revenue, const ConsumptionRates& rates,
                                std::size_t u, const std::vector<std::size_t>& funds,
                                ScoreVariant variant, std::size_t promote_at) {
  const std::size_t m = funds.size();
  if (m <= promote_at) return std::numeric_limits<double>::infinity();
  if (variant == ScoreVariant::Top3 && m >= 3) {
    const double ea = revenue.value(u, funds[0]);
    const double eb = revenue.value(u, funds[1]);
    const double ec = revenue.value(u, funds[2]);
    return 0.5 * (rates.alpha[funds[0]] + rates.alpha[funds[1]]) * (2.0 * ea - eb - ec);
  }
  double h = 0.0;
  for (std::size_t j = 1; j < m; ++j) {
    h += rates.alpha[funds[j - 1]] *
         (revenue.value(u, funds[j - 1]) - revenue.value(u, funds[j]));
  }
  return h;
}

}  // namespace detail

/// Potential-revenue-loss score per customer (descending-revenue adjacent
/// differences weighted by consumption rates). Customers whose only remaining
/// option is a single fund get infinite priority.
inline HeuristicScores heuristic_scores(const RevenueMatrix& revenue,
                                        const ConsumptionRates& rates,
                                        const std::vector<std::size_t>& unallocated,
                                        ScoreVariant variant = ScoreVariant::Eq8) {
  HeuristicScores scores;
  scores.h.assign(revenue.n_customers(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> funds;
  for (std::size_t u : unallocated) {
    detail::sorted_eligible_funds(revenue, rates, u, funds);
    if (funds.empty()) {
      throw Error(ErrorCode::NoEligibleFund,
                  "customer " + std::to_string(u) + " has no eligible remaining fund");
    }
    scores.h[u] = detail::score_from_sorted(revenue, rates, u, funds, variant, 1);
  }
  return scores;
}

/// Legacy three-fund variant of the heuristic score; falls back to the
/// adjacent-difference form when a customer has fewer than three options.
inline HeuristicScores heuristic_scores_top3(const RevenueMatrix& revenue,
                                             const ConsumptionRates& rates,
                                             const std::vector<std::size_t>& unallocated) {
  return heuristic_scores(revenue, rates, unallocated, ScoreVariant::Top3);
}

struct HaOptions {
  ScoreVariant variant = ScoreVariant::Eq8;
  /// Lazy mode keeps incremental revenue sums and rescores only customers
  /// touched by a fund exhaustion instead of recomputing everything.
  bool lazy = false;
};

namespace detail {
/// Rounds smaller than this are always scored sequentially; larger ones fan
/// out across threads when OpenMP is available.
inline constexpr std::size_t kHaParallelGrain = 16384;
}  // namespace detail

/// Heuristic allocation: serve customers in descending score order, giving
/// each its current top-K remaining funds; whenever a fund exhausts, recompute
/// rates and scores over the unallocated customers and restart the sweep.
///
/// Hot-path notes: each customer's eligible funds are pre-sorted once by
/// descending revenue (the order never changes across rounds — only the
/// active-fund mask does), per-fund revenue sums are maintained incrementally,
/// and each round consumes the remaining customers in sorted batches selected
/// with nth_element rather than through a heap or a full sort. The batch walk
/// visits customers in exactly the descending-score order (ties at ascending
/// index). Scoring of a round is embarrassingly parallel and runs multi-
/// threaded for large rounds when built with OpenMP; results are bit-identical
/// to the sequential path because every score lands in a fixed slot.
inline std::pair<AllocationResult, SolverStats> allocate_ha(const AllocationInstance& instance,
                                                            const HaOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  check_instance_shape(instance);
  const std::size_t n = instance.customers.size();
  const std::size_t m = instance.funds.size();
  const std::size_t k = static_cast<std::size_t>(instance.k);
  const RevenueMatrix& revenue = instance.revenue;

  auto masked_eligible = [&](std::size_t u, std::size_t f) {
    return revenue.eligible(u, f) &&
           instance.funds[f].risk_level <= instance.customers[u].risk_tolerance;
  };

  std::vector<long> remaining(m);
  for (std::size_t f = 0; f < m; ++f) remaining[f] = instance.funds[f].demand;

  Assignment x(n, m);
  std::vector<std::uint8_t> active(n, 1);
  std::size_t n_unallocated = n;
  long rounds = 0;
  double objective_acc = 0.0;
  std::vector<long> fills(m, 0);

  auto partial_result = [&]() {
    AllocationResult partial;
    partial.assignment = x;
    partial.objective = objective_acc;
    partial.fill_counts = fills;
    return partial;
  };

  // Eligible funds per customer, pre-sorted by descending revenue (ascending
  // index on ties); `fund_order` and `sorted_vals` are flat n x m with
  // `eligible_count[u]` valid entries per row.
  std::vector<std::uint16_t> fund_order(n * m);
  std::vector<double> sorted_vals(n * m);
  std::vector<std::uint16_t> eligible_count(n, 0);
  auto build_row = [&](std::size_t u) {
    std::uint16_t* order = fund_order.data() + u * m;
    double* vals = sorted_vals.data() + u * m;
    std::size_t cnt = 0;
    for (std::size_t f = 0; f < m; ++f) {
      if (!masked_eligible(u, f)) continue;
      const double e = revenue.value(u, f);
      std::size_t pos = cnt;
      while (pos > 0 && vals[pos - 1] < e) {
        vals[pos] = vals[pos - 1];
        order[pos] = order[pos - 1];
        --pos;
      }
      vals[pos] = e;
      order[pos] = static_cast<std::uint16_t>(f);
      ++cnt;
    }
    eligible_count[u] = static_cast<std::uint16_t>(cnt);
  };
#ifdef _OPENMP
  if (n >= detail::kHaParallelGrain && omp_get_max_threads() > 1) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(n); ++u) {
      build_row(static_cast<std::size_t>(u));
    }
  } else {
    for (std::size_t u = 0; u < n; ++u) build_row(u);
  }
#else
  for (std::size_t u = 0; u < n; ++u) build_row(u);
#endif

  // Fund revenue sums over unallocated customers, accumulated in a fixed
  // order (per customer, descending revenue) so results do not depend on the
  // scoring thread count.
  std::vector<double> sums(m, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    const std::uint16_t* order = fund_order.data() + u * m;
    const double* vals = sorted_vals.data() + u * m;
    for (std::size_t j = 0; j < eligible_count[u]; ++j) sums[order[j]] += vals[j];
  }

  std::vector<double> alpha(m, 0.0);
  std::vector<std::uint8_t> fund_active(m, 0);
  std::vector<double> h(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint16_t> topk(n * k);
  std::vector<double> topk_vals(n * k);
  const double inf = std::numeric_limits<double>::infinity();

  // Walks the customer's pre-sorted funds, records its current top-K and the
  // adjacent-difference (or top-three) score over the still-active ones.
  // Returns the number of active options; the caller handles shortfalls.
  auto score_one = [&](std::size_t u) -> std::size_t {
    const std::uint16_t* order = fund_order.data() + u * m;
    const double* vals = sorted_vals.data() + u * m;
    std::uint16_t* best = topk.data() + u * k;
    double* best_vals = topk_vals.data() + u * k;
    std::size_t found = 0;
    double score = 0.0;
    double top_e[3] = {0.0, 0.0, 0.0};
    std::size_t top_f[2] = {0, 0};
    double prev_e = 0.0;
    std::size_t prev_f = 0;
    for (std::size_t j = 0; j < eligible_count[u]; ++j) {
      const std::size_t f = order[j];
      if (!fund_active[f]) continue;
      const double e = vals[j];
      if (found < 3) {
        top_e[found] = e;
        if (found < 2) top_f[found] = f;
      }
      if (found < k) {
        best[found] = static_cast<std::uint16_t>(f);
        best_vals[found] = e;
      }
      if (found > 0) score += alpha[prev_f] * (prev_e - e);
      prev_e = e;
      prev_f = f;
      ++found;
    }
    if (found <= k) {
      h[u] = inf;
    } else if (options.variant == ScoreVariant::Top3 && found >= 3) {
      h[u] = 0.5 * (alpha[top_f[0]] + alpha[top_f[1]]) * (2.0 * top_e[0] - top_e[1] - top_e[2]);
    } else {
      h[u] = score;
    }
    return found;
  };

  auto throw_strand = [&](std::size_t u, std::size_t found) {
    throw AllocationError("customer " + std::to_string(instance.customers[u].id) + " has " +
                              std::to_string(found) + " eligible remaining funds but needs " +
                              std::to_string(k),
                          partial_result());
  };

  struct Ranked {
    double h;
    std::uint32_t u;
  };
  auto ranked_before = [](const Ranked& a, const Ranked& b) {
    if (a.h != b.h) return a.h > b.h;
    return a.u < b.u;
  };
  std::vector<Ranked> work(n);
  std::size_t n_work = 0;     // entries of `work` valid this round
  std::size_t consumed = 0;   // prefix of `work` already assigned
  std::size_t sorted_end = 0; // prefix of `work` already in final order
  std::vector<std::uint32_t> alive(n);
  std::size_t n_alive = n;
  for (std::size_t u = 0; u < n; ++u) alive[u] = static_cast<std::uint32_t>(u);

  auto touched_by = [&](std::size_t u, const std::vector<std::size_t>& exhausted) {
    for (std::size_t f : exhausted) {
      if (masked_eligible(u, f)) return true;
    }
    return false;
  };

  // Settle the finished round (deduct the served customers from the fund
  // sums), refresh rates, rescore (all customers, or only exhaustion-touched
  // ones in lazy mode), and refill the work array.
  auto recompute = [&](const std::vector<std::size_t>* exhausted) {
    ++rounds;
    for (std::size_t i = 0; i < consumed; ++i) {
      const std::size_t u = work[i].u;
      const std::uint16_t* order = fund_order.data() + u * m;
      const double* vals = sorted_vals.data() + u * m;
      for (std::size_t j = 0; j < eligible_count[u]; ++j) sums[order[j]] -= vals[j];
    }
    for (std::size_t f = 0; f < m; ++f) {
      fund_active[f] = remaining[f] > 0 ? 1 : 0;
      alpha[f] = fund_active[f] ? sums[f] / static_cast<double>(remaining[f]) : 0.0;
    }
    const bool partial_rescore = options.lazy && exhausted != nullptr;
    std::size_t out = 0;
    for (std::size_t i = 0; i < n_alive; ++i) {
      if (active[alive[i]]) alive[out++] = alive[i];
    }
    n_alive = out;
    auto rank_slot = [&](std::size_t i) -> std::size_t {
      const std::uint32_t u = alive[i];
      std::size_t found = k;
      if (!partial_rescore || touched_by(u, *exhausted)) found = score_one(u);
      work[i] = {h[u], u};  // stale scores stay by design in lazy mode
      return found;
    };
#ifdef _OPENMP
    if (n_alive >= detail::kHaParallelGrain && omp_get_max_threads() > 1) {
      std::atomic<std::uint32_t> first_short{std::numeric_limits<std::uint32_t>::max()};
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_alive); ++i) {
        if (rank_slot(static_cast<std::size_t>(i)) < k) {
          std::uint32_t seen = first_short.load(std::memory_order_relaxed);
          const std::uint32_t mine = alive[static_cast<std::size_t>(i)];
          while (mine < seen &&
                 !first_short.compare_exchange_weak(seen, mine, std::memory_order_relaxed)) {
          }
        }
      }
      const std::uint32_t short_u = first_short.load();
      if (short_u != std::numeric_limits<std::uint32_t>::max()) {
        throw_strand(short_u, score_one(short_u));
      }
    } else {
      for (std::size_t i = 0; i < n_alive; ++i) {
        const std::size_t found = rank_slot(i);
        if (found < k) throw_strand(alive[i], found);
      }
    }
#else
    for (std::size_t i = 0; i < n_alive; ++i) {
      const std::size_t found = rank_slot(i);
      if (found < k) throw_strand(alive[i], found);
    }
#endif
    n_work = n_alive;
    consumed = 0;
    sorted_end = 0;
  };

  recompute(nullptr);

  std::vector<std::size_t> exhausted_now;
  while (n_unallocated > 0) {
    if (consumed == n_work) break;  // unreachable on consistent state
    if (consumed == sorted_end) {
      // Select the next batch of highest-score customers. Any fund needs at
      // least min-remaining-demand assignments before it can exhaust, so that
      // many are always consumable from one selection.
      const std::size_t pending = n_work - consumed;
      long min_rem = std::numeric_limits<long>::max();
      for (std::size_t f = 0; f < m; ++f) {
        if (remaining[f] > 0) min_rem = std::min(min_rem, remaining[f]);
      }
      std::size_t batch = std::max<std::size_t>(
          {static_cast<std::size_t>(std::max(min_rem, 1L)), 512, pending / 8});
      batch = std::min(batch, pending);
      const auto first = work.begin() + static_cast<std::ptrdiff_t>(consumed);
      const auto last = work.begin() + static_cast<std::ptrdiff_t>(n_work);
      if (batch < pending) {
        std::nth_element(first, first + static_cast<std::ptrdiff_t>(batch), last, ranked_before);
      }
      std::sort(first, first + static_cast<std::ptrdiff_t>(batch), ranked_before);
      sorted_end = consumed + batch;
    }
    const std::size_t u = work[consumed++].u;

    exhausted_now.clear();
    const std::uint16_t* best = topk.data() + u * k;
    const double* best_vals = topk_vals.data() + u * k;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t f = best[j];
      x.set(u, f, true);
      objective_acc += best_vals[j];
      ++fills[f];
      if (--remaining[f] == 0) exhausted_now.push_back(f);
    }
    active[u] = 0;
    --n_unallocated;
    if (!exhausted_now.empty() && n_unallocated > 0) {
      recompute(&exhausted_now);
    }
  }

  AllocationResult result;
  result.assignment = std::move(x);
  result.objective = objective_acc;
  result.fill_counts = std::move(fills);

  SolverStats stats;
  stats.rounds = rounds;
  stats.objective = result.objective;
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(result), stats};
}

/// Priority-order baseline: each fund, in the given order, takes its
/// highest-revenue eligible customers that still have impression slots left.
/// `priority` must be a permutation of fund indices; when empty, funds are
/// ordered by descending initial consumption rate.
inline std::pair<AllocationResult, SolverStats> allocate_manual(
    const AllocationInstance& instance, std::vector<std::size_t> priority = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  check_instance_shape(instance);
  const std::size_t n = instance.customers.size();
  const std::size_t m = instance.funds.size();
  const std::size_t k = static_cast<std::size_t>(instance.k);
  const RevenueMatrix revenue =
      apply_risk_mask(instance.revenue, instance.customers, instance.funds);

  std::vector<long> demand(m);
  for (std::size_t f = 0; f < m; ++f) demand[f] = instance.funds[f].demand;

  if (priority.empty()) {
    const ConsumptionRates rates = consumption_rates(revenue, demand);
    priority.resize(m);
    for (std::size_t f = 0; f < m; ++f) priority[f] = f;
    std::sort(priority.begin(), priority.end(), [&](std::size_t a, std::size_t b) {
      const double ra = rates.active[a] ? rates.alpha[a] : -std::numeric_limits<double>::infinity();
      const double rb = rates.active[b] ? rates.alpha[b] : -std::numeric_limits<double>::infinity();
      if (ra != rb) return ra > rb;
      return a < b;
    });
  } else {
    std::vector<std::uint8_t> seen(m, 0);
    for (std::size_t f : priority) {
      if (f >= m || seen[f]) {
        throw Error(ErrorCode::InvalidConfig, "priority is not a permutation of funds");
      }
      seen[f] = 1;
    }
    if (priority.size() != m) {
      throw Error(ErrorCode::InvalidConfig, "priority must list every fund exactly once");
    }
  }

  Assignment x(n, m);
  std::vector<long> slots(n, static_cast<long>(k));
  long rounds = 0;
  std::vector<std::size_t> candidates;
  for (std::size_t f : priority) {
    ++rounds;
    candidates.clear();
    for (std::size_t u = 0; u < n; ++u) {
      if (slots[u] > 0 && revenue.eligible(u, f)) candidates.push_back(u);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
      const double ea = revenue.value(a, f);
      const double eb = revenue.value(b, f);
      if (ea != eb) return ea > eb;
      return a < b;
    });
    if (static_cast<long>(candidates.size()) < instance.funds[f].demand) {
      AllocationResult partial;
      partial.assignment = x;
      partial.objective = objective_value(x, revenue);
      partial.fill_counts = fill_counts(x);
      throw AllocationError("fund " + std::to_string(instance.funds[f].id) + " demands " +
                                std::to_string(instance.funds[f].demand) + " customers but only " +
                                std::to_string(candidates.size()) + " remain eligible",
                            partial);
    }
    for (long taken = 0; taken < instance.funds[f].demand; ++taken) {
      const std::size_t u = candidates[static_cast<std::size_t>(taken)];
      x.set(u, f, true);
      --slots[u];
    }
  }

  AllocationResult result;
  result.assignment = std::move(x);
  result.objective = objective_value(result.assignment, revenue);
  result.fill_counts = fill_counts(result.assignment);

  SolverStats stats;
  stats.rounds = rounds;
  stats.objective = result.objective;
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(result), stats};
}

}  // namespace fundalloc
