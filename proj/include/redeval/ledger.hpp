#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string_view>

#include "redeval/errors.hpp"

namespace redeval {

// Role under which a model call is accounted. Query accounting is holistic:
// auxiliary attacker/defense/judger calls share the same ledger as target
// calls.
enum class QueryRole { Target, AttackerAux, DefenseAux, JudgerAux };

constexpr std::array<QueryRole, 4> kAllQueryRoles = {
    QueryRole::Target, QueryRole::AttackerAux, QueryRole::DefenseAux,
    QueryRole::JudgerAux};

constexpr const char* to_string(QueryRole role) {
  switch (role) {
    case QueryRole::Target: return "target";
    case QueryRole::AttackerAux: return "attacker_aux";
    case QueryRole::DefenseAux: return "defense_aux";
    case QueryRole::JudgerAux: return "judger_aux";
  }
  return "unknown";
}

// Per-role call counter. Increments are atomic so concurrent generate calls
// never lose counts; failed attempts (retries, exhausted retries) are tracked
// separately and do not enter total().
class QueryLedger {
 public:
  QueryLedger() = default;

  QueryLedger(const QueryLedger& other) { copy_from(other); }

  QueryLedger& operator=(const QueryLedger& other) {
    if (this != &other) copy_from(other);
    return *this;
  }

  void add(QueryRole role, std::uint64_t n = 1) {
    counts_[index(role)].fetch_add(n, std::memory_order_relaxed);
  }

  void add_failed(std::uint64_t n = 1) {
    failed_.fetch_add(n, std::memory_order_relaxed);
  }

  std::uint64_t count(QueryRole role) const {
    return counts_[index(role)].load(std::memory_order_relaxed);
  }

  std::uint64_t failed_calls() const {
    return failed_.load(std::memory_order_relaxed);
  }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto& c : counts_) sum += c.load(std::memory_order_relaxed);
    return sum;
  }

  // Optional budget cap: backends check it before issuing a call so the
  // total can never pass the cap. Failed attempts do not count against it.
  void set_budget_cap(std::uint64_t cap) {
    cap_.store(cap, std::memory_order_relaxed);
  }

  std::uint64_t budget_cap() const { return cap_.load(std::memory_order_relaxed); }

  bool capped() const { return budget_cap() != UINT64_MAX; }

  // Calls still allowed under the cap (UINT64_MAX when uncapped).
  std::uint64_t remaining_budget() const {
    const std::uint64_t cap = budget_cap();
    if (cap == UINT64_MAX) return UINT64_MAX;
    const std::uint64_t used = total();
    return cap > used ? cap - used : 0;
  }

  bool would_exceed_budget(std::uint64_t upcoming = 1) const {
    return total() + upcoming > cap_.load(std::memory_order_relaxed);
  }

  // Component-wise sum; associative and commutative, zero ledger is identity.
  void merge(const QueryLedger& other) {
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      counts_[i].fetch_add(other.counts_[i].load(std::memory_order_relaxed),
                           std::memory_order_relaxed);
    }
    failed_.fetch_add(other.failed_.load(std::memory_order_relaxed),
                      std::memory_order_relaxed);
  }

  bool operator==(const QueryLedger& other) const {
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i].load(std::memory_order_relaxed) !=
          other.counts_[i].load(std::memory_order_relaxed)) {
        return false;
      }
    }
    return failed_calls() == other.failed_calls();
  }

 private:
  static std::size_t index(QueryRole role) {
    return static_cast<std::size_t>(role);
  }

  void copy_from(const QueryLedger& other) {
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      counts_[i].store(other.counts_[i].load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
    }
    failed_.store(other.failed_.load(std::memory_order_relaxed),
                  std::memory_order_relaxed);
    cap_.store(other.cap_.load(std::memory_order_relaxed),
               std::memory_order_relaxed);
  }

  std::array<std::atomic<std::uint64_t>, 4> counts_{};
  std::atomic<std::uint64_t> failed_{0};
  std::atomic<std::uint64_t> cap_{UINT64_MAX};
};

}  // namespace redeval
