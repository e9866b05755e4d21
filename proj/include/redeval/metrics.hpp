#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace redeval {

// ASR = 100 * (count of 1s) / length; Validation on an empty list.
double compute_asr(const std::vector<int>& verdicts);

struct AggregatedAsr {
  double mean_all = 0.0;
  std::optional<double> mean_gpt_subset;
};

// Arithmetic means over per-judger ASR percentages; subset names must all be
// present in the map. Values are full precision; rounding happens at the
// reporting boundary.
AggregatedAsr aggregate_judgers(const std::map<std::string, double>& per_judger_asr,
                                const std::vector<std::string>& gpt_subset);

// Half-up rounding to one decimal, applied only when reporting.
double round_percent_1dp(double percent);
std::string format_percent_1dp(double percent);

struct MetricsSummary {
  std::map<std::string, double> per_judger_asr;  // percent, full precision
  double mean_asr_all = 0.0;
  std::optional<double> mean_asr_gpt_subset;
  std::vector<std::string> gpt_subset_names;
  double refusal_rate = 0.0;  // percent
  std::size_t evaluated_samples = 0;
  std::size_t failed_samples = 0;  // excluded from ASR denominators
  std::map<std::string, std::uint64_t> queries_by_role;
  std::uint64_t total_queries = 0;
  std::uint64_t failed_calls = 0;
  double mean_queries_per_sample = 0.0;
};

}  // namespace redeval
