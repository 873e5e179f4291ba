#pragma once

/**
 * Evaluation report: method x metric table with confidence intervals and
 * deltas against the best static strategy. Deltas are always recomputed
 * from the stored means at serialization time, so they match the column
 * differences exactly.
 */

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "declab/env.hpp"

namespace declab::harness {

struct MetricStat {
  double mean = 0.0;
  double ci_half_width = 0.0;
  int episodes = 0;
};

struct MethodRow {
  std::string method;
  std::map<int, MetricStat> by_metric;  // key: the k of Pass@k
};

struct RunReport {
  std::vector<int> metric_ks;
  /// Row order: best-static, mixed-static, then adapter rows.
  std::vector<MethodRow> methods;
  /// Per-action static results backing the best-static row.
  std::vector<MethodRow> static_details;

  const MethodRow* find(const std::string& method) const;

  /// JSON document with the resolved config embedded under "config".
  std::string to_json(const std::string& config_json, std::uint64_t seed) const;
  /// CSV: method,metric,mean,ci_half_width,episodes,delta_abs,delta_rel.
  std::string to_csv(const std::string& config_json, std::uint64_t seed) const;
};

}  // namespace declab::harness
