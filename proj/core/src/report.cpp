#include "declab/report.hpp"

#include <sstream>

#include <json.hpp>

#include "declab/format.hpp"

namespace declab::harness {

using nlohmann::json;

const MethodRow* RunReport::find(const std::string& method) const {
  for (const auto& row : methods) {
    if (row.method == method) return &row;
  }
  return nullptr;
}

namespace {

json stat_to_json(const MetricStat& stat) {
  return json{{"mean", stat.mean},
              {"ci_half_width", stat.ci_half_width},
              {"episodes", stat.episodes}};
}

json row_to_json(const MethodRow& row, const MethodRow* best) {
  json j;
  j["method"] = row.method;
  json metrics = json::object();
  for (const auto& [k, stat] : row.by_metric) {
    json m = stat_to_json(stat);
    if (best && best != &row) {
      auto it = best->by_metric.find(k);
      if (it != best->by_metric.end()) {
        const double delta = stat.mean - it->second.mean;
        m["delta_abs"] = delta;
        if (it->second.mean != 0.0) {
          m["delta_rel"] = delta / it->second.mean;
        }
      }
    }
    metrics["pass@" + std::to_string(k)] = std::move(m);
  }
  j["metrics"] = std::move(metrics);
  return j;
}

}  // namespace

std::string RunReport::to_json(const std::string& config_json,
                               std::uint64_t seed) const {
  const MethodRow* best = find("best-static");
  json j;
  j["config"] = json::parse(config_json);
  j["seed"] = seed;
  json rows = json::array();
  for (const auto& row : methods) rows.push_back(row_to_json(row, best));
  j["methods"] = std::move(rows);
  json details = json::array();
  for (const auto& row : static_details) {
    details.push_back(row_to_json(row, nullptr));
  }
  j["static_details"] = std::move(details);
  return j.dump(2);
}

std::string RunReport::to_csv(const std::string& config_json,
                              std::uint64_t seed) const {
  const MethodRow* best = find("best-static");
  std::ostringstream out;
  json config = json::parse(config_json);
  out << "# config: " << config.dump() << '\n';
  out << "# seed: " << seed << '\n';
  out << "method,metric,mean,ci_half_width,episodes,delta_abs,delta_rel\n";
  for (const auto& row : methods) {
    for (const auto& [k, stat] : row.by_metric) {
      out << row.method << ",pass@" << k << ',' << format_double(stat.mean)
          << ',' << format_double(stat.ci_half_width) << ',' << stat.episodes;
      if (best && best != &row) {
        auto it = best->by_metric.find(k);
        if (it != best->by_metric.end()) {
          const double delta = stat.mean - it->second.mean;
          out << ',' << format_double(delta) << ',';
          if (it->second.mean != 0.0) {
            out << format_double(delta / it->second.mean);
          }
          out << '\n';
          continue;
        }
      }
      out << ",,\n";
    }
  }
  return out.str();
}

}  // namespace declab::harness
