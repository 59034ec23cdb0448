#pragma once

// Summary statistics over error series. Every statistic is taken over the
// absolute values, since the series hold signed errors and the interesting
// quantity is the error magnitude.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "skewsync/errors.hpp"

namespace skewsync {

struct SeriesPoint {
  std::int64_t index = 0;
  double sim_time_s = 0.0;
  double value = 0.0;

  bool operator==(const SeriesPoint&) const = default;
};

struct Series {
  int node_id = 0;  // -1 for network-wide probe series
  std::string estimator;
  std::string kind;  // e.g. skew_error_ppb, global_error_ns
  std::vector<SeriesPoint> points;

  bool operator==(const Series&) const = default;
};

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // unbiased; 0 for a single value
  double max = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;

  bool operator==(const Moments&) const = default;
};

struct SummaryRow {
  std::string estimator;
  std::string kind;
  int node_id = 0;  // -1: pooled across nodes
  Moments m;

  bool operator==(const SummaryRow&) const = default;
};

struct BucketRow {
  std::string estimator;
  std::string kind;
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  Moments m;

  bool operator==(const BucketRow&) const = default;
};

// Pooled mean |error| of each estimator divided by the MLE's, within one
// parameter group (the bracketed suffix of the estimator label, if any).
struct RatioRow {
  std::string group;
  std::string kind;
  std::vector<std::pair<std::string, double>> ratios;

  bool operator==(const RatioRow&) const = default;
};

struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<BucketRow> buckets;
  std::vector<RatioRow> ratios;

  bool operator==(const Summary&) const = default;
};

// Linear interpolation between closest ranks, q in [0, 1]; sorted input.
inline double percentile_sorted(std::span<const double> s, double q) {
  if (s.empty()) throw InsufficientData("percentile of an empty sample");
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline Moments moments(std::span<const double> values) {
  if (values.empty()) throw InsufficientData("statistics of an empty series");
  Moments m;
  m.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(m.count);
  if (m.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(m.count - 1));
  }
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  m.max = s.back();
  m.p50 = percentile_sorted(s, 0.50);
  m.p95 = percentile_sorted(s, 0.95);
  m.p99 = percentile_sorted(s, 0.99);
  return m;
}

inline std::vector<double> abs_values(const Series& s) {
  std::vector<double> v;
  v.reserve(s.points.size());
  for (const auto& p : s.points) v.push_back(std::abs(p.value));
  return v;
}

// "mle[t_b_s=50]" -> ("mle", "[t_b_s=50]")
inline std::pair<std::string, std::string> split_label(const std::string& label) {
  const auto b = label.find('[');
  if (b == std::string::npos) return {label, ""};
  return {label.substr(0, b), label.substr(b)};
}

inline Summary summarize(std::span<const Series> series, double bucket_s = 3600.0) {
  if (series.empty()) throw InsufficientData("nothing to summarize: report has no series");
  if (!(bucket_s > 0)) throw DomainError("bucket width must be positive");
  Summary out;

  using Key = std::pair<std::string, std::string>;  // estimator, kind
  std::map<Key, std::vector<double>> pooled;
  std::map<std::tuple<std::string, std::string, std::int64_t>, std::vector<double>> bucketed;
  std::vector<Key> order;

  for (const auto& s : series) {
    if (s.points.empty())
      throw InsufficientData("series '" + s.estimator + "/" + s.kind + "' for node " +
                             std::to_string(s.node_id) + " is empty");
    const auto v = abs_values(s);
    // network-wide series (node -1) are covered by the pooled row below
    if (s.node_id != -1) out.rows.push_back({s.estimator, s.kind, s.node_id, moments(v)});
    Key k{s.estimator, s.kind};
    auto& pool = pooled[k];
    if (pool.empty()) order.push_back(k);
    pool.insert(pool.end(), v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto b = static_cast<std::int64_t>(std::floor(s.points[i].sim_time_s / bucket_s));
      bucketed[{s.estimator, s.kind, b}].push_back(v[i]);
    }
  }

  for (const auto& k : order) out.rows.push_back({k.first, k.second, -1, moments(pooled[k])});
  for (const auto& [k, v] : bucketed) {
    const auto& [est, kind, b] = k;
    out.buckets.push_back({est, kind, static_cast<double>(b) * bucket_s,
                           static_cast<double>(b + 1) * bucket_s, moments(v)});
  }

  // ratio rows: one per (group, kind) that has an MLE series
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::string, double>>> groups;
  for (const auto& k : order) {
    const auto [base, group] = split_label(k.first);
    groups[{group, k.second}].emplace_back(base, moments(pooled[k]).mean);
  }
  for (const auto& [gk, members] : groups) {
    const auto mle = std::find_if(members.begin(), members.end(), [](const auto& m) { return m.first == "mle"; });
    if (mle == members.end() || members.size() < 2 || mle->second == 0.0) continue;
    RatioRow r{gk.first, gk.second, {}};
    for (const auto& [name, mean] : members) r.ratios.emplace_back(name, mean / mle->second);
    out.ratios.push_back(std::move(r));
  }
  return out;
}

}  // namespace skewsync
