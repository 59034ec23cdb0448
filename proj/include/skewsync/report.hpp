#pragma once

// RunReport and its CSV / JSON serializations. Numbers are written with
// std::to_chars (shortest round-trip form) so output never depends on the
// locale.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skewsync/errors.hpp"
#include "skewsync/stats.hpp"

namespace skewsync {

struct RunReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string config_echo;
  std::vector<Series> series;
  Summary summary;

  bool operator==(const RunReport&) const = default;

  const Series* find(std::string_view estimator, std::string_view kind, int node_id) const {
    for (const auto& s : series)
      if (s.estimator == estimator && s.kind == kind && s.node_id == node_id) return &s;
    return nullptr;
  }

  const SummaryRow* pooled(std::string_view estimator, std::string_view kind) const {
    for (const auto& r : summary.rows)
      if (r.estimator == estimator && r.kind == kind && r.node_id == -1) return &r;
    return nullptr;
  }
};

inline constexpr std::string_view kCsvHeader =
    "round_or_probe_index,sim_time_s,node_id,estimator,value_ppb_or_ns,series_kind";

namespace detail {

inline void put_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.append(buf, ptr);
}

inline void put_int(std::string& out, std::int64_t v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.append(buf, ptr);
}

inline void require_nonempty(const RunReport& r) {
  if (r.series.empty()) throw InsufficientData("report has no series");
  for (const auto& s : r.series)
    if (s.points.empty())
      throw InsufficientData("series '" + s.estimator + "/" + s.kind + "' is empty");
}

}  // namespace detail

inline std::string to_csv(const RunReport& r) {
  detail::require_nonempty(r);
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& s : r.series) {
    for (const auto& p : s.points) {
      detail::put_int(out, p.index);
      out += ',';
      detail::put_double(out, p.sim_time_s);
      out += ',';
      detail::put_int(out, s.node_id);
      out += ',';
      out += s.estimator;
      out += ',';
      detail::put_double(out, p.value);
      out += ',';
      out += s.kind;
      out += '\n';
    }
  }
  return out;
}

inline nlohmann::ordered_json moments_json(const Moments& m) {
  return {{"count", m.count}, {"mean", m.mean}, {"std", m.std}, {"max", m.max},
          {"p50", m.p50},     {"p95", m.p95},   {"p99", m.p99}};
}

inline Moments moments_from_json(const nlohmann::json& j) {
  Moments m;
  m.count = j.at("count").get<std::size_t>();
  m.mean = j.at("mean").get<double>();
  m.std = j.at("std").get<double>();
  m.max = j.at("max").get<double>();
  m.p50 = j.at("p50").get<double>();
  m.p95 = j.at("p95").get<double>();
  m.p99 = j.at("p99").get<double>();
  return m;
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
  detail::require_nonempty(r);
  nlohmann::ordered_json j;
  j["experiment"] = r.experiment;
  j["seed"] = r.seed;
  j["config"] = r.config_echo;
  // ordered_json stores members in a vector, so build children before attaching them
  auto series = nlohmann::ordered_json::array();
  for (const auto& s : r.series) {
    auto idx = nlohmann::ordered_json::array();
    auto t = nlohmann::ordered_json::array();
    auto v = nlohmann::ordered_json::array();
    for (const auto& p : s.points) {
      idx.push_back(p.index);
      t.push_back(p.sim_time_s);
      v.push_back(p.value);
    }
    nlohmann::ordered_json js;
    js["node_id"] = s.node_id;
    js["estimator"] = s.estimator;
    js["series_kind"] = s.kind;
    js["round_or_probe_index"] = std::move(idx);
    js["sim_time_s"] = std::move(t);
    js["value_ppb_or_ns"] = std::move(v);
    series.push_back(std::move(js));
  }
  j["series"] = std::move(series);

  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.summary.rows)
    rows.push_back({{"estimator", row.estimator},
                    {"series_kind", row.kind},
                    {"node_id", row.node_id},
                    {"abs", moments_json(row.m)}});
  auto buckets = nlohmann::ordered_json::array();
  for (const auto& b : r.summary.buckets)
    buckets.push_back({{"estimator", b.estimator},
                       {"series_kind", b.kind},
                       {"t_start_s", b.t_start_s},
                       {"t_end_s", b.t_end_s},
                       {"abs", moments_json(b.m)}});
  auto ratios = nlohmann::ordered_json::array();
  for (const auto& rr : r.summary.ratios) {
    auto list = nlohmann::ordered_json::array();
    for (const auto& [name, v] : rr.ratios) list.push_back({{"estimator", name}, {"ratio", v}});
    nlohmann::ordered_json jr;
    jr["group"] = rr.group;
    jr["series_kind"] = rr.kind;
    jr["mean_abs_over_mle"] = std::move(list);
    ratios.push_back(std::move(jr));
  }
  nlohmann::ordered_json sum;
  sum["rows"] = std::move(rows);
  sum["buckets"] = std::move(buckets);
  sum["ratios"] = std::move(ratios);
  j["summary"] = std::move(sum);
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_echo = j.at("config").get<std::string>();
    for (const auto& js : j.at("series")) {
      Series s;
      s.node_id = js.at("node_id").get<int>();
      s.estimator = js.at("estimator").get<std::string>();
      s.kind = js.at("series_kind").get<std::string>();
      const auto& idx = js.at("round_or_probe_index");
      const auto& t = js.at("sim_time_s");
      const auto& v = js.at("value_ppb_or_ns");
      if (idx.size() != t.size() || idx.size() != v.size())
        throw IoError("series arrays have different lengths");
      for (std::size_t i = 0; i < idx.size(); ++i)
        s.points.push_back({idx[i].get<std::int64_t>(), t[i].get<double>(), v[i].get<double>()});
      r.series.push_back(std::move(s));
    }
    const auto& sum = j.at("summary");
    for (const auto& row : sum.at("rows"))
      r.summary.rows.push_back({row.at("estimator").get<std::string>(), row.at("series_kind").get<std::string>(),
                                row.at("node_id").get<int>(), moments_from_json(row.at("abs"))});
    for (const auto& b : sum.at("buckets"))
      r.summary.buckets.push_back({b.at("estimator").get<std::string>(), b.at("series_kind").get<std::string>(),
                                   b.at("t_start_s").get<double>(), b.at("t_end_s").get<double>(),
                                   moments_from_json(b.at("abs"))});
    for (const auto& jr : sum.at("ratios")) {
      RatioRow rr{jr.at("group").get<std::string>(), jr.at("series_kind").get<std::string>(), {}};
      for (const auto& e : jr.at("mean_abs_over_mle"))
        rr.ratios.emplace_back(e.at("estimator").get<std::string>(), e.at("ratio").get<double>());
      r.summary.ratios.push_back(std::move(rr));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report JSON: ") + e.what());
  }
}

enum class OutputFormat { csv, json };

inline OutputFormat parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("unknown output format '" + std::string(s) + "' (expected csv|json)");
}

inline std::string render(const RunReport& r, OutputFormat f) {
  return f == OutputFormat::csv ? to_csv(r) : to_json(r).dump(2) + "\n";
}

// Renders fully before touching the filesystem, writes a sibling temp file
// and renames it over the target, so a failure never leaves partial output.
inline void emit(const RunReport& r, OutputFormat f, const std::filesystem::path& path) {
  const std::string text = render(r, f);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "': " + ec.message());
  }
}

inline RunReport load_json_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace skewsync
