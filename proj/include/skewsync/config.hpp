#pragma once

// Experiment configuration. The file format is flat `key = value` lines with
// optional `[section]` headers; keys before the first header apply to every
// experiment and a section named after the experiment overrides them. Other
// sections are ignored, so one file can hold several experiments.
//
// to_text() writes the fully resolved configuration, which parses back to the
// same SimConfig; the CLI echoes it into every report.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "skewsync/broadcast.hpp"
#include "skewsync/delay_model.hpp"
#include "skewsync/errors.hpp"
#include "skewsync/estimators.hpp"
#include "skewsync/skewpipe.hpp"
#include "skewsync/timebase.hpp"

namespace skewsync {

inline constexpr std::string_view kExperimentNames[] = {"compare", "period-sweep", "unc-inject",
                                                        "granularity-sweep", "flood"};

inline constexpr std::string_view kFloodVariants[] = {"mle-pulsesync", "pulsesync-baseline"};

inline bool is_experiment(std::string_view s) {
  return std::find(std::begin(kExperimentNames), std::end(kExperimentNames), s) !=
         std::end(kExperimentNames);
}

// Per-estimator (or per flood variant) cadence and window.
struct EstimatorSpec {
  double t_b_s = 30.0;
  std::size_t n_packets = 1;
  std::size_t window = 8;
};

enum class TopologyKind { star, line };

struct SimConfig {
  std::string experiment = "compare";
  TopologyKind topology = TopologyKind::star;
  std::size_t receivers = 25;
  std::size_t hops = 24;
  std::vector<EstimatorKind> estimators{EstimatorKind::mle, EstimatorKind::kf, EstimatorKind::lr,
                                        EstimatorKind::direct};
  std::map<std::string, EstimatorSpec> specs;

  std::string delay_preset = "single-task";
  DelayModel delay = skewsync::delay_preset("single-task");

  std::int64_t granule_ns = 32;
  double f_s_hz = 0.0;  // 0: derived from the granule
  double skew_bound_ppb = kDefaultSkewBoundPpb;
  DriftKind drift = DriftKind::constant;
  double drift_step_ppb = 0.0;
  double drift_interval_s = 1.0;

  double duration_s = 4 * 3600.0;
  double paper_duration_s = 13 * 3600.0;
  double warmup_s = 0.0;
  std::uint64_t seed = 1;
  double probe_interval_s = 10.0;
  std::int64_t intra_gap_ns = kDefaultIntraGapNs;
  bool gap_on_ticks = false;  // round intra_gap_ns to whole granules

  bool preprocessing = true;
  std::size_t min_preprocess_n = kMinPreprocessN;
  double kf_q_offset_ns2 = 100.0;
  double kf_q_skew_ppb2 = 25.0;
  double kf_sigma_prior_ns = 72.0;

  std::int64_t inject_round = -1;
  double inject_magnitude_ns = 200'000.0;

  std::vector<double> sweep_t_b_s{50, 100, 200, 350, 500};
  std::vector<std::int64_t> sweep_granule_ns{125, 500, 1'000, 5'000, 10'000, 32'000};

  std::vector<std::string> flood_variants{"mle-pulsesync", "pulsesync-baseline"};
  std::int64_t flood_fixed_delay_ns = 3'000;
  bool flood_compensate = true;

  double bucket_s = 3600.0;

  double nominal_hz() const { return f_s_hz > 0 ? f_s_hz : 1e9 / static_cast<double>(granule_ns); }

  const EstimatorSpec& spec(std::string_view name) const {
    auto it = specs.find(std::string(name));
    if (it == specs.end()) throw ConfigError("no settings for estimator '" + std::string(name) + "'");
    return it->second;
  }

  void validate() const;
  std::string to_text() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("invalid value '" + std::string(v) + "' for key '" + std::string(key) + "'");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for key '" + std::string(key) + "'");
}

// Shortest round-trip representation; locale independent.
inline std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += f(v[i]);
  }
  return s;
}

struct KeyHandler {
  std::string key;
  std::function<void(SimConfig&, std::string_view)> set;
  std::function<std::string(const SimConfig&)> get;
  bool echo = true;
};

inline const std::vector<std::string>& spec_names() {
  static const std::vector<std::string> names{"mle", "lr", "direct", "kf", "mle-pulsesync",
                                              "pulsesync-baseline"};
  return names;
}

inline std::vector<KeyHandler> make_key_table() {
  std::vector<KeyHandler> t;
  auto num = [&t](std::string key, auto member) {
    using M = std::remove_reference_t<decltype(std::declval<SimConfig&>().*member)>;
    t.push_back({key,
                 [key, member](SimConfig& c, std::string_view v) { c.*member = parse_number<M>(key, v); },
                 [member](const SimConfig& c) {
                   if constexpr (std::is_floating_point_v<M>)
                     return fmt_double(c.*member);
                   else
                     return std::to_string(c.*member);
                 }});
  };
  auto delay_num = [&t](std::string key, double DelayModel::*member) {
    t.push_back({key,
                 [key, member](SimConfig& c, std::string_view v) {
                   c.delay.*member = parse_number<double>(key, v);
                   c.delay_preset = "custom";
                 },
                 [member](const SimConfig& c) { return fmt_double(c.delay.*member); }});
  };

  t.push_back({"topology",
               [](SimConfig& c, std::string_view v) {
                 if (v == "star")
                   c.topology = TopologyKind::star;
                 else if (v == "line")
                   c.topology = TopologyKind::line;
                 else
                   throw ConfigError("unknown topology '" + std::string(v) + "' (expected star|line)");
               },
               [](const SimConfig& c) { return std::string(c.topology == TopologyKind::star ? "star" : "line"); }});
  num("receivers", &SimConfig::receivers);
  num("hops", &SimConfig::hops);
  t.push_back({"estimators",
               [](SimConfig& c, std::string_view v) {
                 c.estimators.clear();
                 for (const auto& s : split_list(v)) c.estimators.push_back(parse_estimator(s));
               },
               [](const SimConfig& c) {
                 return join<EstimatorKind>(c.estimators, [](const EstimatorKind& k) { return std::string(to_string(k)); });
               }});
  t.push_back({"delay",
               [](SimConfig& c, std::string_view v) {
                 const std::uint64_t seed = c.delay.seed;
                 c.delay = delay_preset(v);
                 c.delay.seed = seed;
                 c.delay_preset = std::string(v);
               },
               [](const SimConfig& c) { return c.delay_preset; }});
  delay_num("delay.d_fixed_ns", &DelayModel::d_fixed_ns);
  delay_num("delay.sigma_ns", &DelayModel::sigma_ns);
  delay_num("delay.p_unc", &DelayModel::p_unc);
  delay_num("delay.unc_lo_ns", &DelayModel::unc_lo_ns);
  delay_num("delay.unc_hi_ns", &DelayModel::unc_hi_ns);
  num("granule_ns", &SimConfig::granule_ns);
  num("f_s_hz", &SimConfig::f_s_hz);
  num("skew_bound_ppb", &SimConfig::skew_bound_ppb);
  t.push_back({"drift", [](SimConfig& c, std::string_view v) { c.drift = parse_drift_kind(v); },
               [](const SimConfig& c) { return std::string(to_string(c.drift)); }});
  num("drift.step_ppb", &SimConfig::drift_step_ppb);
  num("drift.interval_s", &SimConfig::drift_interval_s);
  num("duration_s", &SimConfig::duration_s);
  num("paper_duration_s", &SimConfig::paper_duration_s);
  num("warmup_s", &SimConfig::warmup_s);
  num("seed", &SimConfig::seed);
  num("probe_interval_s", &SimConfig::probe_interval_s);
  num("intra_gap_ns", &SimConfig::intra_gap_ns);
  t.push_back({"gap_on_ticks", [](SimConfig& c, std::string_view v) { c.gap_on_ticks = parse_bool("gap_on_ticks", v); },
               [](const SimConfig& c) { return std::string(c.gap_on_ticks ? "true" : "false"); }});
  t.push_back({"preprocessing", [](SimConfig& c, std::string_view v) { c.preprocessing = parse_bool("preprocessing", v); },
               [](const SimConfig& c) { return std::string(c.preprocessing ? "true" : "false"); }});
  num("min_preprocess_n", &SimConfig::min_preprocess_n);
  num("kf.q_offset_ns2", &SimConfig::kf_q_offset_ns2);
  num("kf.q_skew_ppb2", &SimConfig::kf_q_skew_ppb2);
  num("kf.sigma_prior_ns", &SimConfig::kf_sigma_prior_ns);
  num("inject.round", &SimConfig::inject_round);
  num("inject.magnitude_ns", &SimConfig::inject_magnitude_ns);
  t.push_back({"sweep.t_b_s",
               [](SimConfig& c, std::string_view v) {
                 c.sweep_t_b_s.clear();
                 for (const auto& s : split_list(v)) c.sweep_t_b_s.push_back(parse_number<double>("sweep.t_b_s", s));
               },
               [](const SimConfig& c) { return join<double>(c.sweep_t_b_s, [](const double& d) { return fmt_double(d); }); }});
  t.push_back({"sweep.granule_ns",
               [](SimConfig& c, std::string_view v) {
                 c.sweep_granule_ns.clear();
                 for (const auto& s : split_list(v))
                   c.sweep_granule_ns.push_back(parse_number<std::int64_t>("sweep.granule_ns", s));
               },
               [](const SimConfig& c) {
                 return join<std::int64_t>(c.sweep_granule_ns, [](const std::int64_t& g) { return std::to_string(g); });
               }});
  t.push_back({"flood.variants",
               [](SimConfig& c, std::string_view v) {
                 c.flood_variants = split_list(v);
                 for (const auto& s : c.flood_variants)
                   if (std::find(std::begin(kFloodVariants), std::end(kFloodVariants), s) == std::end(kFloodVariants))
                     throw ConfigError("unknown flood estimator '" + s + "' (expected mle-pulsesync|pulsesync-baseline)");
               },
               [](const SimConfig& c) { return join<std::string>(c.flood_variants, [](const std::string& s) { return s; }); }});
  num("flood.fixed_delay_ns", &SimConfig::flood_fixed_delay_ns);
  t.push_back({"flood.compensate", [](SimConfig& c, std::string_view v) { c.flood_compensate = parse_bool("flood.compensate", v); },
               [](const SimConfig& c) { return std::string(c.flood_compensate ? "true" : "false"); }});
  num("bucket_s", &SimConfig::bucket_s);

  // shorthands that set every estimator at once; the echo lists the result per estimator
  t.push_back({"t_b",
               [](SimConfig& c, std::string_view v) {
                 for (auto& [n, sp] : c.specs) sp.t_b_s = parse_number<double>("t_b", v);
               },
               {}, false});
  t.push_back({"n_packets",
               [](SimConfig& c, std::string_view v) {
                 for (auto& [n, sp] : c.specs) sp.n_packets = parse_number<std::size_t>("n_packets", v);
               },
               {}, false});
  t.push_back({"w_max",
               [](SimConfig& c, std::string_view v) {
                 for (auto& [n, sp] : c.specs) sp.window = parse_number<std::size_t>("w_max", v);
               },
               {}, false});

  for (const auto& name : spec_names()) {
    t.push_back({name + ".t_b_s",
                 [name](SimConfig& c, std::string_view v) { c.specs[name].t_b_s = parse_number<double>(name + ".t_b_s", v); },
                 [name](const SimConfig& c) { return fmt_double(c.spec(name).t_b_s); }});
    t.push_back({name + ".n_packets",
                 [name](SimConfig& c, std::string_view v) {
                   c.specs[name].n_packets = parse_number<std::size_t>(name + ".n_packets", v);
                 },
                 [name](const SimConfig& c) { return std::to_string(c.spec(name).n_packets); }});
    t.push_back({name + ".window",
                 [name](SimConfig& c, std::string_view v) {
                   c.specs[name].window = parse_number<std::size_t>(name + ".window", v);
                 },
                 [name](const SimConfig& c) { return std::to_string(c.spec(name).window); }});
  }
  return t;
}

inline const std::vector<KeyHandler>& key_table() {
  static const std::vector<KeyHandler> t = make_key_table();
  return t;
}

}  // namespace detail

// Built-in settings for each experiment family; a config file only needs to
// name what it changes.
inline SimConfig default_config(std::string_view experiment) {
  if (!is_experiment(experiment))
    throw ConfigError("unknown experiment '" + std::string(experiment) +
                      "' (expected compare|period-sweep|unc-inject|granularity-sweep|flood)");
  SimConfig c;
  c.experiment = std::string(experiment);
  c.specs = {{"mle", {200.0, 5, 2}},
             {"lr", {30.0, 1, 8}},
             {"direct", {30.0, 1, 2}},
             {"kf", {30.0, 5, 8}},
             {"mle-pulsesync", {50.0, 5, 8}},
             {"pulsesync-baseline", {30.0, 1, 8}}};
  if (experiment == "period-sweep") {
    c.estimators = {EstimatorKind::mle};
  } else if (experiment == "unc-inject") {
    c.receivers = 1;
    c.duration_s = 2 * 3600.0;
    c.paper_duration_s = 4 * 3600.0;
    c.inject_round = 20;
  } else if (experiment == "granularity-sweep") {
    c.receivers = 4;
    c.duration_s = 6 * 3600.0;
    c.paper_duration_s = 6 * 3600.0;
    c.specs["mle"] = {30.0, 20, 8};
    c.specs["kf"] = {30.0, 20, 8};
  } else if (experiment == "flood") {
    c.topology = TopologyKind::line;
    c.warmup_s = 1'200.0;
    c.duration_s = 1'200.0 + 2 * 3600.0;
    c.paper_duration_s = 1'200.0 + 13 * 3600.0;
  }
  return c;
}

inline void apply_key(SimConfig& c, std::string_view key, std::string_view value) {
  for (const auto& h : detail::key_table()) {
    if (h.key == key) {
      h.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

// Parses config text for one experiment on top of default_config(experiment).
inline SimConfig parse_config(std::string_view text, std::string_view experiment) {
  SimConfig c = default_config(experiment);
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  int lineno = 0;
  std::vector<std::pair<std::string, std::string>> common, specific;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    std::string s = detail::trim(std::string_view(line).substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    auto kv = std::make_pair(detail::trim(std::string_view(s).substr(0, eq)),
                             detail::trim(std::string_view(s).substr(eq + 1)));
    if (section.empty())
      common.push_back(std::move(kv));
    else if (section == experiment)
      specific.push_back(std::move(kv));
  }
  // `delay` resets the model and the shorthands reset every estimator, so
  // they go before the keys that refine them.
  auto apply_all = [&c](const auto& kvs) {
    auto broad = [](const std::string& k) { return k == "delay" || k == "t_b" || k == "n_packets" || k == "w_max"; };
    for (const auto& [k, v] : kvs)
      if (broad(k)) apply_key(c, k, v);
    for (const auto& [k, v] : kvs)
      if (!broad(k)) apply_key(c, k, v);
  };
  apply_all(common);
  apply_all(specific);
  c.validate();
  return c;
}

inline SimConfig load_config(const std::string& path, std::string_view experiment) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), experiment);
}

inline std::string SimConfig::to_text() const {
  std::string out = "[" + experiment + "]\n";
  const bool custom = delay_preset == "custom";
  for (const auto& h : detail::key_table()) {
    if (!h.echo || (h.key.starts_with("delay.") && !custom)) continue;
    out += h.key + " = " + h.get(*this) + "\n";
  }
  return out;
}

inline void SimConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw ConfigError(std::string(what) + " must be positive");
  };
  delay.validate();
  if (granule_ns <= 0) throw ConfigError("granule_ns must be positive");
  if (!(f_s_hz >= 0)) throw ConfigError("f_s_hz must be >= 0 (0 derives it from the granule)");
  if (!(skew_bound_ppb >= 0)) throw ConfigError("skew_bound_ppb must be >= 0");
  positive(duration_s, "duration_s");
  positive(paper_duration_s, "paper_duration_s");
  positive(probe_interval_s, "probe_interval_s");
  positive(drift_interval_s, "drift_interval_s");
  positive(bucket_s, "bucket_s");
  if (!(warmup_s >= 0) || warmup_s >= duration_s) throw ConfigError("warmup_s must be in [0, duration_s)");
  if (intra_gap_ns <= 0) throw ConfigError("intra_gap_ns must be positive");
  if (topology == TopologyKind::star && receivers < 1) throw ConfigError("star topology needs at least 1 receiver");
  if (topology == TopologyKind::line && hops < 1) throw ConfigError("line topology needs at least 1 hop");
  if (estimators.empty()) throw ConfigError("no estimators selected");
  if (min_preprocess_n < kMinPreprocessN) throw ConfigError("min_preprocess_n must be >= 4");
  for (const auto& [name, s] : specs) {
    positive(s.t_b_s, (name + ".t_b_s").c_str());
    if (s.n_packets < 1) throw ConfigError(name + ".n_packets must be >= 1");
    if (s.window < 2) throw ConfigError(name + ".window must be >= 2");
    const bool filters = name == "mle" || name == "kf" || name == "mle-pulsesync";
    if (filters && preprocessing && s.n_packets < min_preprocess_n)
      throw ConfigError(name + ".n_packets must be >= " + std::to_string(min_preprocess_n) +
                        " while preprocessing is enabled");
  }
  for (double t : sweep_t_b_s) positive(t, "sweep.t_b_s entries");
  for (auto g : sweep_granule_ns)
    if (g <= 0) throw ConfigError("sweep.granule_ns entries must be positive");
  if (flood_variants.empty()) throw ConfigError("flood.variants is empty");
}

}  // namespace skewsync
