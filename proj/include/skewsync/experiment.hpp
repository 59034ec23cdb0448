#pragma once

// Experiment families and their dispatch onto the simulator.

#include <string>
#include <string_view>
#include <vector>

#include "skewsync/config.hpp"
#include "skewsync/errors.hpp"
#include "skewsync/report.hpp"
#include "skewsync/simnet.hpp"

namespace skewsync {

namespace detail {

inline std::string tag(std::string_view key, const std::string& v) {
  return "[" + std::string(key) + "=" + v + "]";
}

}  // namespace detail

// Every estimator at every T_b of sweep.t_b_s.
inline RunReport run_period_sweep(const SimConfig& c) {
  std::vector<StarJob> jobs;
  for (double t_b : c.sweep_t_b_s) {
    for (auto kind : c.estimators) {
      const std::string name(to_string(kind));
      EstimatorSpec s = c.spec(name);
      s.t_b_s = t_b;
      jobs.push_back({name + detail::tag("t_b_s", detail::fmt_double(t_b)), kind, s, c.granule_ns});
    }
  }
  return make_report(c, run_star_jobs(c, jobs));
}

// Every estimator at every clock granule of sweep.granule_ns.
inline RunReport run_granularity_sweep(const SimConfig& c) {
  std::vector<StarJob> jobs;
  for (auto g : c.sweep_granule_ns) {
    for (auto kind : c.estimators) {
      const std::string name(to_string(kind));
      jobs.push_back({name + detail::tag("granule_ns", std::to_string(g)), kind, c.spec(name), g});
    }
  }
  return make_report(c, run_star_jobs(c, jobs));
}

inline RunReport run_experiment(std::string_view name, SimConfig c, bool paper_scale = false) {
  if (!is_experiment(name))
    throw ConfigError("unknown experiment '" + std::string(name) +
                      "' (expected compare|period-sweep|unc-inject|granularity-sweep|flood)");
  c.experiment = std::string(name);
  if (paper_scale) c.duration_s = c.paper_duration_s;
  c.validate();
  if (name == "compare") return run_star(c);
  if (name == "period-sweep") return run_period_sweep(c);
  if (name == "unc-inject") {
    if (c.inject_round < 0) throw ConfigError("unc-inject needs inject.round >= 0");
    return inject_uncertain(c, c.inject_round, c.inject_magnitude_ns);
  }
  if (name == "granularity-sweep") return run_granularity_sweep(c);
  return run_flood(c);
}

}  // namespace skewsync
