#pragma once

// One-way timestamping delay: a Gaussian variable part (fixed mean plus
// jitter) and a rare, strictly positive uncertain part caused by blocked or
// nested interrupt service.
//
// The uncertain magnitude is drawn Uniform(lo, hi). Only the maxima and
// histogram shapes of the measured uncertain delays are known, so the
// uniform law is a stand-in; lo defaults to 200 us and hi to 909 us.

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skewsync/errors.hpp"
#include "skewsync/rng.hpp"

namespace skewsync {

struct DelayModel {
  double d_fixed_ns = 3'300.0;
  double sigma_ns = 72.0;
  double p_unc = 0.0;
  double unc_lo_ns = 200'000.0;
  double unc_hi_ns = 909'000.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_ns >= 0)) throw ConfigError("delay sigma must be >= 0");
    if (!(p_unc >= 0 && p_unc <= 1)) throw ConfigError("uncertain-delay probability must be in [0, 1]");
    if (!(unc_lo_ns <= unc_hi_ns)) throw ConfigError("uncertain-delay range needs lo <= hi");
    if (!(unc_lo_ns >= 0)) throw ConfigError("uncertain-delay magnitude must be >= 0");
    if (!(d_fixed_ns >= 0)) throw ConfigError("fixed delay must be >= 0");
  }
};

struct DelaySample {
  double total = 0.0;
  double variable = 0.0;
  double uncertain = 0.0;
};

// Every call consumes the same number of uniform draws for the uncertain
// part whether or not it fires, so two models that differ only in p_unc or
// range stay aligned on one random stream.
inline DelaySample sample_delay(const DelayModel& m, Rng& rng) {
  DelaySample s;
  if (m.sigma_ns == 0.0) {
    s.variable = m.d_fixed_ns;
  } else {
    std::normal_distribution<double> normal(m.d_fixed_ns, m.sigma_ns);
    do {
      s.variable = normal(rng);
    } while (s.variable < 0.0);
  }
  const double hit = uniform01(rng);
  const double mag = uniform01(rng);
  if (hit < m.p_unc) s.uncertain = m.unc_lo_ns + mag * (m.unc_hi_ns - m.unc_lo_ns);
  s.total = s.variable + s.uncertain;
  return s;
}

struct VariableStats {
  double mean_ns = 0.0;
  double std_ns = 0.0;
};

// Sample mean and unbiased std of the variable components; the mean is the
// usual estimate of the fixed delay.
inline VariableStats fit_variable_stats(std::span<const DelaySample> samples) {
  if (samples.size() < 2) throw InsufficientData("fit_variable_stats needs at least 2 samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += s.variable;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (const auto& s : samples) ss += (s.variable - mean) * (s.variable - mean);
  return {mean, std::sqrt(ss / static_cast<double>(samples.size() - 1))};
}

inline constexpr std::string_view kDelayPresetNames[] = {"equal", "lowest", "highest", "single-task"};

// Delay models measured under the four interrupt-priority setups.
inline DelayModel delay_preset(std::string_view name) {
  DelayModel m;
  if (name == "single-task") {
    m.d_fixed_ns = 3'300.0;
    m.sigma_ns = 72.0;
    m.p_unc = 0.0;
  } else if (name == "equal") {
    m.d_fixed_ns = 3'317.0;
    m.sigma_ns = 67.1;
    m.p_unc = 0.1368;
  } else if (name == "lowest") {
    m.d_fixed_ns = 3'325.0;
    m.sigma_ns = 66.7;
    m.p_unc = 0.0768;
    m.unc_hi_ns = 732'000.0;  // largest uncertain delay seen under this setup
  } else if (name == "highest") {
    m.d_fixed_ns = 3'311.0;
    m.sigma_ns = 70.4;
    m.p_unc = 0.0067;
  } else {
    throw ConfigError("unknown delay preset '" + std::string(name) +
                      "' (expected equal|lowest|highest|single-task)");
  }
  return m;
}

}  // namespace skewsync
