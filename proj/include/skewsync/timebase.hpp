#pragma once

// Hardware and logical clocks driven by an integer-nanosecond true-time axis.
//
// A hardware clock integrates its rate 1 + skew(t) from the epoch, adds its
// initial offset and floors the result to its granule. The skew is held
// piecewise constant between advance_drift() calls and the integral is kept
// exactly in 128-bit fixed point (1e-12 ns per unit), so multi-hour runs do
// not accumulate floating error.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "skewsync/errors.hpp"
#include "skewsync/rng.hpp"

namespace skewsync {

inline constexpr std::int64_t kNsPerSecond = 1'000'000'000;
inline constexpr double kDefaultSkewBoundPpb = 50'000.0;

struct TrueTime {
  std::int64_t ns = 0;

  constexpr auto operator<=>(const TrueTime&) const = default;

  static constexpr TrueTime from_seconds(double s) {
    return TrueTime{static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5))};
  }
  constexpr double seconds() const { return static_cast<double>(ns) / 1e9; }
};

constexpr TrueTime operator+(TrueTime t, std::int64_t dt_ns) { return TrueTime{t.ns + dt_ns}; }
constexpr std::int64_t operator-(TrueTime a, TrueTime b) { return a.ns - b.ns; }

enum class DriftKind { constant, random_walk, linear_ramp };

inline std::string_view to_string(DriftKind k) {
  switch (k) {
    case DriftKind::constant: return "constant";
    case DriftKind::random_walk: return "random-walk";
    case DriftKind::linear_ramp: return "linear-ramp";
  }
  return "constant";
}

inline DriftKind parse_drift_kind(std::string_view s) {
  if (s == "constant") return DriftKind::constant;
  if (s == "random-walk") return DriftKind::random_walk;
  if (s == "linear-ramp") return DriftKind::linear_ramp;
  throw ConfigError("unknown drift kind '" + std::string(s) + "'");
}

struct DriftProcess {
  DriftKind kind = DriftKind::constant;
  // random-walk: std of the increment per sqrt(second); linear-ramp: ppb per second.
  double step_ppb = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

using i128 = __int128;

inline constexpr std::int64_t kFpPerNs = 1'000'000'000'000;  // 1e-12 ns units
inline constexpr std::int64_t kSkewFpPerPpb = 1'000;          // 1e-12 rate units

constexpr i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t skew_to_fp(double ppb) {
  return static_cast<std::int64_t>(std::llround(ppb * kSkewFpPerPpb));
}

}  // namespace detail

class SimClock {
 public:
  struct Params {
    double nominal_hz = 32e6;
    double skew_ppb = 0.0;
    DriftProcess drift{};
    std::int64_t theta0_ns = 0;
    std::int64_t granule_ns = 1;
    double skew_bound_ppb = kDefaultSkewBoundPpb;
  };

  SimClock() : SimClock(Params{}) {}

  explicit SimClock(const Params& p)
      : nominal_hz_(p.nominal_hz),
        drift_(p.drift),
        theta0_ns_(p.theta0_ns),
        granule_ns_(p.granule_ns),
        skew_bound_ppb_(p.skew_bound_ppb) {
    if (p.granule_ns <= 0) throw DomainError("clock granule must be positive");
    if (!(p.nominal_hz > 0)) throw DomainError("nominal frequency must be positive");
    if (!(p.skew_bound_ppb >= 0)) throw DomainError("skew bound must be non-negative");
    if (std::abs(p.skew_ppb) > p.skew_bound_ppb)
      throw DomainError("initial skew exceeds the configured bound");
    segments_.push_back(Segment{0, 0, detail::skew_to_fp(p.skew_ppb)});
  }

  double nominal_hz() const { return nominal_hz_; }
  std::int64_t granule_ns() const { return granule_ns_; }
  std::int64_t theta0_ns() const { return theta0_ns_; }
  double skew_bound_ppb() const { return skew_bound_ppb_; }
  const DriftProcess& drift() const { return drift_; }
  double phi() const { return phi_; }
  long double theta_logical() const { return theta_logical_; }

  // Skew in effect after the latest advance_drift() call.
  double skew_ppb() const {
    return static_cast<double>(segments_.back().skew_fp) / detail::kSkewFpPerPpb;
  }

  double skew_ppb_at(TrueTime t) const {
    return static_cast<double>(segment_for(t).skew_fp) / detail::kSkewFpPerPpb;
  }

  // theta0 + integral of the rate, in 1e-12 ns units.
  detail::i128 raw_fixed(TrueTime t) const {
    if (t.ns < 0) throw DomainError("true time before the simulation epoch");
    const Segment& s = segment_for(t);
    const detail::i128 rate = detail::kFpPerNs + s.skew_fp;
    return static_cast<detail::i128>(theta0_ns_) * detail::kFpPerNs + s.phase_fp +
           static_cast<detail::i128>(t.ns - s.start_ns) * rate;
  }

  long double raw_hardware(TrueTime t) const {
    const detail::i128 fp = raw_fixed(t);
    const detail::i128 whole = detail::floor_div(fp, detail::kFpPerNs);
    const detail::i128 frac = fp - whole * detail::kFpPerNs;
    return static_cast<long double>(whole) +
           static_cast<long double>(frac) / static_cast<long double>(detail::kFpPerNs);
  }

  std::int64_t read_hardware(TrueTime t) const {
    const detail::i128 g = static_cast<detail::i128>(granule_ns_) * detail::kFpPerNs;
    return static_cast<std::int64_t>(detail::floor_div(raw_fixed(t), g)) * granule_ns_;
  }

  // phi * raw + theta floored to the granule; identity compensation reads the
  // hardware clock.
  std::int64_t read_logical(TrueTime t) const {
    const long double v = static_cast<long double>(phi_) * raw_hardware(t) + theta_logical_;
    const auto whole = static_cast<std::int64_t>(std::floor(v));
    return static_cast<std::int64_t>(detail::floor_div(whole, granule_ns_)) * granule_ns_;
  }

  // Logical time without quantization; used when compensating offsets.
  long double logical_exact(TrueTime t) const {
    return static_cast<long double>(phi_) * raw_hardware(t) + theta_logical_;
  }

  void set_logical(double phi, long double theta_logical) {
    if (!(phi >= 0.0) || !std::isfinite(phi) || !std::isfinite(static_cast<double>(theta_logical)))
      throw DomainError("logical clock parameters must be finite with phi >= 0");
    phi_ = phi;
    theta_logical_ = theta_logical;
  }

  // Moves the drift cursor forward by dt_ns. The skew in effect before the
  // call covers [cursor, cursor + dt); the updated skew applies afterwards.
  void advance_drift(std::int64_t dt_ns, Rng& rng) {
    if (dt_ns <= 0) throw DomainError("advance_drift requires dt > 0");
    const Segment& last = segments_.back();
    const std::int64_t start = cursor_ns_ + dt_ns;
    const detail::i128 phase =
        last.phase_fp + static_cast<detail::i128>(start - last.start_ns) *
                            (detail::kFpPerNs + last.skew_fp);
    const double dt_s = static_cast<double>(dt_ns) / 1e9;
    double skew = skew_ppb();
    switch (drift_.kind) {
      case DriftKind::constant:
        break;
      case DriftKind::linear_ramp:
        skew += drift_.step_ppb * dt_s;
        break;
      case DriftKind::random_walk:
        skew += drift_.step_ppb * std::sqrt(dt_s) * standard_normal(rng);
        break;
    }
    skew = std::clamp(skew, -skew_bound_ppb_, skew_bound_ppb_);
    cursor_ns_ = start;
    if (drift_.kind == DriftKind::constant) return;
    segments_.push_back(Segment{start, phase, detail::skew_to_fp(skew)});
  }

  std::int64_t drift_cursor_ns() const { return cursor_ns_; }

 private:
  struct Segment {
    std::int64_t start_ns;
    detail::i128 phase_fp;  // integral of the rate from 0 to start_ns
    std::int64_t skew_fp;
  };

  const Segment& segment_for(TrueTime t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t.ns,
                               [](std::int64_t v, const Segment& s) { return v < s.start_ns; });
    return *std::prev(it);
  }

  double nominal_hz_;
  DriftProcess drift_;
  std::int64_t theta0_ns_;
  std::int64_t granule_ns_;
  double skew_bound_ppb_;
  double phi_ = 1.0;
  long double theta_logical_ = 0.0L;
  std::int64_t cursor_ns_ = 0;
  std::vector<Segment> segments_;
};

// Ground-truth relative skew of b with respect to a, (h_b / h_a - 1) in ppb.
inline double true_relative_skew_ppb(double skew_a_ppb, double skew_b_ppb) {
  const long double ha = 1.0L + static_cast<long double>(skew_a_ppb) * 1e-9L;
  const long double hb = 1.0L + static_cast<long double>(skew_b_ppb) * 1e-9L;
  return static_cast<double>((hb / ha - 1.0L) * 1e9L);
}

inline double true_relative_skew(const SimClock& a, const SimClock& b) {
  return true_relative_skew_ppb(a.skew_ppb(), b.skew_ppb());
}

inline double true_relative_skew(const SimClock& a, const SimClock& b, TrueTime t) {
  return true_relative_skew_ppb(a.skew_ppb_at(t), b.skew_ppb_at(t));
}

}  // namespace skewsync
