// Two clocks 40 ppm apart, five-packet bursts every 200 s, MLE over a
// two-page window. Prints the estimate, the truth and the bound.

#include <cstdio>

#include "skewsync/skewsync.hpp"

using namespace skewsync;

int main() {
  SimClock::Params ps;
  ps.skew_ppb = 12'000;
  SimClock sender(ps);
  SimClock::Params pr;
  pr.skew_ppb = -28'000;
  pr.theta0_ns = 421'337;
  SimClock receiver(pr);

  const DelayModel delay = delay_preset("single-task");
  Rng rng = make_rng(7, "quickstart");
  MlePipeline pipe(2, 200 * kNsPerSecond);

  for (int k = 0; k < 6; ++k) {
    const TrueTime t{kNsPerSecond + k * 200 * kNsPerSecond};
    auto est = pipe.on_batch(run_batch(sender, receiver, 5, kDefaultIntraGapNs, delay, t, rng));
    if (!est) continue;
    std::printf("round %d  phi_hat %.3f ppb  truth %.3f ppb  n_used %zu\n", k, est->phi_hat_ppb,
                true_relative_skew(receiver, sender), est->n_used);
  }
  std::printf("CRLB std at tau=200 s, N=5: %.4f ppb\n", crlb_skew_std_ppb(72.0, 5, 200e9));
}
