#pragma once

#include <vector>

#include "resonance/core.hpp"

namespace resonance {

// A sliding-window scan: overlapping windows plus the count of
// non-overlapping SRs used for the trials correction.
struct ScanPlan {
    std::vector<WindowSpec> windows;  // sorted by m0
    double step = 0.0;
    int n_independent = 1;
};

// Validated window construction. Throws config_error naming the violated
// constraint. Window edges may touch the domain boundary but not exceed it.
WindowSpec make_window(double m0, double delta, double epsilon, double domain_lo,
                       double domain_hi);

// Windows at m0 = scan_lo + epsilon + k*step while m0 + epsilon <= scan_hi.
// The scan range defaults to the full domain; a narrower range keeps every
// window away from sparse spectrum edges. n_independent =
// max(1, floor((last_m0 - first_m0) / (2*delta))).
ScanPlan plan_scan(double domain_lo, double domain_hi, double delta, double epsilon,
                   double step, double scan_lo = 0.0, double scan_hi = 0.0);

}  // namespace resonance
