#include "resonance/windows.hpp"

#include <cmath>

namespace resonance {

WindowSpec make_window(double m0, double delta, double epsilon, double domain_lo,
                       double domain_hi) {
    if (!(domain_lo < domain_hi)) throw config_error("domain is empty");
    if (!(delta > 0.0)) throw config_error("delta must be positive");
    if (!(delta < epsilon)) throw config_error("delta < epsilon violated");
    const double tol = 1e-12 * (domain_hi - domain_lo);
    if (m0 - epsilon < domain_lo - tol || m0 + epsilon > domain_hi + tol)
        throw config_error("window exceeds domain");
    WindowSpec w;
    w.m0 = m0;
    w.delta = delta;
    w.epsilon = epsilon;
    w.domain_lo = domain_lo;
    w.domain_hi = domain_hi;
    return w;
}

ScanPlan plan_scan(double domain_lo, double domain_hi, double delta, double epsilon,
                   double step, double scan_lo, double scan_hi) {
    if (!(step > 0.0)) throw config_error("scan step must be positive");
    if (scan_lo == 0.0 && scan_hi == 0.0) {
        scan_lo = domain_lo;
        scan_hi = domain_hi;
    }
    if (scan_lo < domain_lo || scan_hi > domain_hi || !(scan_lo < scan_hi))
        throw config_error("scan range must lie inside the domain");

    ScanPlan plan;
    plan.step = step;
    const double tol = 1e-9 * (domain_hi - domain_lo);
    const double first = scan_lo + epsilon;
    for (int k = 0;; ++k) {
        const double m0 = first + k * step;
        if (m0 + epsilon > scan_hi + tol) break;
        plan.windows.push_back(make_window(m0, delta, epsilon, domain_lo, domain_hi));
    }
    if (plan.windows.empty()) throw config_error("no window fits the scan range");
    const double span = plan.windows.back().m0 - plan.windows.front().m0;
    plan.n_independent = std::max(1, static_cast<int>(std::floor(span / (2.0 * delta) + tol)));
    return plan;
}

}  // namespace resonance
