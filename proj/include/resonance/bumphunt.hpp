#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "resonance/core.hpp"
#include "resonance/score_table.hpp"
#include "resonance/windows.hpp"

namespace resonance {

// Smooth 4-parameter background fit to the m spectrum:
// f(u) = alpha0 * (1-u)^alpha1 * u^(alpha2 + alpha3 * ln u),  u = m / m_scale.
struct BackgroundFit {
    double alpha0 = 1.0, alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
    double m_scale = 1.0;  // divisor mapping m into (0,1)
    double range_lo = 0.0, range_hi = 0.0;
    double gap_lo = 0.0, gap_hi = -1.0;  // excluded SR interval (none if lo >= hi)

    std::array<double, 16> covariance{};  // (alpha0..alpha3) from the inverse Hessian
    bool covariance_ok = false;
    double chi2 = 0.0;  // Pearson over the fit bins
    int ndf = 0;
    double ks_stat = 0.0;
    double ks_p = 0.0;
    double nll = 0.0;
    bool converged = false;

    double density(double m) const;  // events per unit m
    // CDF over the fitted support (range minus the excluded gap), normalized to 1.
    double cdf(double m) const;

    bool has_gap() const { return gap_lo < gap_hi; }

    // dense tabulation supporting cdf(); built at fit time
    std::vector<double> cdf_knots, cdf_values;
};

struct FitBinning {
    enum class Mode { EqualWidth, EqualCount } mode = Mode::EqualWidth;
    int n_bins = 40;
    double lo = 0.0, hi = 0.0;           // 0,0 -> take the data range
    double gap_lo = 0.0, gap_hi = -1.0;  // SR interval to exclude from the fit
};

double suggested_m_scale(double m_max);

// Binned Poisson maximum-likelihood fit of the 4-parameter form on
// sideband m values. Nelder-Mead from 8 deterministic starts with
// log-parameterized alpha0; covariance from the numerical inverse Hessian.
// Precondition: at least 20 non-empty sideband bins.
BackgroundFit fit_background_shape(std::vector<double> m_values_sb, const FitBinning& binning,
                                   double m_scale);

// One-sample KS p-value of m values against the fit's normalized CDF,
// via the asymptotic Kolmogorov series in sqrt(n)*D.
double ks_pvalue(std::vector<double> m_values, const BackgroundFit& fit);

// λ = integral of the fit over the SR (adaptive quadrature, rel. tol 1e-8);
// σ_λ propagated from the covariance through the analytic parameter gradient.
std::pair<double, double> expected_sr_count(const BackgroundFit& fit, const WindowSpec& w);

// P(N >= n_obs | λ), exact Poisson tail.
double poisson_pvalue(long long n_obs, double lambda);

struct SelectResult {
    ScoreTable selected;  // rows with score strictly above the threshold
    double threshold = 0.0;
};

// Threshold at the (1-q) quantile of sideband scores; q in (0,1).
SelectResult select_by_quantile(const ScoreTable& scores, double q);

// One (window, quantile) cell of a scan.
struct BumpCell {
    int window_index = -1;
    double m0 = 0.0, delta = 0.0, epsilon = 0.0;
    double q = 0.0;
    double threshold = 0.0;
    long long n_sb_survivors = 0;
    long long n_obs = 0;
    double lambda = 0.0, sigma_lambda = 0.0;
    double p_local = 1.0;
    double z_local = 0.0;
    double p_conservative = 1.0;  // Poisson tail at lambda + sigma_lambda
    double ks_p = 0.0;
    bool fit_converged = false;
    bool valid = false;
    std::string message;
};

struct BumpHuntResult {
    std::vector<BumpCell> cells;  // windows x quantiles, window-major
    int n_windows = 0;
    int n_quantiles = 0;
    int n_independent = 1;
    double min_local_p = 1.0;
    int best_cell = -1;
    double global_p = 1.0;
    double global_p_mc = -1.0;  // <0 when MC calibration was not run
    int mc_replicas = 0;
};

struct BumpHuntOptions {
    std::vector<double> quantiles{0.1, 0.01, 0.001};
    double m_scale = 0.0;  // 0 -> 1.05 * max m in the dataset
    int max_fit_bins = 50;
    int mc_replicas = 0;
    int n_threads = 1;
    std::uint64_t seed = 1;
};

// Scores a dataset for one window; retrained per window in scan mode.
using ScorePipeline = std::function<ScoreTable(const Dataset&, const WindowSpec&)>;

// Full scan: per window and quantile, cut at the sideband quantile, fit the
// survivor spectrum on the sideband, interpolate λ into the SR and compute
// the local Poisson tail. Global p from the Bonferroni-style trials factor
// n_independent * |quantiles|; optional MC calibration re-runs the scan on
// x-permuted (label-free) replicas.
BumpHuntResult run_bumphunt(const Dataset& ds, const ScanPlan& plan,
                            const ScorePipeline& pipeline, const BumpHuntOptions& opts);

// Single-window hunt on precomputed scores (no retraining, no MC mode).
BumpHuntResult bump_from_scores(const ScoreTable& scores, const WindowSpec& w,
                                const BumpHuntOptions& opts);

// Post-cut SR excess at the loosest quantile of the best window.
struct SignalEstimate {
    double count = 0.0;
    double sigma = 0.0;
    int cell_index = -1;
    bool valid = false;
};
SignalEstimate estimate_signal_count(const BumpHuntResult& result);

void write_hunt_json(const BumpHuntResult& result, const std::string& path);
BumpHuntResult read_hunt_json(const std::string& path);

}  // namespace resonance
