#pragma once

#include <cstdint>
#include <vector>

#include "resonance/core.hpp"
#include "resonance/score_table.hpp"

namespace resonance {

enum class EstimatorKind { Histogram, GaussianMixture };

struct MixtureConfig {
    int K = 4;
    int em_max_iter = 200;
    double em_tol = 1e-7;  // log-likelihood change per event
    enum class Cov { Diagonal, Full } cov = Cov::Diagonal;
};

struct DensityConfig {
    EstimatorKind kind = EstimatorKind::Histogram;
    // equal-probability bins per feature axis; 0 picks ~(n_fit/10)^(1/d)
    // capped at 8, so cells keep O(10) events at any fit size
    int bins_per_axis = 0;
    int n_m_bins = 4;       // m-bins on each side of the SR
    MixtureConfig gmm;
    double pdf_floor = 1e-12;
    std::uint64_t seed = 1;

    void validate() const;
};

// Parameters of one m-bin (or of the single collapsed SR bin).
struct DensityBin {
    double m_center = 0.0;  // mean m of the bin's events
    long long n_events = 0;
    // histogram: probability mass per cell (sums to 1) plus raw counts
    std::vector<double> cell_prob;
    std::vector<long long> cell_count;
    // mixture: weights (sum 1), means (K*d), covariances; components are
    // realigned at fit time so adjacent bins interpolate index-wise
    std::vector<double> weight;
    std::vector<double> mean;
    std::vector<double> cov_diag;         // K*d when diagonal
    std::vector<double> cov_full;         // K*d*d when full
    std::vector<double> em_loglik_trace;  // per EM iteration
    bool em_converged = true;
};

// Conditional density p(x|m): per-m-bin parameters over the sideband,
// evaluated anywhere by piecewise-linear interpolation in m between bin
// centers. Inside the SR gap this interpolates between the innermost left
// and right sideband bins. A "single bin" instance (direct SR fit)
// ignores m.
class CondDensity {
  public:
    EstimatorKind kind = EstimatorKind::Histogram;
    MixtureConfig::Cov cov_kind = MixtureConfig::Cov::Diagonal;
    double pdf_floor = 1e-12;
    int d = 0;

    bool single_bin = false;
    WindowSpec window{};  // geometry for sideband fits (sr gap + domain)

    std::vector<double> left_edges, right_edges;  // m-bin edges per side
    std::vector<DensityBin> bins;                 // left bins then right bins
    int n_left = 0;

    // histogram axis edges, shared by all bins
    std::vector<std::vector<double>> axis_edges;

    // own_bin >= 0 excludes one event's own contribution from that m-bin
    // (exact leave-one-out, histogram only); pass -1 for plain evaluation.
    double pdf(std::span<const double> x, double m, bool* clamped = nullptr,
               int own_bin = -1) const;
    double pdf_floored(std::span<const double> x, double m, bool* clamped = nullptr,
                       int own_bin = -1) const;

    // Interpolated cell masses at fixed m (histogram sideband fits only).
    std::vector<double> interpolated_cell_probs(double m) const;

    // Index of the m-bin containing m (sideband fits only; -1 inside the
    // SR gap).
    int bin_index(double m) const;

    std::size_t cell_of(std::span<const double> x, bool* clamped) const;
    double cell_volume(std::size_t cell) const;

  private:
    // interpolation bracket for m: bins lo/hi and weight t on hi
    void bracket(double m, int* lo, int* hi, double* t) const;
    double cell_mass(const DensityBin& b, std::size_t cell, bool loo) const;
    double hist_pdf(double m, std::span<const double> x, bool* clamped, int own_bin) const;
    double gmm_pdf_interp(double m, std::span<const double> x) const;
    double gmm_component_pdf(std::span<const double> weight, std::span<const double> mean,
                             std::span<const double> cov_diag,
                             std::span<const double> cov_full,
                             std::span<const double> x) const;
};

// Fits p(x|m) on the sideband of w. Each side is split into n_m_bins
// equal-count m-bins, so the per-bin statistics are homogeneous across the
// spectrum. Histogram axis edges are equal-probability quantiles of the
// pooled sideband. Preconditions: every m-bin holds >= 50*d events
// (histogram) or >= 20*K*d (mixture); otherwise data_error.
CondDensity fit_sideband_density(const Dataset& ds_sb, const WindowSpec& w,
                                 const DensityConfig& cfg);

// Direct single-bin fit on SR events (m-conditioning collapsed across the
// narrow SR). Pass the sideband fit as binning_ref so histogram cells line
// up for ratio taking.
CondDensity fit_sr_density(const Dataset& ds_sr, const DensityConfig& cfg,
                           const CondDensity* binning_ref = nullptr);

// Per-event log ratio log(max(p_sr,floor)/max(p_sb,floor)). Works for SR
// events (interpolated denominator) and sideband events (denominator
// interpolated at the event's own m). in_sample_loo applies exact
// leave-one-out corrections for histogram fits whose inputs are the scored
// events themselves (SR events in the numerator, sideband events in the
// denominator); this keeps in-sample scores exchangeable with out-of-sample
// ones, which the quantile-threshold calibration relies on. clamp_count
// reports events clamped into boundary histogram cells.
ScoreTable anode_score(const CondDensity& p_sr, const CondDensity& p_sb, const Dataset& ds,
                       std::size_t* clamp_count = nullptr, bool in_sample_loo = false);

}  // namespace resonance
