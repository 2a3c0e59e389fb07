#include "resonance/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "resonance/rng.hpp"
#include "resonance/stats.hpp"

namespace resonance {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

int locate_bin(const std::vector<double>& edges, double v) {
    // clamp into [0, n-1]
    const int n = static_cast<int>(edges.size()) - 1;
    if (v <= edges.front()) return 0;
    if (v >= edges.back()) return n - 1;
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    return static_cast<int>(it - edges.begin()) - 1;
}

}  // namespace

void DensityConfig::validate() const {
    if (bins_per_axis != 0 && bins_per_axis < 2)
        throw config_error("bins_per_axis must be 0 (auto) or >= 2");
    if (n_m_bins < 2) throw config_error("n_m_bins must be >= 2 on each side of the SR");
    if (gmm.K < 1) throw config_error("mixture needs K >= 1");
    if (gmm.em_max_iter < 1) throw config_error("em_max_iter must be >= 1");
    if (!(gmm.em_tol > 0.0)) throw config_error("em_tol must be positive");
    if (!(pdf_floor > 0.0)) throw config_error("pdf_floor must be positive");
}

int CondDensity::bin_index(double m) const {
    if (single_bin) return 0;
    if (m < window.sr_lo()) return locate_bin(left_edges, m);
    if (m > window.sr_hi()) return n_left + locate_bin(right_edges, m);
    return -1;  // inside the SR gap
}

std::size_t CondDensity::cell_of(std::span<const double> x, bool* clamped) const {
    std::size_t cell = 0;
    for (int j = 0; j < d; ++j) {
        const auto& edges = axis_edges[j];
        if (clamped && (x[j] < edges.front() || x[j] > edges.back())) *clamped = true;
        cell = cell * (edges.size() - 1) + static_cast<std::size_t>(locate_bin(edges, x[j]));
    }
    return cell;
}

double CondDensity::cell_volume(std::size_t cell) const {
    double vol = 1.0;
    for (int j = d - 1; j >= 0; --j) {
        const auto& edges = axis_edges[j];
        const std::size_t b = cell % (edges.size() - 1);
        vol *= edges[b + 1] - edges[b];
        cell /= (edges.size() - 1);
    }
    return vol;
}

void CondDensity::bracket(double m, int* lo, int* hi, double* t) const {
    const int n = static_cast<int>(bins.size());
    if (m <= bins.front().m_center) {
        *lo = *hi = 0;
        *t = 0.0;
        return;
    }
    if (m >= bins.back().m_center) {
        *lo = *hi = n - 1;
        *t = 0.0;
        return;
    }
    int i = 0;
    while (i + 1 < n && bins[i + 1].m_center < m) ++i;
    *lo = i;
    *hi = i + 1;
    *t = (m - bins[i].m_center) / (bins[i + 1].m_center - bins[i].m_center);
}

double CondDensity::cell_mass(const DensityBin& b, std::size_t cell, bool loo) const {
    if (!loo) return b.cell_prob[cell];
    // exact leave-one-out for an event known to live in this cell
    const double k = static_cast<double>(b.cell_count[cell]);
    const double n = static_cast<double>(b.n_events);
    if (k < 1.0 || n < 2.0) return 0.0;
    return (k - 1.0) / (n - 1.0);
}

double CondDensity::hist_pdf(double m, std::span<const double> x, bool* clamped,
                             int own_bin) const {
    const std::size_t cell = cell_of(x, clamped);
    double mass;
    if (single_bin) {
        mass = cell_mass(bins[0], cell, own_bin == 0);
    } else {
        int lo, hi;
        double t;
        bracket(m, &lo, &hi, &t);
        const double pl = cell_mass(bins[lo], cell, own_bin == lo);
        const double ph = (hi == lo) ? pl : cell_mass(bins[hi], cell, own_bin == hi);
        mass = (1.0 - t) * pl + t * ph;
    }
    return mass / cell_volume(cell);
}

double CondDensity::gmm_component_pdf(std::span<const double> weight,
                                      std::span<const double> mean,
                                      std::span<const double> cov_diag,
                                      std::span<const double> cov_full,
                                      std::span<const double> x) const {
    const int K = static_cast<int>(weight.size());
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
        double log_det = 0.0, maha = 0.0;
        if (cov_kind == MixtureConfig::Cov::Diagonal) {
            for (int j = 0; j < d; ++j) {
                const double v = cov_diag[k * d + j];
                const double c = x[j] - mean[k * d + j];
                log_det += std::log(v);
                maha += c * c / v;
            }
        } else {
            std::vector<double> L(static_cast<std::size_t>(d) * d, 0.0);
            const double* S = cov_full.data() + static_cast<std::size_t>(k) * d * d;
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j <= i; ++j) {
                    double s = S[i * d + j];
                    for (int p = 0; p < j; ++p) s -= L[i * d + p] * L[j * d + p];
                    if (i == j) {
                        if (s <= 0.0)
                            throw numerical_error("covariance not positive definite");
                        L[i * d + i] = std::sqrt(s);
                    } else {
                        L[i * d + j] = s / L[j * d + j];
                    }
                }
            }
            std::vector<double> z(d);
            for (int i = 0; i < d; ++i) {
                double s = x[i] - mean[k * d + i];
                for (int p = 0; p < i; ++p) s -= L[i * d + p] * z[p];
                z[i] = s / L[i * d + i];
                maha += z[i] * z[i];
                log_det += 2.0 * std::log(L[i * d + i]);
            }
        }
        total += weight[k] * std::exp(-0.5 * (d * kLog2Pi + log_det + maha));
    }
    return total;
}

double CondDensity::gmm_pdf_interp(double m, std::span<const double> x) const {
    if (single_bin)
        return gmm_component_pdf(bins[0].weight, bins[0].mean, bins[0].cov_diag,
                                 bins[0].cov_full, x);
    int lo, hi;
    double t;
    bracket(m, &lo, &hi, &t);
    if (hi == lo)
        return gmm_component_pdf(bins[lo].weight, bins[lo].mean, bins[lo].cov_diag,
                                 bins[lo].cov_full, x);
    const DensityBin& L = bins[lo];
    const DensityBin& R = bins[hi];
    const int K = static_cast<int>(L.weight.size());
    std::vector<double> w(K), mu(static_cast<std::size_t>(K) * d);
    std::vector<double> cd, cf;
    double wsum = 0.0;
    for (int k = 0; k < K; ++k) {
        w[k] = (1.0 - t) * L.weight[k] + t * R.weight[k];
        wsum += w[k];
        for (int j = 0; j < d; ++j)
            mu[k * d + j] = (1.0 - t) * L.mean[k * d + j] + t * R.mean[k * d + j];
    }
    for (double& v : w) v /= wsum;
    if (cov_kind == MixtureConfig::Cov::Diagonal) {
        cd.resize(static_cast<std::size_t>(K) * d);
        for (std::size_t i = 0; i < cd.size(); ++i)
            cd[i] = (1.0 - t) * L.cov_diag[i] + t * R.cov_diag[i];
    } else {
        cf.resize(static_cast<std::size_t>(K) * d * d);
        for (std::size_t i = 0; i < cf.size(); ++i)
            cf[i] = (1.0 - t) * L.cov_full[i] + t * R.cov_full[i];
    }
    return gmm_component_pdf(w, mu, cd, cf, x);
}

double CondDensity::pdf(std::span<const double> x, double m, bool* clamped,
                        int own_bin) const {
    if (static_cast<int>(x.size()) != d) throw data_error("density dimension mismatch");
    if (kind == EstimatorKind::Histogram) return hist_pdf(m, x, clamped, own_bin);
    return gmm_pdf_interp(m, x);
}

double CondDensity::pdf_floored(std::span<const double> x, double m, bool* clamped,
                                int own_bin) const {
    return std::max(pdf(x, m, clamped, own_bin), pdf_floor);
}

std::vector<double> CondDensity::interpolated_cell_probs(double m) const {
    if (kind != EstimatorKind::Histogram || single_bin)
        throw data_error("interpolated cell masses exist only for sideband histograms");
    int lo, hi;
    double t;
    bracket(m, &lo, &hi, &t);
    const auto& L = bins[lo].cell_prob;
    const auto& R = bins[hi].cell_prob;
    std::vector<double> out(L.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < L.size(); ++c) {
        out[c] = (1.0 - t) * L[c] + t * R[c];
        sum += out[c];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace {

int auto_bins_per_axis(std::size_t n_fit, int d) {
    const double target = std::pow(static_cast<double>(n_fit) / 10.0, 1.0 / d);
    return std::clamp(static_cast<int>(target), 2, 8);
}

std::vector<std::vector<double>> quantile_axis_edges(const Dataset& ds,
                                                     const std::vector<std::size_t>& rows,
                                                     int bins) {
    const int d = ds.dim();
    std::vector<std::vector<double>> edges(d);
    std::vector<double> col(rows.size());
    for (int j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) col[i] = ds.x(rows[i])[j];
        std::sort(col.begin(), col.end());
        auto& e = edges[j];
        e.resize(bins + 1);
        e.front() = col.front();
        e.back() = col.back();
        for (int b = 1; b < bins; ++b)
            e[b] = quantile_sorted(col, static_cast<double>(b) / bins);
        for (int b = 0; b < bins; ++b)
            if (!(e[b + 1] > e[b]))
                throw data_error("degenerate quantile bin on feature " + std::to_string(j) +
                                 "; feature has too many repeated values");
    }
    return edges;
}

DensityBin fit_hist_bin(const CondDensity& cd, const Dataset& ds,
                        const std::vector<std::size_t>& rows) {
    DensityBin bin;
    bin.n_events = static_cast<long long>(rows.size());
    std::size_t n_cells = 1;
    for (const auto& e : cd.axis_edges) n_cells *= e.size() - 1;
    bin.cell_count.assign(n_cells, 0);
    for (std::size_t r : rows) bin.cell_count[cd.cell_of(ds.x(r), nullptr)]++;
    bin.cell_prob.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c)
        bin.cell_prob[c] =
            static_cast<double>(bin.cell_count[c]) / static_cast<double>(rows.size());
    return bin;
}

DensityBin fit_gmm_bin(const Dataset& ds, const std::vector<std::size_t>& rows,
                       const MixtureConfig& mc, int d, std::uint64_t seed,
                       std::uint64_t bin_tag) {
    const int K = mc.K;
    const std::size_t n = rows.size();
    DensityBin bin;
    bin.n_events = static_cast<long long>(n);
    bin.weight.assign(K, 1.0 / K);
    bin.mean.resize(static_cast<std::size_t>(K) * d);

    // overall variance sets the floor and the initial spread
    std::vector<double> gmean(d, 0.0), gvar(d, 0.0);
    for (std::size_t r : rows) {
        auto x = ds.x(r);
        for (int j = 0; j < d; ++j) gmean[j] += x[j];
    }
    for (int j = 0; j < d; ++j) gmean[j] /= static_cast<double>(n);
    for (std::size_t r : rows) {
        auto x = ds.x(r);
        for (int j = 0; j < d; ++j) {
            const double c = x[j] - gmean[j];
            gvar[j] += c * c;
        }
    }
    for (int j = 0; j < d; ++j) {
        gvar[j] /= static_cast<double>(n);
        if (!(gvar[j] > 0.0)) throw data_error("mixture fit on a constant feature");
    }
    std::vector<double> var_floor(d);
    for (int j = 0; j < d; ++j) var_floor[j] = 1e-6 * gvar[j];

    // k-means++ style seeding
    StreamRng rng(seed, Stream::KmeansInit, bin_tag);
    std::vector<std::size_t> centers;
    centers.push_back(rows[rng.next_below(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < K) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = ds.x(rows[i]);
            auto c = ds.x(centers.back());
            double dd = 0.0;
            for (int j = 0; j < d; ++j) {
                const double diff = (x[j] - c[j]);
                dd += diff * diff / gvar[j];
            }
            d2[i] = std::min(d2[i], dd);
            total += d2[i];
        }
        double pick = rng.next_unit() * total;
        std::size_t chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            pick -= d2[i];
            if (pick <= 0.0) {
                chosen = i;
                break;
            }
        }
        centers.push_back(rows[chosen]);
    }
    for (int k = 0; k < K; ++k) {
        auto c = ds.x(centers[k]);
        for (int j = 0; j < d; ++j) bin.mean[k * d + j] = c[j];
    }
    const bool full = mc.cov == MixtureConfig::Cov::Full;
    if (full) {
        bin.cov_full.assign(static_cast<std::size_t>(K) * d * d, 0.0);
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < d; ++j) bin.cov_full[k * d * d + j * d + j] = gvar[j];
    } else {
        bin.cov_diag.resize(static_cast<std::size_t>(K) * d);
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < d; ++j) bin.cov_diag[k * d + j] = gvar[j];
    }

    // EM
    std::vector<double> resp(n * static_cast<std::size_t>(K));
    std::vector<double> log_w(K);
    std::vector<double> inv_v(static_cast<std::size_t>(K) * d);
    std::vector<double> log_det_k(K);
    double prev_ll = -std::numeric_limits<double>::infinity();
    bin.em_converged = false;
    for (int iter = 0; iter < mc.em_max_iter; ++iter) {
        for (int k = 0; k < K; ++k) log_w[k] = std::log(bin.weight[k]);
        if (!full) {
            // hoist the per-component constants out of the event loop
            for (int k = 0; k < K; ++k) {
                double ld = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double v = bin.cov_diag[k * d + j];
                    ld += std::log(v);
                    inv_v[k * d + j] = 1.0 / v;
                }
                log_det_k[k] = ld;
            }
        }
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = ds.x(rows[i]);
            double mx = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                double log_det = 0.0, maha = 0.0;
                if (!full) {
                    log_det = log_det_k[k];
                    for (int j = 0; j < d; ++j) {
                        const double c = x[j] - bin.mean[k * d + j];
                        maha += c * c * inv_v[k * d + j];
                    }
                } else {
                    std::vector<double> L(static_cast<std::size_t>(d) * d, 0.0);
                    const double* S = bin.cov_full.data() + static_cast<std::size_t>(k) * d * d;
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b <= a; ++b) {
                            double s = S[a * d + b];
                            for (int p = 0; p < b; ++p) s -= L[a * d + p] * L[b * d + p];
                            if (a == b)
                                L[a * d + a] = std::sqrt(std::max(s, var_floor[a]));
                            else
                                L[a * d + b] = s / L[b * d + b];
                        }
                    std::vector<double> z(d);
                    for (int a = 0; a < d; ++a) {
                        double s = x[a] - bin.mean[k * d + a];
                        for (int p = 0; p < a; ++p) s -= L[a * d + p] * z[p];
                        z[a] = s / L[a * d + a];
                        maha += z[a] * z[a];
                        log_det += 2.0 * std::log(L[a * d + a]);
                    }
                }
                resp[i * K + k] = log_w[k] - 0.5 * (d * kLog2Pi + log_det + maha);
                mx = std::max(mx, resp[i * K + k]);
            }
            double sum = 0.0;
            for (int k = 0; k < K; ++k) sum += std::exp(resp[i * K + k] - mx);
            const double log_sum = mx + std::log(sum);
            ll += log_sum;
            for (int k = 0; k < K; ++k) resp[i * K + k] = std::exp(resp[i * K + k] - log_sum);
        }
        bin.em_loglik_trace.push_back(ll);
        if (iter > 0 && (ll - prev_ll) / static_cast<double>(n) < mc.em_tol) {
            bin.em_converged = true;
            break;
        }
        prev_ll = ll;

        for (int k = 0; k < K; ++k) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i * K + k];
            nk = std::max(nk, 1e-10);
            bin.weight[k] = nk / static_cast<double>(n);
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += resp[i * K + k] * ds.x(rows[i])[j];
                bin.mean[k * d + j] = s / nk;
            }
            if (!full) {
                for (int j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double c = ds.x(rows[i])[j] - bin.mean[k * d + j];
                        s += resp[i * K + k] * c * c;
                    }
                    bin.cov_diag[k * d + j] = std::max(s / nk, var_floor[j]);
                }
            } else {
                double* S = bin.cov_full.data() + static_cast<std::size_t>(k) * d * d;
                std::fill(S, S + d * d, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    auto x = ds.x(rows[i]);
                    const double r = resp[i * K + k];
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b <= a; ++b)
                            S[a * d + b] +=
                                r * (x[a] - bin.mean[k * d + a]) * (x[b] - bin.mean[k * d + b]);
                }
                for (int a = 0; a < d; ++a) {
                    for (int b = 0; b < a; ++b) {
                        S[a * d + b] /= nk;
                        S[b * d + a] = S[a * d + b];
                    }
                    S[a * d + a] = std::max(S[a * d + a] / nk, var_floor[a]);
                }
            }
        }
    }
    return bin;
}

// Reorder `right`'s components to best match `left`'s (greedy nearest mean),
// so linear interpolation never mixes unrelated components.
void align_onto(const DensityBin& left, DensityBin& right, int d, bool full) {
    const int K = static_cast<int>(left.weight.size());
    std::vector<int> perm(K, -1);
    std::vector<bool> taken(K, false);
    for (int step = 0; step < K; ++step) {
        double best = std::numeric_limits<double>::infinity();
        int bl = -1, br = -1;
        for (int k = 0; k < K; ++k) {
            if (perm[k] >= 0) continue;
            for (int r = 0; r < K; ++r) {
                if (taken[r]) continue;
                double dd = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double c = left.mean[k * d + j] - right.mean[r * d + j];
                    dd += c * c;
                }
                if (dd < best) {
                    best = dd;
                    bl = k;
                    br = r;
                }
            }
        }
        perm[bl] = br;
        taken[br] = true;
    }
    DensityBin out = right;
    for (int k = 0; k < K; ++k) {
        const int r = perm[k];
        out.weight[k] = right.weight[r];
        for (int j = 0; j < d; ++j) out.mean[k * d + j] = right.mean[r * d + j];
        if (full)
            for (int j = 0; j < d * d; ++j)
                out.cov_full[k * d * d + j] = right.cov_full[r * d * d + j];
        else
            for (int j = 0; j < d; ++j) out.cov_diag[k * d + j] = right.cov_diag[r * d + j];
    }
    right = std::move(out);
}

// Equal-count m-bin edges over [lo, hi] from the sorted m values of one side.
std::vector<double> equal_count_m_edges(std::vector<double> side_m, double lo, double hi,
                                        int n_bins) {
    std::sort(side_m.begin(), side_m.end());
    std::vector<double> edges;
    edges.push_back(lo);
    for (int b = 1; b < n_bins; ++b) {
        const double q =
            quantile_sorted(side_m, static_cast<double>(b) / static_cast<double>(n_bins));
        if (q > edges.back()) edges.push_back(q);
    }
    edges.push_back(hi);
    return edges;
}

}  // namespace

CondDensity fit_sideband_density(const Dataset& ds_sb, const WindowSpec& w,
                                 const DensityConfig& cfg) {
    cfg.validate();
    if (cfg.kind == EstimatorKind::Histogram && ds_sb.dim() > 10)
        throw config_error("histogram estimator is limited to d <= 10 features");
    CondDensity cd;
    cd.kind = cfg.kind;
    cd.cov_kind = cfg.gmm.cov;
    cd.pdf_floor = cfg.pdf_floor;
    cd.d = ds_sb.dim();
    cd.window = w;
    cd.n_left = cfg.n_m_bins;

    std::vector<double> left_m, right_m;
    std::vector<std::size_t> all_rows;
    all_rows.reserve(ds_sb.size());
    for (std::size_t i = 0; i < ds_sb.size(); ++i) {
        const double m = ds_sb.m(i);
        if (m > w.sr_lo() && m < w.sr_hi())
            throw data_error("sideband fit input contains SR events");
        (m < w.sr_lo() ? left_m : right_m).push_back(m);
        all_rows.push_back(i);
    }
    const long long needed = cfg.kind == EstimatorKind::Histogram
                                 ? 50LL * cd.d
                                 : 20LL * cfg.gmm.K * cd.d;
    if (static_cast<long long>(left_m.size()) < needed * cfg.n_m_bins ||
        static_cast<long long>(right_m.size()) < needed * cfg.n_m_bins)
        throw data_error("insufficient sideband statistics: sides hold " +
                         std::to_string(left_m.size()) + " / " +
                         std::to_string(right_m.size()) + " events, need " +
                         std::to_string(needed * cfg.n_m_bins) + " per side");

    cd.left_edges = equal_count_m_edges(left_m, w.domain_lo, w.sr_lo(), cfg.n_m_bins);
    cd.right_edges = equal_count_m_edges(right_m, w.sr_hi(), w.domain_hi, cfg.n_m_bins);
    if (static_cast<int>(cd.left_edges.size()) != cfg.n_m_bins + 1 ||
        static_cast<int>(cd.right_edges.size()) != cfg.n_m_bins + 1)
        throw data_error("degenerate m-bin edges: repeated m values in the sideband");

    const int n_bins = 2 * cfg.n_m_bins;
    std::vector<std::vector<std::size_t>> rows(n_bins);
    std::vector<double> m_sum(n_bins, 0.0);
    for (std::size_t i = 0; i < ds_sb.size(); ++i) {
        const int b = cd.bin_index(ds_sb.m(i));
        rows[b].push_back(i);
        m_sum[b] += ds_sb.m(i);
    }
    for (int b = 0; b < n_bins; ++b) {
        if (static_cast<long long>(rows[b].size()) < needed)
            throw data_error("insufficient sideband statistics: m-bin " + std::to_string(b) +
                             " holds " + std::to_string(rows[b].size()) + " events, needs " +
                             std::to_string(needed));
    }

    if (cfg.kind == EstimatorKind::Histogram) {
        std::size_t min_bin = ds_sb.size();
        for (int b = 0; b < n_bins; ++b) min_bin = std::min(min_bin, rows[b].size());
        const int bins = cfg.bins_per_axis > 0 ? cfg.bins_per_axis
                                               : auto_bins_per_axis(min_bin, cd.d);
        cd.axis_edges = quantile_axis_edges(ds_sb, all_rows, bins);
    }

    cd.bins.resize(n_bins);
    for (int b = 0; b < n_bins; ++b) {
        DensityBin bin = (cfg.kind == EstimatorKind::Histogram)
                             ? fit_hist_bin(cd, ds_sb, rows[b])
                             : fit_gmm_bin(ds_sb, rows[b], cfg.gmm, cd.d, cfg.seed,
                                           static_cast<std::uint64_t>(b));
        bin.m_center = m_sum[b] / static_cast<double>(rows[b].size());
        cd.bins[b] = std::move(bin);
    }

    // chain-align mixture components so index-wise interpolation is sound
    // between any adjacent pair (including across the SR gap)
    if (cfg.kind == EstimatorKind::GaussianMixture) {
        const bool full = cfg.gmm.cov == MixtureConfig::Cov::Full;
        for (int b = 1; b < n_bins; ++b) align_onto(cd.bins[b - 1], cd.bins[b], cd.d, full);
    }
    return cd;
}

CondDensity fit_sr_density(const Dataset& ds_sr, const DensityConfig& cfg,
                           const CondDensity* binning_ref) {
    cfg.validate();
    if (cfg.kind == EstimatorKind::Histogram && ds_sr.dim() > 10)
        throw config_error("histogram estimator is limited to d <= 10 features");
    CondDensity cd;
    cd.kind = cfg.kind;
    cd.cov_kind = cfg.gmm.cov;
    cd.pdf_floor = cfg.pdf_floor;
    cd.d = ds_sr.dim();
    cd.single_bin = true;
    const long long needed =
        cfg.kind == EstimatorKind::Histogram ? 50LL * cd.d : 20LL * cfg.gmm.K * cd.d;
    if (static_cast<long long>(ds_sr.size()) < needed)
        throw data_error("insufficient SR statistics: " + std::to_string(ds_sr.size()) +
                         " events, needs " + std::to_string(needed));

    std::vector<std::size_t> rows(ds_sr.size());
    std::iota(rows.begin(), rows.end(), 0);
    if (cfg.kind == EstimatorKind::Histogram) {
        if (binning_ref) {
            if (binning_ref->kind != EstimatorKind::Histogram || binning_ref->d != cd.d)
                throw data_error("incompatible histogram binning reference");
            cd.axis_edges = binning_ref->axis_edges;
        } else {
            const int bins = cfg.bins_per_axis > 0
                                 ? cfg.bins_per_axis
                                 : auto_bins_per_axis(rows.size(), cd.d);
            cd.axis_edges = quantile_axis_edges(ds_sr, rows, bins);
        }
        cd.bins.push_back(fit_hist_bin(cd, ds_sr, rows));
    } else {
        cd.bins.push_back(fit_gmm_bin(ds_sr, rows, cfg.gmm, cd.d, cfg.seed, 0x5Eull));
    }
    double msum = 0.0;
    for (std::size_t i = 0; i < ds_sr.size(); ++i) msum += ds_sr.m(i);
    cd.bins[0].m_center = msum / static_cast<double>(ds_sr.size());
    return cd;
}

ScoreTable anode_score(const CondDensity& p_sr, const CondDensity& p_sb, const Dataset& ds,
                       std::size_t* clamp_count, bool in_sample_loo) {
    if (p_sr.d != ds.dim() || p_sb.d != ds.dim())
        throw data_error("density / dataset dimension mismatch");
    // region tags come from whichever side carries window geometry; two
    // single-bin densities describe a pure-SR ratio
    const CondDensity* geom = nullptr;
    if (!p_sb.single_bin)
        geom = &p_sb;
    else if (!p_sr.single_bin)
        geom = &p_sr;
    const bool loo = in_sample_loo && p_sr.kind == EstimatorKind::Histogram &&
                     p_sb.kind == EstimatorKind::Histogram;
    ScoreTable st(ds.labeled());
    st.reserve(ds.size());
    std::size_t clamped_events = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = ds.x(i);
        const double m = ds.m(i);
        const Region region = geom ? assign_region(m, geom->window) : Region::SR;
        bool clamped = false;
        int num_own = -1, den_own = -1;
        if (loo) {
            if (region == Region::SR)
                num_own = 0;  // the single SR bin was fit on this event
            else
                den_own = p_sb.bin_index(m);
        }
        const double num = p_sr.pdf_floored(x, m, &clamped, num_own);
        const double den = p_sb.pdf_floored(x, m, &clamped, den_own);
        if (clamped) ++clamped_events;
        std::optional<Label> l;
        if (ds.labeled()) l = ds.label(i);
        st.append(m, std::log(num) - std::log(den), region, l);
    }
    if (clamp_count) *clamp_count = clamped_events;
    return st;
}

}  // namespace resonance
