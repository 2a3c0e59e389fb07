#include "resonance/bumphunt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "resonance/rng.hpp"
#include "resonance/stats.hpp"

#include "json.hpp"

namespace resonance {

double suggested_m_scale(double m_max) { return 1.05 * m_max; }

double BackgroundFit::density(double m) const {
    const double u = m / m_scale;
    const double lu = std::log(u);
    return alpha0 * std::pow(1.0 - u, alpha1) * std::exp((alpha2 + alpha3 * lu) * lu);
}

double BackgroundFit::cdf(double m) const {
    if (cdf_knots.empty()) throw numerical_error("background fit carries no CDF tabulation");
    if (m <= cdf_knots.front()) return 0.0;
    if (m >= cdf_knots.back()) return 1.0;
    const auto it = std::upper_bound(cdf_knots.begin(), cdf_knots.end(), m);
    const std::size_t i = static_cast<std::size_t>(it - cdf_knots.begin()) - 1;
    const double t = (m - cdf_knots[i]) / (cdf_knots[i + 1] - cdf_knots[i]);
    return cdf_values[i] + t * (cdf_values[i + 1] - cdf_values[i]);
}

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1,1], positive half.
constexpr double kGlX[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                            0.9445750230732326, 0.9894009349916499};
constexpr double kGlW[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                            0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                            0.0622535239386479, 0.0271524594117541};

// Precomputed quadrature node: the shape integral over all fit bins reduces
// to sums of w * exp(log_a0 + a1*l1mu + a2*lu + a3*lu^2).
struct QuadNode {
    double lu, l1mu, lu2, w;
};

struct FitWorkspace {
    struct Bin {
        long long count = 0;
        std::size_t node_begin = 0, node_end = 0;
        double lo = 0.0, hi = 0.0;
    };
    std::vector<Bin> bins;
    std::vector<QuadNode> nodes;
    double m_scale = 1.0;

    void add_segment(double a, double b) {
        const double c = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        for (int i = 0; i < 8; ++i) {
            for (double s : {+1.0, -1.0}) {
                const double m = c + s * h * kGlX[i];
                const double u = m / m_scale;
                QuadNode n;
                n.lu = std::log(u);
                n.l1mu = std::log(1.0 - u);
                n.lu2 = n.lu * n.lu;
                n.w = kGlW[i] * h;
                nodes.push_back(n);
            }
        }
    }

    // theta = (log_a0, a1, a2, a3); the box keeps the optimizer away from
    // degenerate spikes that underflow the density inside the range
    double nll(std::span<const double> theta) const {
        for (double v : theta)
            if (!(std::fabs(v) <= 60.0)) return 1e300;
        double total = 0.0;
        for (const auto& bin : bins) {
            double nu = 0.0;
            for (std::size_t k = bin.node_begin; k < bin.node_end; ++k) {
                const QuadNode& n = nodes[k];
                nu += n.w * std::exp(theta[0] + theta[1] * n.l1mu + theta[2] * n.lu +
                                     theta[3] * n.lu2);
            }
            if (!(nu > 0.0) || !std::isfinite(nu)) return 1e300;
            total += nu - static_cast<double>(bin.count) * std::log(nu);
        }
        return std::isfinite(total) ? total : 1e300;
    }

    double nu_of_bin(const Bin& bin, std::span<const double> theta) const {
        double nu = 0.0;
        for (std::size_t k = bin.node_begin; k < bin.node_end; ++k) {
            const QuadNode& n = nodes[k];
            nu += n.w *
                  std::exp(theta[0] + theta[1] * n.l1mu + theta[2] * n.lu + theta[3] * n.lu2);
        }
        return nu;
    }
};

std::vector<double> build_edges(const std::vector<double>& sorted_m, const FitBinning& binning) {
    std::vector<double> edges;
    double lo = binning.lo, hi = binning.hi;
    if (lo == 0.0 && hi == 0.0) {
        lo = sorted_m.front();
        hi = sorted_m.back();
    }
    if (!(lo < hi)) throw data_error("fit binning range is empty");
    if (binning.mode == FitBinning::Mode::EqualWidth) {
        for (int i = 0; i <= binning.n_bins; ++i)
            edges.push_back(lo + (hi - lo) * i / binning.n_bins);
    } else {
        edges.push_back(lo);
        for (int i = 1; i < binning.n_bins; ++i) {
            const double q = quantile_sorted(sorted_m, static_cast<double>(i) / binning.n_bins);
            if (q > edges.back()) edges.push_back(q);
        }
        if (hi > edges.back()) edges.push_back(hi);
        if (edges.size() < 3) throw data_error("fit binning degenerate: m values too repetitive");
    }
    return edges;
}

void build_cdf_table(BackgroundFit& fit) {
    const int grid = 4096;
    std::vector<double> knots;
    knots.reserve(grid + 3);
    for (int i = 0; i <= grid; ++i)
        knots.push_back(fit.range_lo + (fit.range_hi - fit.range_lo) * i / grid);
    if (fit.has_gap()) {
        knots.push_back(fit.gap_lo);
        knots.push_back(fit.gap_hi);
        std::sort(knots.begin(), knots.end());
        knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    }
    fit.cdf_knots = knots;
    fit.cdf_values.assign(knots.size(), 0.0);
    auto in_gap = [&](double a, double b) {
        return fit.has_gap() && a >= fit.gap_lo - 1e-12 && b <= fit.gap_hi + 1e-12;
    };
    for (std::size_t i = 1; i < knots.size(); ++i) {
        double inc = 0.0;
        if (!in_gap(knots[i - 1], knots[i]))
            inc = 0.5 * (fit.density(knots[i - 1]) + fit.density(knots[i])) *
                  (knots[i] - knots[i - 1]);
        fit.cdf_values[i] = fit.cdf_values[i - 1] + inc;
    }
    const double total = fit.cdf_values.back();
    if (!(total > 0.0)) throw numerical_error("fitted spectrum has zero mass over the range");
    for (double& v : fit.cdf_values) v /= total;
}

}  // namespace

BackgroundFit fit_background_shape(std::vector<double> m_values_sb, const FitBinning& binning,
                                   double m_scale) {
    if (m_values_sb.empty()) throw data_error("background fit needs sideband m values");
    if (!(m_scale > 0.0)) throw config_error("m_scale must be positive");
    std::sort(m_values_sb.begin(), m_values_sb.end());
    if (m_values_sb.back() / m_scale >= 1.0)
        throw config_error("m_scale must exceed the largest m value");

    const std::vector<double> edges = build_edges(m_values_sb, binning);
    const bool gap = binning.gap_lo < binning.gap_hi;

    FitWorkspace ws;
    ws.m_scale = m_scale;
    std::size_t cursor = 0;
    // skip data below the first edge
    while (cursor < m_values_sb.size() && m_values_sb[cursor] < edges.front()) ++cursor;
    int non_empty = 0;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        const double lo = edges[b], hi = edges[b + 1];
        // clip the bin against the excluded gap
        double seg_a1 = lo, seg_b1 = hi, seg_a2 = 0.0, seg_b2 = -1.0;
        if (gap) {
            if (lo >= binning.gap_lo && hi <= binning.gap_hi) {
                // bin fully inside the SR: drop it (and its events, which
                // should not exist in sideband input anyway)
                while (cursor < m_values_sb.size() && m_values_sb[cursor] < hi) ++cursor;
                continue;
            }
            if (lo < binning.gap_lo && hi > binning.gap_hi) {
                seg_b1 = binning.gap_lo;
                seg_a2 = binning.gap_hi;
                seg_b2 = hi;
            } else if (lo < binning.gap_lo && hi > binning.gap_lo) {
                seg_b1 = binning.gap_lo;
            } else if (lo < binning.gap_hi && hi > binning.gap_hi) {
                seg_a1 = binning.gap_hi;
            }
        }
        FitWorkspace::Bin bin;
        bin.lo = lo;
        bin.hi = hi;
        bin.node_begin = ws.nodes.size();
        ws.add_segment(seg_a1, seg_b1);
        if (seg_a2 < seg_b2) ws.add_segment(seg_a2, seg_b2);
        bin.node_end = ws.nodes.size();
        long long count = 0;
        const bool last = (b + 2 == edges.size());
        while (cursor < m_values_sb.size() &&
               (m_values_sb[cursor] < hi || (last && m_values_sb[cursor] <= hi))) {
            ++count;
            ++cursor;
        }
        bin.count = count;
        if (count > 0) ++non_empty;
        ws.bins.push_back(bin);
    }
    if (non_empty < 20)
        throw data_error("background fit needs >= 20 non-empty sideband bins, got " +
                         std::to_string(non_empty));

    // 8 deterministic starts; log alpha0 initialized so the predicted total
    // matches the observed total.
    const double n_total = static_cast<double>(m_values_sb.size());
    auto nll_fn = [&ws](std::span<const double> th) { return ws.nll(th); };
    NelderMeadResult best;
    best.fmin = std::numeric_limits<double>::infinity();
    const double a1s[2] = {1.0, 6.0};
    const double a2s[2] = {0.0, -2.0};
    const double a3s[2] = {-0.5, 0.5};
    const std::array<double, 4> steps = {0.5, 1.0, 1.0, 0.5};
    NelderMeadOptions nm_opts;
    nm_opts.max_iter = 600;
    nm_opts.f_tol = 1e-12;
    nm_opts.x_tol = 1e-8;
    for (double a1 : a1s)
        for (double a2 : a2s)
            for (double a3 : a3s) {
                std::array<double, 4> th0 = {0.0, a1, a2, a3};
                const double s = ws.nll(th0);  // with log_a0 = 0
                // nll = S - N*log(nu_tot) ... calibrate a0 via total mass
                double mass = 0.0;
                for (const auto& bin : ws.bins) mass += ws.nu_of_bin(bin, th0);
                if (!(mass > 0.0) || !std::isfinite(s)) continue;
                th0[0] = std::log(n_total / mass);
                auto r = nelder_mead(nll_fn, th0, steps, nm_opts);
                if (r.fmin < best.fmin) best = r;
            }
    if (!std::isfinite(best.fmin)) throw numerical_error("background fit failed from all starts");

    BackgroundFit fit;
    fit.alpha0 = std::exp(best.x[0]);
    fit.alpha1 = best.x[1];
    fit.alpha2 = best.x[2];
    fit.alpha3 = best.x[3];
    fit.m_scale = m_scale;
    fit.range_lo = edges.front();
    fit.range_hi = edges.back();
    fit.gap_lo = binning.gap_lo;
    fit.gap_hi = binning.gap_hi;
    fit.nll = best.fmin;
    fit.converged = best.converged;

    // positivity over the fitted range (holds by construction; asserted)
    for (int i = 0; i <= 64; ++i) {
        const double m = fit.range_lo + (fit.range_hi - fit.range_lo) * i / 64;
        const double f = fit.density(m);
        if (!(f > 0.0) || !std::isfinite(f))
            throw numerical_error("fitted spectrum non-positive at m=" + std::to_string(m));
    }

    // Pearson chi2 over the fit bins
    std::array<double, 4> th = {best.x[0], best.x[1], best.x[2], best.x[3]};
    fit.chi2 = 0.0;
    int used_bins = 0;
    for (const auto& bin : ws.bins) {
        const double nu = ws.nu_of_bin(bin, th);
        if (nu > 0.0) {
            fit.chi2 += (bin.count - nu) * (bin.count - nu) / nu;
            ++used_bins;
        }
    }
    fit.ndf = std::max(1, used_bins - 4);

    // covariance in (alpha0..alpha3) from the numerical Hessian of the NLL
    auto nll_alpha = [&](const std::array<double, 4>& a) {
        if (!(a[0] > 0.0)) return 1e300;
        const std::array<double, 4> t = {std::log(a[0]), a[1], a[2], a[3]};
        return ws.nll(t);
    };
    const std::array<double, 4> a_hat = {fit.alpha0, fit.alpha1, fit.alpha2, fit.alpha3};
    std::array<double, 4> h{};
    for (int i = 0; i < 4; ++i) h[i] = std::max(1e-5, 1e-4 * std::fabs(a_hat[i]));
    std::vector<double> hess(16, 0.0);
    const double f0 = nll_alpha(a_hat);
    for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) {
            auto shift = [&](double si, double sj) {
                std::array<double, 4> a = a_hat;
                a[i] += si * h[i];
                a[j] += sj * h[j];
                return nll_alpha(a);
            };
            double hij;
            if (i == j) {
                hij = (shift(1, 0) - 2.0 * f0 + shift(-1, 0)) / (h[i] * h[i]);
            } else {
                hij = (shift(1, 1) - shift(1, -1) - shift(-1, 1) + shift(-1, -1)) /
                      (4.0 * h[i] * h[j]);
            }
            hess[i * 4 + j] = hij;
            hess[j * 4 + i] = hij;
        }
    }
    std::vector<double> cov = hess;
    fit.covariance_ok = invert_matrix(cov, 4);
    if (fit.covariance_ok) {
        bool sane = true;
        for (int i = 0; i < 4; ++i)
            if (!(cov[i * 4 + i] >= 0.0) || !std::isfinite(cov[i * 4 + i])) sane = false;
        fit.covariance_ok = sane;
    }
    if (fit.covariance_ok)
        for (int i = 0; i < 16; ++i) fit.covariance[i] = cov[i];

    build_cdf_table(fit);

    // goodness of fit on the input values themselves
    if (m_values_sb.size() >= 10) {
        fit.ks_p = ks_pvalue(m_values_sb, fit);
        std::vector<double> cdf_at(m_values_sb.size());
        for (std::size_t i = 0; i < m_values_sb.size(); ++i)
            cdf_at[i] = fit.cdf(m_values_sb[i]);
        fit.ks_stat = ks_statistic_from_cdf(cdf_at);
    } else {
        fit.ks_stat = std::numeric_limits<double>::quiet_NaN();
        fit.ks_p = std::numeric_limits<double>::quiet_NaN();
    }
    return fit;
}

double ks_pvalue(std::vector<double> m_values, const BackgroundFit& fit) {
    if (m_values.size() < 10) throw data_error("KS test needs at least 10 values");
    std::sort(m_values.begin(), m_values.end());
    if (m_values.front() == m_values.back())
        throw data_error("KS test on a degenerate (constant) sample");
    std::vector<double> cdf_at(m_values.size());
    for (std::size_t i = 0; i < m_values.size(); ++i) cdf_at[i] = fit.cdf(m_values[i]);
    const double d = ks_statistic_from_cdf(cdf_at);
    return kolmogorov_tail(std::sqrt(static_cast<double>(m_values.size())) * d);
}

std::pair<double, double> expected_sr_count(const BackgroundFit& fit, const WindowSpec& w) {
    if (w.sr_lo() < fit.range_lo - 1e-9 || w.sr_hi() > fit.range_hi + 1e-9)
        throw data_error("signal region outside the fitted range");
    const double lambda = integrate_adaptive([&](double m) { return fit.density(m); },
                                             w.sr_lo(), w.sr_hi(), 1e-8);
    double sigma = 0.0;
    if (fit.covariance_ok) {
        // d f / d alpha = f * (1/alpha0, ln(1-u), ln u, ln^2 u)
        std::array<double, 4> grad{};
        grad[0] = lambda / fit.alpha0;
        grad[1] = integrate_adaptive(
            [&](double m) { return fit.density(m) * std::log(1.0 - m / fit.m_scale); },
            w.sr_lo(), w.sr_hi(), 1e-8);
        grad[2] = integrate_adaptive(
            [&](double m) { return fit.density(m) * std::log(m / fit.m_scale); }, w.sr_lo(),
            w.sr_hi(), 1e-8);
        grad[3] = integrate_adaptive(
            [&](double m) {
                const double lu = std::log(m / fit.m_scale);
                return fit.density(m) * lu * lu;
            },
            w.sr_lo(), w.sr_hi(), 1e-8);
        const double var = quad_form(std::span<const double>(fit.covariance), grad);
        sigma = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return {lambda, sigma};
}

double poisson_pvalue(long long n_obs, double lambda) {
    if (!(lambda > 0.0)) throw config_error("poisson_pvalue requires lambda > 0");
    if (n_obs <= 0) return 1.0;
    // P(N >= n) equals the regularized lower incomplete gamma P(n, lambda)
    return regularized_gamma_p(static_cast<double>(n_obs), lambda);
}

SelectResult select_by_quantile(const ScoreTable& scores, double q) {
    if (!(q > 0.0) || !(q < 1.0)) throw config_error("quantile must lie in (0,1)");
    std::vector<double> sb = scores.sb_scores();
    if (sb.empty()) throw data_error("no sideband scores to set the threshold");
    std::sort(sb.begin(), sb.end());
    const double threshold = quantile_sorted(sb, 1.0 - q);
    SelectResult out{scores.filtered_above(threshold), threshold};
    return out;
}

namespace {

BumpCell evaluate_cell(const ScoreTable& scores, const WindowSpec& w, int window_index,
                       double q, double m_scale, int max_fit_bins) {
    BumpCell cell;
    cell.window_index = window_index;
    cell.m0 = w.m0;
    cell.delta = w.delta;
    cell.epsilon = w.epsilon;
    cell.q = q;
    try {
        SelectResult sel = select_by_quantile(scores, q);
        cell.threshold = sel.threshold;
        std::vector<double> sb_m;
        long long n_obs = 0;
        for (std::size_t i = 0; i < sel.selected.size(); ++i) {
            if (sel.selected.region(i) == Region::SR)
                ++n_obs;
            else
                sb_m.push_back(sel.selected.m(i));
        }
        cell.n_sb_survivors = static_cast<long long>(sb_m.size());
        cell.n_obs = n_obs;

        FitBinning binning;
        binning.mode = FitBinning::Mode::EqualCount;
        binning.n_bins = std::clamp(static_cast<int>(sb_m.size()) / 8, 20, max_fit_bins);
        binning.gap_lo = w.sr_lo();
        binning.gap_hi = w.sr_hi();
        const BackgroundFit fit = fit_background_shape(sb_m, binning, m_scale);
        cell.fit_converged = fit.converged;
        cell.ks_p = fit.ks_p;

        const auto [lambda, sigma] = expected_sr_count(fit, w);
        if (!(lambda > 0.0)) throw numerical_error("non-positive expected SR count");
        cell.lambda = lambda;
        cell.sigma_lambda = sigma;
        cell.p_local = poisson_pvalue(n_obs, lambda);
        cell.z_local = std::clamp(z_of_pvalue(cell.p_local), -40.0, 40.0);
        cell.p_conservative = poisson_pvalue(n_obs, lambda + sigma);
        cell.valid = true;
    } catch (const std::exception& e) {
        cell.valid = false;
        cell.message = e.what();
    }
    return cell;
}

// Scan without the MC layer.
BumpHuntResult scan_once(const Dataset& ds, const ScanPlan& plan,
                         const ScorePipeline& pipeline, const BumpHuntOptions& opts) {
    BumpHuntResult res;
    res.n_windows = static_cast<int>(plan.windows.size());
    res.n_quantiles = static_cast<int>(opts.quantiles.size());
    res.n_independent = plan.n_independent;
    res.cells.resize(plan.windows.size() * opts.quantiles.size());

    double m_scale = opts.m_scale;
    if (m_scale == 0.0) {
        double mx = 0.0;
        for (double m : ds.m_column()) mx = std::max(mx, m);
        m_scale = suggested_m_scale(mx);
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t wi = next.fetch_add(1);
            if (wi >= plan.windows.size()) break;
            const WindowSpec& w = plan.windows[wi];
            ScoreTable scores(false);
            try {
                scores = pipeline(ds, w);
            } catch (const std::exception& e) {
                for (std::size_t qi = 0; qi < opts.quantiles.size(); ++qi) {
                    BumpCell& cell = res.cells[wi * opts.quantiles.size() + qi];
                    cell.window_index = static_cast<int>(wi);
                    cell.m0 = w.m0;
                    cell.delta = w.delta;
                    cell.epsilon = w.epsilon;
                    cell.q = opts.quantiles[qi];
                    cell.valid = false;
                    cell.message = std::string("scoring failed: ") + e.what();
                }
                continue;
            }
            for (std::size_t qi = 0; qi < opts.quantiles.size(); ++qi) {
                res.cells[wi * opts.quantiles.size() + qi] =
                    evaluate_cell(scores, w, static_cast<int>(wi), opts.quantiles[qi],
                                  m_scale, opts.max_fit_bins);
            }
        }
    };
    const int n_threads = std::max(1, opts.n_threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    res.min_local_p = 1.0;
    res.best_cell = -1;
    for (std::size_t i = 0; i < res.cells.size(); ++i) {
        if (res.cells[i].valid && res.cells[i].p_local <= res.min_local_p) {
            if (res.best_cell < 0 || res.cells[i].p_local < res.min_local_p) {
                res.min_local_p = res.cells[i].p_local;
                res.best_cell = static_cast<int>(i);
            }
        }
    }
    const double trials = static_cast<double>(res.n_independent) * res.n_quantiles;
    res.global_p = 1.0 - std::pow(1.0 - res.min_local_p, trials);
    res.global_p = std::clamp(res.global_p, res.min_local_p, 1.0);
    return res;
}

Dataset permute_features(const Dataset& ds, std::uint64_t seed, std::uint64_t replica) {
    // break any m-localized feature structure while preserving both marginals
    std::vector<std::size_t> perm(ds.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    StreamRng rng(seed, Stream::McReplica, replica);
    deterministic_shuffle(perm, rng);
    Dataset out(ds.dim(), false);
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out.append(ds.m(i), ds.x(perm[i]));
    return out;
}

}  // namespace

namespace {

BumpHuntResult bump_from_scores_once(const ScoreTable& scores, const WindowSpec& w,
                                     const BumpHuntOptions& opts, double m_scale) {
    BumpHuntResult res;
    res.n_windows = 1;
    res.n_quantiles = static_cast<int>(opts.quantiles.size());
    res.n_independent = 1;
    for (std::size_t qi = 0; qi < opts.quantiles.size(); ++qi)
        res.cells.push_back(
            evaluate_cell(scores, w, 0, opts.quantiles[qi], m_scale, opts.max_fit_bins));
    res.min_local_p = 1.0;
    res.best_cell = -1;
    for (std::size_t i = 0; i < res.cells.size(); ++i) {
        if (res.cells[i].valid &&
            (res.best_cell < 0 || res.cells[i].p_local < res.min_local_p)) {
            res.min_local_p = res.cells[i].p_local;
            res.best_cell = static_cast<int>(i);
        }
    }
    const double trials = static_cast<double>(res.n_quantiles);
    res.global_p = std::clamp(1.0 - std::pow(1.0 - res.min_local_p, trials),
                              res.min_local_p, 1.0);
    return res;
}

}  // namespace

BumpHuntResult bump_from_scores(const ScoreTable& scores, const WindowSpec& w,
                                const BumpHuntOptions& opts) {
    if (opts.quantiles.empty()) throw config_error("need at least one quantile");
    for (double q : opts.quantiles)
        if (!(q > 0.0) || !(q < 1.0)) throw config_error("quantiles must lie in (0,1)");
    double m_scale = opts.m_scale;
    if (m_scale == 0.0) {
        double mx = 0.0;
        for (double m : scores.m_column()) mx = std::max(mx, m);
        m_scale = suggested_m_scale(mx);
    }
    BumpHuntResult res = bump_from_scores_once(scores, w, opts, m_scale);
    if (opts.mc_replicas > 0) {
        // permutation null on fixed scores: shuffling the score column against
        // (m, region) destroys any m-localized score structure
        std::vector<double> pool(scores.scores().begin(), scores.scores().end());
        std::vector<double> replica_min(opts.mc_replicas, 1.0);
        for (int r = 0; r < opts.mc_replicas; ++r) {
            StreamRng rng(opts.seed, Stream::McReplica, static_cast<std::uint64_t>(r));
            std::vector<double> perm = pool;
            deterministic_shuffle(perm, rng);
            ScoreTable shuffled(false);
            shuffled.reserve(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i)
                shuffled.append(scores.m(i), perm[i], scores.region(i));
            replica_min[r] = bump_from_scores_once(shuffled, w, opts, m_scale).min_local_p;
        }
        int count = 0;
        for (double p : replica_min)
            if (p <= res.min_local_p) ++count;
        res.global_p_mc = (1.0 + count) / (1.0 + opts.mc_replicas);
        res.mc_replicas = opts.mc_replicas;
    }
    return res;
}

BumpHuntResult run_bumphunt(const Dataset& ds, const ScanPlan& plan,
                            const ScorePipeline& pipeline, const BumpHuntOptions& opts) {
    if (plan.windows.empty()) throw config_error("scan plan has no windows");
    if (opts.quantiles.empty()) throw config_error("need at least one quantile");
    for (double q : opts.quantiles)
        if (!(q > 0.0) || !(q < 1.0)) throw config_error("quantiles must lie in (0,1)");

    BumpHuntResult res = scan_once(ds, plan, pipeline, opts);

    if (opts.mc_replicas > 0) {
        // empirical null for the scan minimum: x permuted against m
        std::atomic<int> next{0};
        std::vector<double> replica_min(opts.mc_replicas, 1.0);
        BumpHuntOptions inner = opts;
        inner.mc_replicas = 0;
        inner.n_threads = 1;
        auto worker = [&]() {
            while (true) {
                const int r = next.fetch_add(1);
                if (r >= opts.mc_replicas) break;
                const Dataset replica =
                    permute_features(ds, opts.seed, static_cast<std::uint64_t>(r));
                const BumpHuntResult rr = scan_once(replica, plan, pipeline, inner);
                replica_min[r] = rr.min_local_p;
            }
        };
        const int n_threads = std::max(1, opts.n_threads);
        if (n_threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        int count = 0;
        for (double p : replica_min)
            if (p <= res.min_local_p) ++count;
        res.global_p_mc = (1.0 + count) / (1.0 + opts.mc_replicas);
        res.mc_replicas = opts.mc_replicas;
    }
    return res;
}

SignalEstimate estimate_signal_count(const BumpHuntResult& result) {
    SignalEstimate est;
    if (result.best_cell < 0) return est;
    const int wi = result.cells[result.best_cell].window_index;
    // loosest quantile in the best window maximizes signal efficiency
    const BumpCell* loosest = nullptr;
    for (const auto& cell : result.cells) {
        if (cell.window_index != wi || !cell.valid) continue;
        if (!loosest || cell.q > loosest->q) loosest = &cell;
    }
    if (!loosest) return est;
    est.count = static_cast<double>(loosest->n_obs) - loosest->lambda;
    est.sigma = std::sqrt(static_cast<double>(std::max<long long>(loosest->n_obs, 1)) +
                          loosest->sigma_lambda * loosest->sigma_lambda);
    est.cell_index = static_cast<int>(loosest - result.cells.data());
    est.valid = true;
    return est;
}

void write_hunt_json(const BumpHuntResult& result, const std::string& path) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : result.cells) {
        cells.push_back({{"window_index", c.window_index},
                         {"m0", c.m0},
                         {"delta", c.delta},
                         {"epsilon", c.epsilon},
                         {"q", c.q},
                         {"threshold", c.threshold},
                         {"n_sb_survivors", c.n_sb_survivors},
                         {"n_obs", c.n_obs},
                         {"lambda", c.lambda},
                         {"sigma_lambda", c.sigma_lambda},
                         {"p_local", c.p_local},
                         {"z_local", c.z_local},
                         {"p_conservative", c.p_conservative},
                         {"ks_p", std::isfinite(c.ks_p) ? c.ks_p : -1.0},
                         {"fit_converged", c.fit_converged},
                         {"valid", c.valid},
                         {"message", c.message}});
    }
    nlohmann::json j = {{"cells", cells},
                        {"n_windows", result.n_windows},
                        {"n_quantiles", result.n_quantiles},
                        {"n_independent", result.n_independent},
                        {"min_local_p", result.min_local_p},
                        {"best_cell", result.best_cell},
                        {"global_p", result.global_p},
                        {"mc_replicas", result.mc_replicas}};
    if (result.global_p_mc >= 0.0) j["global_p_mc"] = result.global_p_mc;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open output file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw data_error("failed writing " + path);
}

BumpHuntResult read_hunt_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open hunt file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("malformed hunt JSON: " + std::string(e.what()));
    }
    BumpHuntResult res;
    try {
        res.n_windows = j.at("n_windows").get<int>();
        res.n_quantiles = j.at("n_quantiles").get<int>();
        res.n_independent = j.at("n_independent").get<int>();
        res.min_local_p = j.at("min_local_p").get<double>();
        res.best_cell = j.at("best_cell").get<int>();
        res.global_p = j.at("global_p").get<double>();
        res.mc_replicas = j.at("mc_replicas").get<int>();
        if (j.contains("global_p_mc")) res.global_p_mc = j["global_p_mc"].get<double>();
        for (const auto& cj : j.at("cells")) {
            BumpCell c;
            c.window_index = cj.at("window_index").get<int>();
            c.m0 = cj.at("m0").get<double>();
            c.delta = cj.at("delta").get<double>();
            c.epsilon = cj.at("epsilon").get<double>();
            c.q = cj.at("q").get<double>();
            c.threshold = cj.at("threshold").get<double>();
            c.n_sb_survivors = cj.at("n_sb_survivors").get<long long>();
            c.n_obs = cj.at("n_obs").get<long long>();
            c.lambda = cj.at("lambda").get<double>();
            c.sigma_lambda = cj.at("sigma_lambda").get<double>();
            c.p_local = cj.at("p_local").get<double>();
            c.z_local = cj.at("z_local").get<double>();
            c.p_conservative = cj.at("p_conservative").get<double>();
            c.ks_p = cj.at("ks_p").get<double>();
            c.fit_converged = cj.at("fit_converged").get<bool>();
            c.valid = cj.at("valid").get<bool>();
            c.message = cj.at("message").get<std::string>();
            res.cells.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error("hunt JSON missing field: " + std::string(e.what()));
    }
    return res;
}

}  // namespace resonance
