#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "resonance/bumphunt.hpp"
#include "resonance/datagen.hpp"
#include "resonance/pipelines.hpp"
#include "resonance/rng.hpp"
#include "resonance/stats.hpp"

using namespace resonance;

TEST_SUITE_BEGIN("bumphunt");

namespace {

// f constant over the SR: alpha1 = alpha2 = alpha3 = 0 makes f == alpha0.
BackgroundFit constant_fit(double c) {
    BackgroundFit fit;
    fit.alpha0 = c;
    fit.m_scale = suggested_m_scale(6.0);
    fit.range_lo = 2.0;
    fit.range_hi = 6.0;
    fit.covariance_ok = false;
    return fit;
}

ScoreTable random_scores(std::size_t n_sb, std::size_t n_sr, std::uint64_t seed) {
    ScoreTable st(false);
    StreamRng rng(seed, Stream::TestData);
    for (std::size_t i = 0; i < n_sb; ++i)
        st.append(3.0, rng.next_unit(), i % 2 ? Region::SS : Region::FarSB);
    for (std::size_t i = 0; i < n_sr; ++i) st.append(3.5, rng.next_unit(), Region::SR);
    return st;
}

}  // namespace

TEST_CASE("poisson tail values and monotonicity") {
    CHECK(poisson_pvalue(0, 5.0) == 1.0);
    CHECK(poisson_pvalue(10, 5.0) == doctest::Approx(0.031828).epsilon(1e-4));
    CHECK(poisson_pvalue(10, 5.0) ==
          doctest::Approx(oracles::poisson_tail_direct(10, 5.0)).epsilon(1e-12));

    // matches direct summation to 1e-12 for lambda <= 50
    StreamRng rng(3, Stream::TestData);
    for (int t = 0; t < 300; ++t) {
        const double lambda = 0.1 + 49.8 * rng.next_unit();
        const long long n = static_cast<long long>(rng.next_below(150));
        CHECK(std::fabs(poisson_pvalue(n, lambda) - oracles::poisson_tail_direct(n, lambda)) <
              1e-12);
    }

    // decreasing in n_obs, increasing in lambda
    for (long long n = 0; n < 40; ++n)
        CHECK(poisson_pvalue(n + 1, 7.3) < poisson_pvalue(n, 7.3));
    double prev = 0.0;
    for (double lam = 0.5; lam < 30; lam += 0.5) {
        const double p = poisson_pvalue(12, lam);
        CHECK(p >= prev);
        prev = p;
    }

    // the conventional five sigma threshold
    CHECK(z_of_pvalue(3e-7) == doctest::Approx(5.0).epsilon(2e-3));
    CHECK_THROWS_AS(poisson_pvalue(3, 0.0), config_error);
}

TEST_CASE("quantile selection keeps the expected sideband fraction") {
    const ScoreTable st = random_scores(10000, 1000, 5);
    const SelectResult sel = select_by_quantile(st, 0.1);
    long long sb_kept = 0;
    for (std::size_t i = 0; i < sel.selected.size(); ++i)
        if (sel.selected.region(i) != Region::SR) ++sb_kept;
    // ~1000 of 1e4 survive, binomial-ish tolerance
    CHECK(sb_kept > 850);
    CHECK(sb_kept < 1150);

    // re-applying the same threshold is idempotent
    const ScoreTable again = sel.selected.filtered_above(sel.threshold);
    CHECK(again.size() == sel.selected.size());

    CHECK_THROWS_AS(select_by_quantile(st, 1.0), config_error);
    CHECK_THROWS_AS(select_by_quantile(st, 0.0), config_error);
    ScoreTable sr_only(false);
    sr_only.append(3.5, 0.5, Region::SR);
    CHECK_THROWS_AS(select_by_quantile(sr_only, 0.1), data_error);
}

TEST_CASE("background fit round-trips the generating parameters") {
    // sample m from the known falling shape via the tabulated sampler
    ToyConfig cfg;
    cfg.seed = 17;
    const SpectrumShape truth{SpectrumKind::FallingPower, 1.0, 1.5, -1.0, -0.1};
    const SpectrumTable table(truth, 2.0, 6.0);
    const std::size_t n = 60000;
    StreamRng rng(cfg.seed, Stream::TestData);
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = table.sample(rng.next_unit());

    FitBinning binning;
    binning.mode = FitBinning::Mode::EqualWidth;
    binning.n_bins = 40;
    binning.lo = 2.0;
    binning.hi = 6.0;
    const double m_scale = suggested_m_scale(6.0);
    const BackgroundFit fit = fit_background_shape(m, binning, m_scale);
    CHECK(fit.converged);
    CHECK(fit.covariance_ok);

    // predicted counts vs the true expected counts, every bin within 3 sigma
    for (int b = 0; b < binning.n_bins; ++b) {
        const double lo = 2.0 + 4.0 * b / binning.n_bins;
        const double hi = 2.0 + 4.0 * (b + 1) / binning.n_bins;
        const double nu_true = n * (table.cdf(hi) - table.cdf(lo));
        const double nu_fit =
            integrate_adaptive([&](double x) { return fit.density(x); }, lo, hi, 1e-9);
        CHECK(std::fabs(nu_fit - nu_true) < 3.0 * std::sqrt(std::max(nu_true, 1.0)));
    }

    // goodness of fit on its own input
    CHECK(fit.ks_p > 0.05);
    CHECK(fit.chi2 / fit.ndf < 2.0);
}

TEST_CASE("duplicating every event doubles alpha0 only") {
    const SpectrumShape truth{SpectrumKind::FallingPower, 1.0, 1.5, -1.0, -0.1};
    const SpectrumTable table(truth, 2.0, 6.0);
    StreamRng rng(23, Stream::TestData);
    std::vector<double> m(30000);
    for (auto& v : m) v = table.sample(rng.next_unit());
    std::vector<double> doubled = m;
    doubled.insert(doubled.end(), m.begin(), m.end());

    FitBinning binning;
    binning.mode = FitBinning::Mode::EqualWidth;
    binning.n_bins = 40;
    binning.lo = 2.0;
    binning.hi = 6.0;
    const double m_scale = suggested_m_scale(6.0);
    const BackgroundFit f1 = fit_background_shape(m, binning, m_scale);
    const BackgroundFit f2 = fit_background_shape(doubled, binning, m_scale);
    CHECK(f2.alpha0 / f1.alpha0 == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(std::fabs(f2.alpha1 - f1.alpha1) < 3.0 * std::sqrt(f1.covariance[1 * 4 + 1]));
    CHECK(std::fabs(f2.alpha2 - f1.alpha2) < 3.0 * std::sqrt(f1.covariance[2 * 4 + 2]));
    CHECK(std::fabs(f2.alpha3 - f1.alpha3) < 3.0 * std::sqrt(f1.covariance[3 * 4 + 3]));
}

TEST_CASE("ks p-values are uniform under the null") {
    // fit once, then resample from the fitted CDF and collect the p-values
    const SpectrumShape truth{SpectrumKind::Exponential, 1.0, 3.0, 0.0, 0.0};
    const SpectrumTable table(truth, 2.0, 6.0);
    StreamRng rng(29, Stream::TestData);
    std::vector<double> m(20000);
    for (auto& v : m) v = table.sample(rng.next_unit());
    FitBinning binning;
    binning.mode = FitBinning::Mode::EqualWidth;
    binning.n_bins = 40;
    binning.lo = 2.0;
    binning.hi = 6.0;
    const BackgroundFit fit = fit_background_shape(m, binning, suggested_m_scale(6.0));

    auto sample_from_fit = [&](std::size_t n, StreamRng& r) {
        // inverse transform on the fit's own CDF tabulation
        std::vector<double> out(n);
        for (auto& v : out) {
            const double u = r.next_unit();
            auto it = std::lower_bound(fit.cdf_values.begin(), fit.cdf_values.end(), u);
            const std::size_t i =
                std::min(static_cast<std::size_t>(it - fit.cdf_values.begin()),
                         fit.cdf_values.size() - 1);
            const std::size_t j = i > 0 ? i - 1 : 0;
            const double c0 = fit.cdf_values[j], c1 = fit.cdf_values[i];
            const double t = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.5;
            v = fit.cdf_knots[j] + t * (fit.cdf_knots[i] - fit.cdf_knots[j]);
        }
        return out;
    };

    const int reps = 500;
    std::vector<double> pvals(reps);
    for (int r = 0; r < reps; ++r) {
        StreamRng rr(1000 + r, Stream::TestData);
        pvals[r] = ks_pvalue(sample_from_fit(1000, rr), fit);
    }
    std::sort(pvals.begin(), pvals.end());
    // KS of the p-values against uniform
    const double d = ks_statistic_from_cdf(pvals);
    CHECK(kolmogorov_tail(std::sqrt(static_cast<double>(reps)) * d) > 0.01);

    CHECK_THROWS_AS(ks_pvalue(std::vector<double>{3.0, 3.0, 3.0}, fit), data_error);
    CHECK_THROWS_AS(ks_pvalue(std::vector<double>(50, 3.0), fit), data_error);
}

TEST_CASE("expected SR count: constant integrand and quadrature oracle") {
    const BackgroundFit fit = constant_fit(123.5);
    const WindowSpec w = make_window(3.5, 0.1, 0.3, 2.0, 6.0);
    const auto [lambda, sigma] = expected_sr_count(fit, w);
    CHECK(lambda == doctest::Approx(123.5 * 0.2).epsilon(1e-10));
    CHECK(sigma == 0.0);  // no covariance available

    // against a brute-force Riemann sum on a curved fit
    BackgroundFit curved = constant_fit(40.0);
    curved.alpha1 = 2.0;
    curved.alpha2 = -1.0;
    curved.alpha3 = -0.3;
    const auto [l2, s2] = expected_sr_count(curved, w);
    const double ref = oracles::riemann([&](double x) { return curved.density(x); },
                                        w.sr_lo(), w.sr_hi(), 1000000);
    CHECK(l2 == doctest::Approx(ref).epsilon(1e-6));

    // halving delta roughly halves lambda for a slowly varying shape
    const WindowSpec half = make_window(3.5, 0.05, 0.3, 2.0, 6.0);
    const auto [l3, s3] = expected_sr_count(curved, half);
    CHECK(std::fabs(l3 / l2 - 0.5) < 0.05);

    CHECK_THROWS_AS(
        expected_sr_count(curved, make_window(1.5, 0.1, 0.3, 1.0, 6.0)), data_error);
}

TEST_CASE("lambda uncertainty matches finite-difference propagation") {
    const SpectrumShape truth{SpectrumKind::FallingPower, 1.0, 1.5, -1.0, -0.1};
    const SpectrumTable table(truth, 2.0, 6.0);
    StreamRng rng(31, Stream::TestData);
    std::vector<double> m(40000);
    for (auto& v : m) v = table.sample(rng.next_unit());
    FitBinning binning;
    binning.mode = FitBinning::Mode::EqualWidth;
    binning.n_bins = 40;
    binning.lo = 2.0;
    binning.hi = 6.0;
    BackgroundFit fit = fit_background_shape(m, binning, suggested_m_scale(6.0));
    REQUIRE(fit.covariance_ok);
    const WindowSpec w = make_window(3.5, 0.1, 0.3, 2.0, 6.0);
    const auto [lambda, sigma] = expected_sr_count(fit, w);

    // finite-difference gradient of lambda in the fitted parameters
    std::array<double, 4> grad{};
    std::array<double*, 4> slots = {&fit.alpha0, &fit.alpha1, &fit.alpha2, &fit.alpha3};
    for (int i = 0; i < 4; ++i) {
        const double saved = *slots[i];
        const double h = std::max(1e-6, 1e-5 * std::fabs(saved));
        *slots[i] = saved + h;
        const double up = expected_sr_count(fit, w).first;
        *slots[i] = saved - h;
        const double dn = expected_sr_count(fit, w).first;
        *slots[i] = saved;
        grad[i] = (up - dn) / (2 * h);
    }
    const double var_fd = quad_form(std::span<const double>(fit.covariance), grad);
    CHECK(sigma == doctest::Approx(std::sqrt(var_fd)).epsilon(1e-3));
    CHECK(sigma / lambda < 0.2);
}

TEST_CASE("single window and quantile: global p equals local p") {
    ToyConfig cfg = null_toy_preset(211);
    cfg.n_background = 40000;
    const Dataset ds = generate_background(cfg).without_labels();
    ScanPlan plan = plan_scan(2.0, 6.0, 0.1, 0.3, 10.0);  // exactly one window
    REQUIRE(plan.windows.size() == 1);

    BumpHuntOptions opts;
    opts.quantiles = {0.1};
    opts.seed = cfg.seed;
    const auto result = run_bumphunt(ds, plan, make_anode_pipeline(DensityConfig{}), opts);
    REQUIRE(result.cells.size() == 1);
    REQUIRE(result.cells[0].valid);
    CHECK(result.global_p == doctest::Approx(result.min_local_p));
    CHECK(result.n_independent == 1);
}

TEST_CASE("global p never undercuts the minimal local p") {
    ToyConfig cfg = null_toy_preset(223);
    cfg.n_background = 60000;
    const Dataset ds = generate_background(cfg).without_labels();
    const ScanPlan plan = plan_scan(2.0, 6.0, 0.1, 0.3, 0.4, 2.0, 5.0);
    BumpHuntOptions opts;
    opts.quantiles = {0.1, 0.01};
    opts.n_threads = 2;
    opts.seed = cfg.seed;
    const auto result = run_bumphunt(ds, plan, make_anode_pipeline(DensityConfig{}), opts);
    int n_valid = 0;
    for (const auto& cell : result.cells)
        if (cell.valid) ++n_valid;
    CHECK(n_valid > 0);
    CHECK(result.global_p >= result.min_local_p);
    CHECK(result.global_p <= 1.0);
    for (const auto& cell : result.cells) {
        if (!cell.valid) continue;
        CHECK(cell.p_local >= 0.0);
        CHECK(cell.p_local <= 1.0);
        CHECK(cell.lambda > 0.0);
        CHECK(cell.p_conservative >= cell.p_local - 1e-12);
    }
}

TEST_CASE("windows that cannot be fit are excluded and reported") {
    ToyConfig cfg = null_toy_preset(227);
    cfg.n_background = 3000;  // far too few events for the outer windows
    const Dataset ds = generate_background(cfg).without_labels();
    const ScanPlan plan = plan_scan(2.0, 6.0, 0.1, 0.3, 0.5);
    BumpHuntOptions opts;
    opts.quantiles = {0.1};
    const auto result = run_bumphunt(ds, plan, make_anode_pipeline(DensityConfig{}), opts);
    bool any_invalid = false;
    for (const auto& cell : result.cells) {
        if (!cell.valid) {
            any_invalid = true;
            CHECK_FALSE(cell.message.empty());
        }
    }
    CHECK(any_invalid);
}

TEST_CASE("injected signal is localized and the estimate tracks the truth") {
    int localized = 0, pulls_ok = 0;
    const int n_seeds = 5;
    for (int s = 0; s < n_seeds; ++s) {
        ToyConfig cfg = detectable_toy_preset(900 + s);
        cfg.n_background = 60000;
        cfg.n_signal = 600;
        const Dataset ds =
            mix_and_shuffle(generate_background(cfg), generate_signal(cfg), cfg.seed)
                .without_labels();
        const ScanPlan plan = plan_scan(cfg.m_min, cfg.m_max, 0.1, 0.3, 0.1, 2.8, 4.4);
        BumpHuntOptions opts;
        // the loosest quantile feeds the signal-count estimate
        opts.quantiles = {0.3, 0.1, 0.01};
        opts.n_threads = 2;
        opts.seed = cfg.seed;
        DensityConfig dc;
        dc.kind = EstimatorKind::GaussianMixture;
        dc.gmm.K = 3;
        dc.gmm.em_max_iter = 50;
        dc.seed = cfg.seed;
        const auto result = run_bumphunt(ds, plan, make_anode_pipeline(dc), opts);
        REQUIRE(result.best_cell >= 0);
        const BumpCell& best = result.cells[result.best_cell];
        if (cfg.signal_m0 > best.m0 - best.delta && cfg.signal_m0 < best.m0 + best.delta)
            ++localized;
        const SignalEstimate est = estimate_signal_count(result);
        REQUIRE(est.valid);
        // the loosest-quantile excess estimates the signal passing the cut;
        // compare against the injected count
        const double pull = (est.count - static_cast<double>(cfg.n_signal)) / est.sigma;
        if (std::fabs(pull) < 3.0) ++pulls_ok;
    }
    CHECK(localized >= 4);
    CHECK(pulls_ok >= 4);
}

TEST_CASE("monte carlo calibration returns a sane empirical global p") {
    ToyConfig cfg = null_toy_preset(331);
    cfg.n_background = 30000;
    const Dataset ds = generate_background(cfg).without_labels();
    const ScanPlan plan = plan_scan(2.0, 6.0, 0.15, 0.45, 0.6, 2.0, 5.0);
    BumpHuntOptions opts;
    opts.quantiles = {0.1};
    opts.mc_replicas = 19;
    opts.n_threads = 2;
    opts.seed = cfg.seed;
    const auto result = run_bumphunt(ds, plan, make_anode_pipeline(DensityConfig{}), opts);
    CHECK(result.mc_replicas == 19);
    CHECK(result.global_p_mc >= 1.0 / 20);
    CHECK(result.global_p_mc <= 1.0);
}

TEST_CASE("hunt json round trip") {
    BumpHuntResult res;
    res.n_windows = 2;
    res.n_quantiles = 1;
    res.n_independent = 2;
    res.min_local_p = 0.01;
    res.best_cell = 1;
    res.global_p = 0.02;
    for (int i = 0; i < 2; ++i) {
        BumpCell c;
        c.window_index = i;
        c.m0 = 3.0 + i;
        c.delta = 0.1;
        c.epsilon = 0.3;
        c.q = 0.1;
        c.n_obs = 100 + i;
        c.lambda = 90.0;
        c.sigma_lambda = 5.0;
        c.p_local = i ? 0.01 : 0.5;
        c.valid = true;
        res.cells.push_back(c);
    }
    const std::string path = "/tmp/resonance_hunt_test.json";
    write_hunt_json(res, path);
    const BumpHuntResult back = read_hunt_json(path);
    CHECK(back.cells.size() == 2);
    CHECK(back.best_cell == 1);
    CHECK(back.cells[1].n_obs == 101);
    CHECK(back.global_p == res.global_p);
    std::remove(path.c_str());
}

TEST_SUITE_END();
