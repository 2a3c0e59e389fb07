#include "resonance/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "resonance/rng.hpp"

namespace resonance {

namespace {

constexpr std::size_t kRankWindow = 2000;  // nearest-in-m reference sample size
constexpr int kSrSlices = 8;               // m granularity for SR reference scoring

// Randomized PIT value of s against a sorted reference sample: ties are
// spread uniformly with the event's own jitter u, values between reference
// points interpolate linearly. For a sample member (or anything exchangeable
// with one) the result is exactly uniform on (0,1).
double pit_value(const std::vector<double>& sorted, double s, double u) {
    const std::size_t n = sorted.size();
    const std::size_t lo = std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin();
    const std::size_t hi = std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin();
    double r;
    if (hi > lo) {
        r = (static_cast<double>(lo) + u * static_cast<double>(hi - lo)) /
            static_cast<double>(n);
    } else if (lo == 0) {
        r = u * 0.5 / static_cast<double>(n);
    } else if (lo == n) {
        r = 1.0 - u * 0.5 / static_cast<double>(n);
    } else {
        const double a = sorted[lo - 1], b = sorted[lo];
        const double frac = (b > a) ? (s - a) / (b - a) : u;
        r = (static_cast<double>(lo - 1) + frac) / static_cast<double>(n);
    }
    return std::clamp(r, 1e-12, 1.0 - 1e-12);
}

// Fenwick tree over dense score ranks, for sliding-window order statistics.
class Fenwick {
  public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t i, long long delta) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }
    long long prefix(std::size_t i) const {  // count of entries with rank < i
        long long s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

  private:
    std::vector<long long> tree_;
};

struct SbEvent {
    double m;
    double score;
    std::size_t index;  // row in the original table
};

// Ranks each sideband event against the kRankWindow nearest-in-m neighbours
// of its own side, via a two-pointer sliding window over a Fenwick tree.
// Randomized ranks of exchangeable events are exactly uniform, so under the
// null the sideband pass rate of any quantile cut is flat in m no matter
// what the density estimator did.
void rank_side(std::vector<SbEvent>& ev, std::uint64_t seed, std::vector<double>& out) {
    if (ev.empty()) return;
    std::sort(ev.begin(), ev.end(),
              [](const SbEvent& a, const SbEvent& b) { return a.m < b.m; });
    const std::size_t n = ev.size();
    const std::size_t span = std::min(n, kRankWindow);

    std::vector<double> uniq(n);
    for (std::size_t i = 0; i < n; ++i) uniq[i] = ev[i].score;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto rank_of = [&](double s) {
        return static_cast<std::size_t>(
            std::lower_bound(uniq.begin(), uniq.end(), s) - uniq.begin());
    };

    Fenwick tree(uniq.size());
    std::size_t lo = 0, hi = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t want_lo = (j > span / 2) ? j - span / 2 : 0;
        want_lo = std::min(want_lo, n - span);
        const std::size_t want_hi = want_lo + span;
        while (hi < want_hi) tree.add(rank_of(ev[hi++].score), +1);
        while (lo < want_lo) tree.add(rank_of(ev[lo++].score), -1);

        const std::size_t r = rank_of(ev[j].score);
        const long long less = tree.prefix(r);
        const long long eq = tree.prefix(r + 1) - less;
        StreamRng rng(seed, Stream::RankJitter, ev[j].index);
        const double u = rng.next_unit();
        // the event itself is in the window, so eq >= 1
        const double value = (static_cast<double>(less) + u * static_cast<double>(eq)) /
                             static_cast<double>(span);
        out[ev[j].index] = std::clamp(value, 1e-12, 1.0 - 1e-12);
    }
}

int half_of(std::uint64_t seed, std::size_t index) {
    return static_cast<int>(mix64(mix64(seed ^ 0xCF1Dull) ^ index) & 1);
}

}  // namespace

// Split-half cross-fitted ratio scoring plus conditional rank calibration.
//
// Two disciplines make the scores quantile-calibrated (the sideband cut and
// the smooth survivor fit both assume that, under the null, the score
// distribution is identical in every m slice):
//  - every event is scored by densities fit on the opposite half of the
//    data, since an in-sample fit lifts its own members' ratios;
//  - scores are replaced by randomized ranks against reference populations
//    that are exchangeable with the event by construction. Sideband events
//    rank among nearest-in-m neighbours of their side; SR events rank among
//    near-gap sideband events of their own half whose feature vectors are
//    re-scored at the SR event's own m with the same opposite-half fields,
//    so every shared estimator fluctuation enters event and references
//    identically.
ScorePipeline make_anode_pipeline(DensityConfig cfg) {
    return [cfg](const Dataset& ds, const WindowSpec& w) {
        const Dataset blind = ds.without_labels();
        Dataset sr_half[2]{Dataset(blind.dim(), false), Dataset(blind.dim(), false)};
        Dataset sb_half[2]{Dataset(blind.dim(), false), Dataset(blind.dim(), false)};
        for (std::size_t i = 0; i < blind.size(); ++i) {
            const int h = half_of(cfg.seed, i);
            if (assign_region(blind.m(i), w) == Region::SR)
                sr_half[h].append(blind.m(i), blind.x(i));
            else
                sb_half[h].append(blind.m(i), blind.x(i));
        }
        CondDensity p_sb[2], p_sr[2];
        for (int h = 0; h < 2; ++h) {
            DensityConfig half_cfg = cfg;
            half_cfg.seed = mix64(cfg.seed ^ (0xAB5Eull + h));
            p_sb[h] = fit_sideband_density(sb_half[h], w, half_cfg);
            p_sr[h] = fit_sr_density(sr_half[h], half_cfg, &p_sb[h]);
        }
        auto raw_score = [&](int fields, std::span<const double> x, double m) {
            return std::log(p_sr[fields].pdf_floored(x, m)) -
                   std::log(p_sb[fields].pdf_floored(x, m));
        };

        // raw scores (each event against the opposite half's fields)
        std::vector<double> raw(ds.size());
        std::vector<SbEvent> left, right;
        std::vector<std::size_t> sr_rows;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const int other = 1 - half_of(cfg.seed, i);
            raw[i] = raw_score(other, ds.x(i), ds.m(i));
            if (assign_region(ds.m(i), w) == Region::SR)
                sr_rows.push_back(i);
            else
                (ds.m(i) < w.m0 ? left : right).push_back({ds.m(i), raw[i], i});
        }
        if (left.empty() || right.empty())
            throw data_error("rank calibration needs events in both sidebands");

        std::vector<double> calibrated(ds.size(), 0.0);
        rank_side(left, cfg.seed, calibrated);
        rank_side(right, cfg.seed, calibrated);

        // SR ranks: near-gap references of the event's own half, re-scored at
        // the SR slice's m with the opposite half's fields. The reference
        // sample must dwarf the SR population: its shared quantile noise
        // moves every SR rank coherently, so n_ref ~ 3x n_SR keeps that
        // contribution below the Poisson scale of the SR count.
        std::vector<std::size_t> refs_by_half[2];
        {
            const std::size_t want =
                std::max<std::size_t>(kRankWindow / 2, (3 * sr_rows.size() + 1) / 2);
            const std::size_t nl = std::min(left.size(), want);
            const std::size_t nr = std::min(right.size(), want);
            // left/right are m-sorted after rank_side
            for (std::size_t k = left.size() - nl; k < left.size(); ++k)
                refs_by_half[half_of(cfg.seed, left[k].index)].push_back(left[k].index);
            for (std::size_t k = 0; k < nr; ++k)
                refs_by_half[half_of(cfg.seed, right[k].index)].push_back(right[k].index);
        }
        for (int h = 0; h < 2; ++h)
            if (refs_by_half[h].size() < 50)
                throw data_error("too few near-gap sideband events for SR calibration");

        const double slice_w = (w.sr_hi() - w.sr_lo()) / kSrSlices;
        std::vector<double> ref_scores[2][kSrSlices];
        for (int h = 0; h < 2; ++h) {
            for (int k = 0; k < kSrSlices; ++k) {
                const double m_c = w.sr_lo() + (k + 0.5) * slice_w;
                auto& scores = ref_scores[h][k];
                scores.reserve(refs_by_half[h].size());
                for (std::size_t r : refs_by_half[h])
                    scores.push_back(raw_score(1 - h, ds.x(r), m_c));
                std::sort(scores.begin(), scores.end());
            }
        }
        for (std::size_t i : sr_rows) {
            const int h = half_of(cfg.seed, i);
            int k = static_cast<int>((ds.m(i) - w.sr_lo()) / slice_w);
            k = std::clamp(k, 0, kSrSlices - 1);
            const double m_c = w.sr_lo() + (k + 0.5) * slice_w;
            const double s = raw_score(1 - h, ds.x(i), m_c);
            StreamRng rng(cfg.seed, Stream::RankJitter, i);
            calibrated[i] = pit_value(ref_scores[h][k], s, rng.next_unit());
        }

        ScoreTable out(ds.labeled());
        out.reserve(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            std::optional<Label> l;
            if (ds.labeled()) l = ds.label(i);
            out.append(ds.m(i), calibrated[i], assign_region(ds.m(i), w), l);
        }
        return out;
    };
}

ScorePipeline make_cwola_pipeline(ClassifierConfig cfg) {
    return [cfg](const Dataset& ds, const WindowSpec& w) {
        const Scorer scorer = train_cwola(ds, w, cfg);
        return scorer.score(ds, w);
    };
}

ScorePipeline make_supervised_pipeline(ClassifierConfig cfg) {
    return [cfg](const Dataset& ds, const WindowSpec& w) {
        const Scorer scorer = train_supervised(ds, cfg);
        return scorer.score(ds, w);
    };
}

}  // namespace resonance
