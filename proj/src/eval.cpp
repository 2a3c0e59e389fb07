#include "resonance/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace resonance {

RocCurve roc(const ScoreTable& scores) {
    if (!scores.labeled()) throw data_error("ROC needs truth labels");
    const std::size_t n = scores.size();
    long long n_sig = 0, n_bkg = 0;
    for (std::size_t i = 0; i < n; ++i)
        (scores.label(i) == Label::Signal ? n_sig : n_bkg)++;
    if (n_sig == 0 || n_bkg == 0) throw data_error("ROC needs both classes present");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores.score(a) > scores.score(b);
    });

    RocCurve curve;
    curve.n_signal = n_sig;
    curve.n_background = n_bkg;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        const double s = scores.score(idx[i]);
        std::size_t j = i;
        while (j < n && scores.score(idx[j]) == s) {
            (scores.label(idx[j]) == Label::Signal ? tp : fp)++;
            ++j;
        }
        curve.points.push_back({s, static_cast<double>(tp) / n_sig,
                                static_cast<double>(fp) / n_bkg});
        i = j;
    }
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    }
    return area;
}

SicCurve sic_curve(const RocCurve& curve, double fpr_floor) {
    if (fpr_floor == 0.0) fpr_floor = 10.0 / static_cast<double>(curve.n_background);
    if (!(fpr_floor > 0.0)) throw config_error("fpr_floor must be positive");
    SicCurve out;
    out.fpr_floor = fpr_floor;
    for (const auto& p : curve.points) {
        if (p.fpr < fpr_floor) continue;
        const double sic = p.tpr / std::sqrt(p.fpr);
        out.points.push_back({p.tpr, p.fpr, sic});
        if (sic > out.max_sic) {
            out.max_sic = sic;
            out.tpr_at_max = p.tpr;
        }
    }
    if (out.points.empty()) throw data_error("entire ROC curve lies below the FPR floor");
    return out;
}

KeyReport compare_to_key(const BumpHuntResult& hunt, double estimate, double sigma,
                         const SealedKey& key, const std::string& dataset_path) {
    verify_key_digest(key, dataset_path);
    if (!(sigma > 0.0)) throw config_error("signal estimate needs a positive sigma");
    if (hunt.best_cell < 0) throw data_error("bump hunt result has no valid cell");
    KeyReport rep;
    rep.estimate = estimate;
    rep.sigma = sigma;
    rep.truth_count = key.signal_count;
    rep.pull = (estimate - static_cast<double>(key.signal_count)) / sigma;
    const BumpCell& best = hunt.cells[hunt.best_cell];
    rep.best_m0 = best.m0;
    rep.best_delta = best.delta;
    rep.localized =
        key.signal_m0 > best.m0 - best.delta && key.signal_m0 < best.m0 + best.delta;
    rep.global_p = hunt.global_p;
    rep.global_p_mc = hunt.global_p_mc;
    return rep;
}

namespace {

void append_num(std::string& buf, double v) {
    char tmp[32];
    const int n = std::snprintf(tmp, sizeof(tmp), "%.17g", v);
    buf.append(tmp, static_cast<std::size_t>(n));
}

}  // namespace

void write_roc_csv(const RocCurve& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open output file: " + path);
    std::string buf = "threshold,tpr,fpr\n";
    for (const auto& p : curve.points) {
        append_num(buf, p.threshold);
        buf += ',';
        append_num(buf, p.tpr);
        buf += ',';
        append_num(buf, p.fpr);
        buf += '\n';
    }
    out << buf;
    if (!out) throw data_error("failed writing " + path);
}

void write_sic_csv(const SicCurve& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open output file: " + path);
    std::string buf = "tpr,fpr,sic\n";
    for (const auto& p : curve.points) {
        append_num(buf, p.tpr);
        buf += ',';
        append_num(buf, p.fpr);
        buf += ',';
        append_num(buf, p.sic);
        buf += '\n';
    }
    out << buf;
    if (!out) throw data_error("failed writing " + path);
}

}  // namespace resonance
