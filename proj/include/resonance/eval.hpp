#pragma once

#include <string>
#include <vector>

#include "resonance/bumphunt.hpp"
#include "resonance/datagen.hpp"
#include "resonance/score_table.hpp"

namespace resonance {

struct RocPoint {
    double threshold;  // events with score >= threshold are selected
    double tpr;
    double fpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // threshold decreasing: (0,0) ... (1,1)
    long long n_signal = 0;
    long long n_background = 0;
};

// ROC over all distinct thresholds; tied scores move together.
RocCurve roc(const ScoreTable& scores);

// Trapezoidal area; equals the normalized Mann-Whitney U with ties
// counted half.
double auc(const RocCurve& curve);

struct SicPoint {
    double tpr;
    double fpr;
    double sic;  // tpr / sqrt(fpr)
};

struct SicCurve {
    std::vector<SicPoint> points;  // only where fpr >= fpr_floor
    double fpr_floor = 0.0;
    double max_sic = 0.0;
    double tpr_at_max = 0.0;
};

// Significance improvement characteristic; fpr_floor defaults to
// 10 / n_background when passed as 0.
SicCurve sic_curve(const RocCurve& curve, double fpr_floor = 0.0);

struct KeyReport {
    double estimate = 0.0;
    double sigma = 0.0;
    long long truth_count = 0;
    double pull = 0.0;      // (estimate - truth) / sigma
    bool localized = false; // best window SR contains the true m0
    double best_m0 = 0.0, best_delta = 0.0;
    double global_p = 1.0;
    double global_p_mc = -1.0;
};

// Challenge-deliverable comparison. Verifies the sealed-key digest against
// the dataset file first (digest_mismatch_error on failure).
KeyReport compare_to_key(const BumpHuntResult& hunt, double estimate, double sigma,
                         const SealedKey& key, const std::string& dataset_path);

void write_roc_csv(const RocCurve& curve, const std::string& path);
void write_sic_csv(const SicCurve& curve, const std::string& path);

}  // namespace resonance
