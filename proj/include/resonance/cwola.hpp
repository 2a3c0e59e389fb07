#pragma once

#include <cstdint>
#include <vector>

#include "resonance/core.hpp"
#include "resonance/nnet.hpp"
#include "resonance/score_table.hpp"

namespace resonance {

struct ClassifierConfig {
    std::vector<int> hidden{64, 64};  // empty -> logistic regression
    double learning_rate = 0.02;
    double momentum = 0.9;
    int batch_size = 256;
    int max_epochs = 40;
    int patience = 4;
    int k_folds = 5;
    double val_fraction = 0.2;  // carved out of each fold's training portion
    bool standardize = true;
    int n_threads = 1;  // folds are independent; results do not depend on this
    std::uint64_t seed = 1;

    void validate() const;
};

// Label-blind view of a dataset: scoring stages receive this, so truth
// labels are structurally out of reach.
struct FeatureView {
    std::span<const double> m;
    std::span<const double> x;  // row-major n x d
    int d = 0;

    std::size_t size() const { return m.size(); }
    std::span<const double> row(std::size_t i) const {
        return x.subspan(i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    }
};

FeatureView features_of(const Dataset& ds);

struct FoldDiagnostics {
    double val_loss = 0.0;
    int best_epoch = -1;
    bool converged = true;
};

// Trained k-fold ensemble. Immutable after training; scoring is const and
// thread-safe. Events seen in training are scored out-of-fold; anything
// else gets the ensemble average.
class Scorer {
  public:
    std::size_t n_folds() const { return nets_.size(); }
    const std::vector<std::int8_t>& fold_map() const { return fold_of_; }
    const std::vector<FoldDiagnostics>& diagnostics() const { return diag_; }
    bool has_window() const { return has_window_; }
    const WindowSpec& window() const { return window_; }

    double score_out_of_fold(std::span<const double> x, int fold) const;
    double score_ensemble(std::span<const double> x) const;

    // Score per event; out-of-fold when ds is the training dataset.
    ScoreTable score(const Dataset& ds, const WindowSpec& w) const;

    // Held-out SR-vs-SS AUC on the training dataset: the CWoLa null
    // diagnostic (should be ~0.5 when the features carry no m information).
    double heldout_region_auc(const Dataset& ds) const;

  private:
    friend Scorer train_cwola(const Dataset&, const WindowSpec&, const ClassifierConfig&);
    friend Scorer train_supervised(const Dataset&, const ClassifierConfig&);
    friend Scorer train_folds(const FeatureView&, const std::vector<std::int8_t>&,
                              const std::vector<float>&, const ClassifierConfig&, int);

    std::vector<Mlp> nets_;
    std::vector<std::vector<double>> mu_, sd_;  // per-fold standardization
    std::vector<std::int8_t> fold_of_;          // -1: not a training event
    std::vector<std::int8_t> target_of_;        // training target per event (-1 unused)
    std::vector<FoldDiagnostics> diag_;
    std::uint64_t train_digest_ = 0;
    int d_ = 0;
    WindowSpec window_{};
    bool has_window_ = false;
};

// SR-vs-SS training on x only (m never enters the classifier inputs).
Scorer train_cwola(const Dataset& ds, const WindowSpec& w, const ClassifierConfig& cfg);

// Same machinery with truth labels as targets; the performance ceiling.
Scorer train_supervised(const Dataset& ds, const ClassifierConfig& cfg);

// Out-of-fold AUC of scores against binary targets (1 vs 0).
double auc_scores(std::span<const double> scores, std::span<const std::int8_t> targets);

}  // namespace resonance
