#include "resonance/cwola.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "resonance/rng.hpp"

namespace resonance {

void ClassifierConfig::validate() const {
    if (k_folds < 2) throw config_error("k_folds must be >= 2");
    for (int h : hidden)
        if (h < 1) throw config_error("hidden layer widths must be positive");
    if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
    if (patience < 0) throw config_error("patience must be >= 0");
    if (!(val_fraction > 0.0) || !(val_fraction < 0.5))
        throw config_error("val_fraction must be in (0, 0.5)");
}

FeatureView features_of(const Dataset& ds) {
    return FeatureView{ds.m_column(), ds.x_flat(), ds.dim()};
}

namespace {

// Deterministic fold assignment from (seed, event index).
std::int8_t fold_hash(std::uint64_t seed, std::size_t index, int k) {
    return static_cast<std::int8_t>(mix64(mix64(seed ^ 0xF01Dull) ^ index) % k);
}

bool val_hash(std::uint64_t seed, std::size_t index, double frac) {
    const double u =
        (static_cast<double>(mix64(mix64(seed ^ 0x7A1ull) ^ index) >> 11) + 0.5) * 0x1p-53;
    return u < frac;
}

}  // namespace

// Core k-fold trainer shared by CWoLa and supervised training.
// targets: 0/1 per event, -1 for events not used in training.
Scorer train_folds(const FeatureView& fv, const std::vector<std::int8_t>& targets,
                   const std::vector<float>& class_weight, const ClassifierConfig& cfg,
                   int n_threads) {
    const std::size_t n = fv.size();
    Scorer scorer;
    scorer.d_ = fv.d;
    scorer.fold_of_.assign(n, -1);
    scorer.target_of_ = targets;

    std::vector<std::uint32_t> used;
    for (std::size_t i = 0; i < n; ++i)
        if (targets[i] >= 0) used.push_back(static_cast<std::uint32_t>(i));
    if (used.size() < static_cast<std::size_t>(10 * cfg.k_folds))
        throw data_error("too few training events: " + std::to_string(used.size()) +
                         " for k=" + std::to_string(cfg.k_folds) + " folds");

    for (std::uint32_t i : used) scorer.fold_of_[i] = fold_hash(cfg.seed, i, cfg.k_folds);

    std::vector<float> y(n, 0.0f), w(n, 0.0f);
    for (std::uint32_t i : used) {
        y[i] = static_cast<float>(targets[i]);
        w[i] = class_weight[targets[i]];
    }

    scorer.nets_.reserve(cfg.k_folds);
    scorer.mu_.resize(cfg.k_folds);
    scorer.sd_.resize(cfg.k_folds);
    scorer.diag_.resize(cfg.k_folds);

    // per-fold training rows (standardized copies are fold-local)
    auto train_one = [&](int fold) -> std::pair<Mlp, FoldDiagnostics> {
        std::vector<std::uint32_t> train_rows, val_rows;
        for (std::uint32_t i : used) {
            if (scorer.fold_of_[i] == fold) continue;  // held out for scoring
            if (val_hash(cfg.seed ^ (0x5EEDull + fold), i, cfg.val_fraction))
                val_rows.push_back(i);
            else
                train_rows.push_back(i);
        }
        if (train_rows.empty() || val_rows.empty())
            throw data_error("fold " + std::to_string(fold) + " has empty train or val split");

        // standardization from the training split only
        std::vector<double> mu(fv.d, 0.0), sd(fv.d, 1.0);
        if (cfg.standardize) {
            for (int j = 0; j < fv.d; ++j) {
                double s = 0.0;
                for (std::uint32_t r : train_rows) s += fv.row(r)[j];
                mu[j] = s / static_cast<double>(train_rows.size());
                double v = 0.0;
                for (std::uint32_t r : train_rows) {
                    const double c = fv.row(r)[j] - mu[j];
                    v += c * c;
                }
                sd[j] = std::sqrt(v / static_cast<double>(train_rows.size()));
                if (!(sd[j] > 0.0)) sd[j] = 1.0;
            }
        }
        std::vector<double> Xs(n * static_cast<std::size_t>(fv.d));
        for (std::uint32_t i : used) {
            auto row = fv.row(i);
            for (int j = 0; j < fv.d; ++j)
                Xs[static_cast<std::size_t>(i) * fv.d + j] = (row[j] - mu[j]) / sd[j];
        }

        StreamRng init_rng(cfg.seed, Stream::NetInit, static_cast<std::uint64_t>(fold));
        Mlp net(fv.d, cfg.hidden, init_rng);
        Mlp::TrainOptions topt;
        topt.learning_rate = cfg.learning_rate;
        topt.momentum = cfg.momentum;
        topt.batch_size = cfg.batch_size;
        topt.max_epochs = cfg.max_epochs;
        topt.patience = cfg.patience;
        topt.shuffle_seed = cfg.seed ^ (0xBA7C4ull + fold);
        const auto log = net.train(Xs, y, w, train_rows, val_rows, topt);

        FoldDiagnostics diag;
        diag.val_loss = log.best_val_loss;
        diag.best_epoch = log.best_epoch;
        diag.converged = log.converged;
        scorer.mu_[fold] = std::move(mu);
        scorer.sd_[fold] = std::move(sd);
        return {std::move(net), diag};
    };

    if (n_threads > 1) {
        std::vector<std::future<std::pair<Mlp, FoldDiagnostics>>> futs;
        futs.reserve(cfg.k_folds);
        for (int f = 0; f < cfg.k_folds; ++f)
            futs.push_back(std::async(std::launch::async, train_one, f));
        for (int f = 0; f < cfg.k_folds; ++f) {
            auto [net, diag] = futs[f].get();
            scorer.nets_.push_back(std::move(net));
            scorer.diag_[f] = diag;
        }
    } else {
        for (int f = 0; f < cfg.k_folds; ++f) {
            auto [net, diag] = train_one(f);
            scorer.nets_.push_back(std::move(net));
            scorer.diag_[f] = diag;
        }
    }
    return scorer;
}

Scorer train_cwola(const Dataset& ds, const WindowSpec& w, const ClassifierConfig& cfg) {
    cfg.validate();
    const FeatureView fv = features_of(ds);  // label firewall: x and m only
    std::vector<std::int8_t> targets(fv.size(), -1);
    std::size_t n_sr = 0, n_ss = 0;
    for (std::size_t i = 0; i < fv.size(); ++i) {
        switch (assign_region(fv.m[i], w)) {
            case Region::SR:
                targets[i] = 1;
                ++n_sr;
                break;
            case Region::SS:
                targets[i] = 0;
                ++n_ss;
                break;
            case Region::FarSB: break;
        }
    }
    const std::size_t need = static_cast<std::size_t>(10 * cfg.k_folds);
    if (n_sr < need || n_ss < need)
        throw degenerate_window_error("SR (" + std::to_string(n_sr) + ") and SS (" +
                                      std::to_string(n_ss) + ") each need >= " +
                                      std::to_string(need) + " events");

    // per-class weights giving both regions equal effective mass
    const float total = static_cast<float>(n_sr + n_ss);
    const std::vector<float> cls_w = {total / (2.0f * n_ss), total / (2.0f * n_sr)};

    Scorer scorer = train_folds(fv, targets, cls_w, cfg, cfg.n_threads);
    scorer.train_digest_ = ds.feature_digest();
    scorer.window_ = w;
    scorer.has_window_ = true;
    return scorer;
}

Scorer train_supervised(const Dataset& ds, const ClassifierConfig& cfg) {
    cfg.validate();
    if (!ds.labeled()) throw data_error("supervised training needs a labeled dataset");
    std::vector<std::int8_t> targets(ds.size());
    std::size_t n_sig = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        targets[i] = static_cast<std::int8_t>(ds.label(i));
        n_sig += targets[i];
    }
    if (n_sig == 0 || n_sig == ds.size())
        throw data_error("supervised training needs both classes present");

    const float total = static_cast<float>(ds.size());
    const float n1 = static_cast<float>(n_sig);
    const std::vector<float> cls_w = {total / (2.0f * (total - n1)), total / (2.0f * n1)};

    Scorer scorer = train_folds(features_of(ds), targets, cls_w, cfg, cfg.n_threads);
    scorer.train_digest_ = ds.feature_digest();
    return scorer;
}

double Scorer::score_out_of_fold(std::span<const double> x, int fold) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mu_[fold][j]) / sd_[fold][j];
    return nets_[fold].predict(z);
}

double Scorer::score_ensemble(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t f = 0; f < nets_.size(); ++f)
        s += score_out_of_fold(x, static_cast<int>(f));
    return s / static_cast<double>(nets_.size());
}

ScoreTable Scorer::score(const Dataset& ds, const WindowSpec& w) const {
    if (ds.dim() != d_) throw data_error("scoring dataset dimension mismatch");
    const bool is_training_set =
        ds.size() == fold_of_.size() && ds.feature_digest() == train_digest_;
    ScoreTable st(ds.labeled());
    st.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = ds.x(i);
        double s;
        if (is_training_set && fold_of_[i] >= 0)
            s = score_out_of_fold(x, fold_of_[i]);
        else
            s = score_ensemble(x);
        std::optional<Label> l;
        if (ds.labeled()) l = ds.label(i);
        st.append(ds.m(i), s, assign_region(ds.m(i), w), l);
    }
    return st;
}

double Scorer::heldout_region_auc(const Dataset& ds) const {
    if (!has_window_) throw data_error("scorer carries no training window");
    if (ds.size() != fold_of_.size() || ds.feature_digest() != train_digest_)
        throw data_error("held-out region AUC requires the training dataset");
    std::vector<double> scores;
    std::vector<std::int8_t> cls;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (fold_of_[i] < 0) continue;
        scores.push_back(score_out_of_fold(ds.x(i), fold_of_[i]));
        cls.push_back(target_of_[i]);
    }
    return auc_scores(scores, cls);
}

double auc_scores(std::span<const double> scores, std::span<const std::int8_t> targets) {
    // Mann-Whitney with ties counted half, via rank accumulation.
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double n1 = 0, n0 = 0;
    for (std::int8_t t : targets) (t ? n1 : n0) += 1.0;
    if (n1 == 0.0 || n0 == 0.0) throw data_error("AUC needs both classes present");

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (targets[idx[k]]) rank_sum_pos += mid_rank;
        i = j + 1;
    }
    return (rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

}  // namespace resonance
