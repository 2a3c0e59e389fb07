#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resonance/rng.hpp"

namespace resonance {

// Fully connected net: ReLU hidden layers, single logistic output, trained
// with weighted binary cross-entropy by mini-batch SGD with momentum.
// Deliberately dependency-free; the feature spaces here are tiny.
class Mlp {
  public:
    Mlp(int input_dim, std::span<const int> hidden, StreamRng& init_rng);

    int input_dim() const { return dims_.front(); }

    double predict(std::span<const double> x) const;  // sigmoid output in (0,1)
    double logit(std::span<const double> x) const;

    // Weighted BCE over the given rows of X (row-major n x d).
    double loss(std::span<const double> X, std::span<const float> y,
                std::span<const float> w, std::span<const std::uint32_t> rows) const;

    struct TrainOptions {
        double learning_rate = 0.03;
        double momentum = 0.9;
        int batch_size = 256;
        int max_epochs = 50;
        int patience = 5;
        std::uint64_t shuffle_seed = 1;
    };

    struct TrainLog {
        std::vector<double> train_loss;  // per epoch, on the training rows
        std::vector<double> val_loss;    // per epoch
        int best_epoch = -1;
        double best_val_loss = 0.0;
        bool converged = true;  // false when max_epochs hit while still improving
    };

    // Trains in place; early stopping on validation loss restores the best
    // snapshot. Validation rows may be empty (then the last epoch wins and
    // patience is ignored).
    TrainLog train(std::span<const double> X, std::span<const float> y,
                   std::span<const float> w, std::span<const std::uint32_t> train_rows,
                   std::span<const std::uint32_t> val_rows, const TrainOptions& opts);

    // Flat parameter access, used by the finite-difference gradient check
    // and the determinism tests.
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // Mean weighted BCE and its gradient over the given rows.
    double loss_and_grad(std::span<const double> X, std::span<const float> y,
                         std::span<const float> w, std::span<const std::uint32_t> rows,
                         std::vector<double>& grad) const;

  private:
    // dims_ = {in, h1, ..., 1}; params_ packs W1,b1,W2,b2,... row-major.
    std::vector<int> dims_;
    std::vector<double> params_;
    std::vector<std::size_t> layer_offset_;  // offset of each layer's W block

    double forward(std::span<const double> x, std::vector<std::vector<double>>* acts) const;
};

// Numerically stable weighted BCE for a single logit.
double bce_from_logit(double z, double target);

}  // namespace resonance
