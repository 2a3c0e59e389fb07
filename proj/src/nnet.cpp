#include "resonance/nnet.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace resonance {

double bce_from_logit(double z, double target) {
    // -t*log(sigma(z)) - (1-t)*log(1-sigma(z)) = max(z,0) - t*z + log1p(exp(-|z|))
    return std::max(z, 0.0) - target * z + std::log1p(std::exp(-std::fabs(z)));
}

Mlp::Mlp(int input_dim, std::span<const int> hidden, StreamRng& init_rng) {
    if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
    dims_.push_back(input_dim);
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("hidden width must be >= 1");
        dims_.push_back(h);
    }
    dims_.push_back(1);

    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        layer_offset_.push_back(total);
        total += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
    }
    params_.resize(total);

    // He-style init for the ReLU stack; biases start at zero.
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const int fan_in = dims_[l];
        const int fan_out = dims_[l + 1];
        const double sd = std::sqrt(2.0 / fan_in);
        double* w = params_.data() + layer_offset_[l];
        for (int i = 0; i < fan_out * fan_in; ++i) w[i] = sd * init_rng.next_normal();
        for (int i = 0; i < fan_out; ++i) w[fan_out * fan_in + i] = 0.0;
    }
}

double Mlp::forward(std::span<const double> x,
                    std::vector<std::vector<double>>* acts) const {
    std::vector<double> cur(x.begin(), x.end());
    if (acts) acts->push_back(cur);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const int in = dims_[l];
        const int out = dims_[l + 1];
        const double* w = params_.data() + layer_offset_[l];
        const double* b = w + static_cast<std::size_t>(in) * out;
        std::vector<double> next(out);
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) s += row[i] * cur[i];
            next[o] = s;
        }
        const bool last = (l + 2 == dims_.size());
        if (!last)
            for (double& v : next) v = std::max(v, 0.0);
        cur = std::move(next);
        if (acts) acts->push_back(cur);
    }
    return cur[0];
}

double Mlp::logit(std::span<const double> x) const { return forward(x, nullptr); }

double Mlp::predict(std::span<const double> x) const {
    const double z = logit(x);
    return 1.0 / (1.0 + std::exp(-z));
}

double Mlp::loss(std::span<const double> X, std::span<const float> y,
                 std::span<const float> w, std::span<const std::uint32_t> rows) const {
    const int d = dims_.front();
    double total = 0.0, wsum = 0.0;
    for (std::uint32_t r : rows) {
        const double z = logit(X.subspan(static_cast<std::size_t>(r) * d, d));
        total += w[r] * bce_from_logit(z, y[r]);
        wsum += w[r];
    }
    return wsum > 0.0 ? total / wsum : 0.0;
}

double Mlp::loss_and_grad(std::span<const double> X, std::span<const float> y,
                          std::span<const float> w, std::span<const std::uint32_t> rows,
                          std::vector<double>& grad) const {
    grad.assign(params_.size(), 0.0);
    const int d = dims_.front();
    const std::size_t layers = dims_.size() - 1;
    double total = 0.0, wsum = 0.0;

    std::vector<std::vector<double>> acts;
    std::vector<double> delta, prev_delta;
    for (std::uint32_t r : rows) {
        acts.clear();
        const double z = forward(X.subspan(static_cast<std::size_t>(r) * d, d), &acts);
        const double p = 1.0 / (1.0 + std::exp(-z));
        total += w[r] * bce_from_logit(z, y[r]);
        wsum += w[r];

        // dL/dz for BCE+sigmoid
        delta.assign(1, w[r] * (p - y[r]));
        for (std::size_t l = layers; l-- > 0;) {
            const int in = dims_[l];
            const int out = dims_[l + 1];
            double* gw = grad.data() + layer_offset_[l];
            double* gb = gw + static_cast<std::size_t>(in) * out;
            const double* a = acts[l].data();
            for (int o = 0; o < out; ++o) {
                const double dz = delta[o];
                if (dz == 0.0) continue;
                double* grow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) grow[i] += dz * a[i];
                gb[o] += dz;
            }
            if (l > 0) {
                const double* wmat = params_.data() + layer_offset_[l];
                prev_delta.assign(in, 0.0);
                for (int o = 0; o < out; ++o) {
                    const double dz = delta[o];
                    if (dz == 0.0) continue;
                    const double* row = wmat + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) prev_delta[i] += dz * row[i];
                }
                // ReLU mask from the pre-activation sign (activations are
                // post-ReLU: zero activation means dead unit)
                for (int i = 0; i < in; ++i)
                    if (acts[l][i] <= 0.0) prev_delta[i] = 0.0;
                delta = prev_delta;
            }
        }
    }
    if (wsum > 0.0) {
        for (double& g : grad) g /= wsum;
        total /= wsum;
    }
    return total;
}

Mlp::TrainLog Mlp::train(std::span<const double> X, std::span<const float> y,
                         std::span<const float> w, std::span<const std::uint32_t> train_rows,
                         std::span<const std::uint32_t> val_rows, const TrainOptions& opts) {
    TrainLog log;
    if (train_rows.empty()) throw std::invalid_argument("no training rows");
    std::vector<std::uint32_t> order(train_rows.begin(), train_rows.end());
    std::vector<double> velocity(params_.size(), 0.0);
    std::vector<double> grad;
    std::vector<std::uint32_t> batch;
    std::vector<double> best_params = params_;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    const int bs = std::max(1, opts.batch_size);
    for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
        StreamRng shuffle_rng(opts.shuffle_seed, Stream::BatchShuffle,
                              static_cast<std::uint64_t>(epoch));
        deterministic_shuffle(order, shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            batch.assign(order.begin() + start, order.begin() + stop);
            loss_and_grad(X, y, w, batch, grad);
            for (std::size_t i = 0; i < params_.size(); ++i) {
                velocity[i] = opts.momentum * velocity[i] - opts.learning_rate * grad[i];
                params_[i] += velocity[i];
            }
        }
        log.train_loss.push_back(loss(X, y, w, train_rows));
        if (!val_rows.empty()) {
            const double vl = loss(X, y, w, val_rows);
            log.val_loss.push_back(vl);
            if (vl < best_val - 1e-7) {
                best_val = vl;
                best_params = params_;
                log.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best > opts.patience) {
                params_ = best_params;
                log.best_val_loss = best_val;
                return log;
            }
        }
    }
    if (!val_rows.empty()) {
        params_ = best_params;
        log.best_val_loss = best_val;
        log.converged = false;  // ran out of epochs before patience triggered
    } else {
        log.best_epoch = opts.max_epochs - 1;
        log.best_val_loss = log.train_loss.empty() ? 0.0 : log.train_loss.back();
    }
    return log;
}

}  // namespace resonance
