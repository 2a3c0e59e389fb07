#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resonance/core.hpp"

namespace resonance {

enum class SpectrumKind { FallingPower, Exponential };

// Smooth falling m-spectrum. FallingPower is the 4-parameter dijet-style
// form a0 * (1-u)^a1 * u^(a2 + a3*ln u) with u = m / (1.05 * m_max);
// Exponential is a0 * exp(-a1 * u).
struct SpectrumShape {
    SpectrumKind kind = SpectrumKind::FallingPower;
    double a0 = 1.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
};

// Dense inverse-CDF tabulation of a spectrum over [m_min, m_max]; the
// functional form has no closed-form inverse. Also serves as the sampling
// oracle in tests.
class SpectrumTable {
  public:
    SpectrumTable(const SpectrumShape& shape, double m_min, double m_max, int knots = 4096);

    double sample(double u) const;  // u in (0,1) -> m
    double cdf(double m) const;
    double pdf(double m) const;  // normalized to integrate to 1 on [m_min, m_max]
    double m_min() const { return m_lo_; }
    double m_max() const { return m_hi_; }

  private:
    double m_lo_, m_hi_;
    std::vector<double> knots_;  // m positions
    std::vector<double> cdf_;    // cumulative, cdf_.front()=0, cdf_.back()=1
    std::vector<double> pdf_;    // normalized density at knots
};

double spectrum_density(const SpectrumShape& shape, double m, double m_max_domain);

struct ToyConfig {
    long long n_background = 1'000'000;
    long long n_signal = 834;
    double m_min = 2.0;
    double m_max = 6.0;
    SpectrumShape background_shape{SpectrumKind::FallingPower, 1.0, 1.5, -1.0, -0.1};
    double signal_m0 = 3.5;
    double signal_width = 0.04;
    int d = 4;
    std::vector<double> background_feature_mean;   // defaults to zeros
    std::vector<double> background_feature_sigma;  // defaults to ones
    std::vector<double> background_feature_drift;  // d mu/d m, defaults to zeros
    std::vector<double> signal_feature_shift;      // offsets vs background mean at same m
    std::vector<double> signal_feature_scale;      // width factors, defaults to ones
    double rarity_limit = 0.05;
    std::uint64_t seed = 1;

    // Throws config_error naming the violated assumption (rarity, overlap,
    // resonance, smoothness) or malformed field.
    void validate() const;

    double span() const { return m_max - m_min; }
    // Background conditional feature mean/sigma at given m.
    double feature_mean(int j, double m) const;
    double feature_sigma(int j) const;
};

// Named presets used throughout the docs and the acceptance runs.
ToyConfig default_toy_preset();                       // benchmark-scale rarity: 1M + 834
ToyConfig detectable_toy_preset(std::uint64_t seed);  // 100k + 1000, strong feature shift
ToyConfig null_toy_preset(std::uint64_t seed);        // background only, 100k

Dataset generate_background(const ToyConfig& cfg);
Dataset generate_signal(const ToyConfig& cfg);

// Multiset union with a seed-keyed permutation; labels ride along.
Dataset mix_and_shuffle(const Dataset& bkg, const Dataset& sig, std::uint64_t seed);

// Truth withheld from the analysis pipeline, bound to the emitted file.
struct SealedKey {
    std::vector<std::int8_t> labels;
    long long signal_count = 0;
    double signal_m0 = 0.0;
    double signal_width = 0.0;
    std::string digest;  // sha256 of the unlabeled dataset file
};

// Generates the mixed toy, writes the unlabeled dataset to data_path and
// the sealed key to key_path. Key file layout: one JSON header line, then
// a "label" CSV column.
SealedKey emit_blackbox(const ToyConfig& cfg, const std::string& data_path,
                        const std::string& key_path);

SealedKey read_key(const std::string& key_path);
void write_key(const SealedKey& key, const std::string& key_path);

// Throws digest_mismatch_error when the file does not match the key.
void verify_key_digest(const SealedKey& key, const std::string& data_path);

}  // namespace resonance
