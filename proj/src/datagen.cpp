#include "resonance/datagen.hpp"

#include <cmath>
#include <fstream>

#include "resonance/digest.hpp"
#include "resonance/ingest.hpp"
#include "resonance/rng.hpp"
#include "resonance/stats.hpp"

#include "json.hpp"

namespace resonance {

double spectrum_density(const SpectrumShape& shape, double m, double m_max_domain) {
    const double u = m / (1.05 * m_max_domain);
    switch (shape.kind) {
        case SpectrumKind::FallingPower:
            return shape.a0 * std::pow(1.0 - u, shape.a1) *
                   std::pow(u, shape.a2 + shape.a3 * std::log(u));
        case SpectrumKind::Exponential:
            return shape.a0 * std::exp(-shape.a1 * u);
    }
    return 0.0;
}

SpectrumTable::SpectrumTable(const SpectrumShape& shape, double m_min, double m_max,
                             int knots)
    : m_lo_(m_min), m_hi_(m_max) {
    if (knots < 16) throw config_error("spectrum tabulation needs at least 16 knots");
    knots_.resize(knots + 1);
    pdf_.resize(knots + 1);
    cdf_.assign(knots + 1, 0.0);
    const double h = (m_max - m_min) / knots;
    for (int i = 0; i <= knots; ++i) {
        knots_[i] = m_min + i * h;
        pdf_[i] = spectrum_density(shape, knots_[i], m_max);
        if (!std::isfinite(pdf_[i]) || pdf_[i] < 0.0)
            throw config_error("background spectrum is not finite and non-negative over the domain");
    }
    for (int i = 1; i <= knots; ++i)
        cdf_[i] = cdf_[i - 1] + 0.5 * (pdf_[i - 1] + pdf_[i]) * h;
    const double norm = cdf_.back();
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw config_error("background spectrum is not normalizable");
    for (int i = 0; i <= knots; ++i) {
        cdf_[i] /= norm;
        pdf_[i] /= norm;
    }
    cdf_.back() = 1.0;
}

double SpectrumTable::sample(double u) const {
    // binary search for the CDF segment, then linear inversion inside it
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (cdf_[mid] < u)
            lo = mid;
        else
            hi = mid;
    }
    const double c0 = cdf_[lo], c1 = cdf_[hi];
    const double t = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.5;
    return knots_[lo] + t * (knots_[hi] - knots_[lo]);
}

double SpectrumTable::cdf(double m) const {
    if (m <= m_lo_) return 0.0;
    if (m >= m_hi_) return 1.0;
    const double h = (m_hi_ - m_lo_) / static_cast<double>(knots_.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>((m - m_lo_) / h),
                                   knots_.size() - 2);
    const double t = (m - knots_[i]) / (knots_[i + 1] - knots_[i]);
    return cdf_[i] + t * (cdf_[i + 1] - cdf_[i]);
}

double SpectrumTable::pdf(double m) const {
    if (m < m_lo_ || m > m_hi_) return 0.0;
    const double h = (m_hi_ - m_lo_) / static_cast<double>(knots_.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>((m - m_lo_) / h),
                                   knots_.size() - 2);
    const double t = (m - knots_[i]) / (knots_[i + 1] - knots_[i]);
    return pdf_[i] + t * (pdf_[i + 1] - pdf_[i]);
}

namespace {

std::vector<double> filled(const std::vector<double>& v, int d, double def,
                           const char* name) {
    if (v.empty()) return std::vector<double>(d, def);
    if (static_cast<int>(v.size()) != d)
        throw config_error(std::string(name) + " must have d entries");
    return v;
}

}  // namespace

double ToyConfig::feature_mean(int j, double m) const {
    const double base = background_feature_mean.empty() ? 0.0 : background_feature_mean[j];
    const double drift = background_feature_drift.empty() ? 0.0 : background_feature_drift[j];
    return base + drift * m;
}

double ToyConfig::feature_sigma(int j) const {
    return background_feature_sigma.empty() ? 1.0 : background_feature_sigma[j];
}

void ToyConfig::validate() const {
    if (d < 1) throw config_error("d must be >= 1");
    if (n_background < 0 || n_signal < 0) throw config_error("event counts must be non-negative");
    if (!(m_min > 0.0) || !(m_min < m_max)) throw config_error("require 0 < m_min < m_max");

    // Rarity
    if (n_signal > 0) {
        const double frac = static_cast<double>(n_signal) /
                            static_cast<double>(n_signal + n_background);
        if (frac >= rarity_limit)
            throw config_error("rarity violated: signal fraction " + std::to_string(frac) +
                               " >= limit " + std::to_string(rarity_limit));
    }

    // Resonance
    if (!(signal_width > 0.0)) throw config_error("signal_width must be positive");
    if (signal_m0 < m_min || signal_m0 > m_max)
        throw config_error("signal_m0 outside m domain");
    if (signal_width >= 0.05 * span())
        throw config_error("resonance violated: signal_width must be < 5% of the m span");

    const auto mean = filled(background_feature_mean, d, 0.0, "background_feature_mean");
    const auto sigma = filled(background_feature_sigma, d, 1.0, "background_feature_sigma");
    const auto drift = filled(background_feature_drift, d, 0.0, "background_feature_drift");
    const auto shift = filled(signal_feature_shift, d, 0.0, "signal_feature_shift");
    const auto scale = filled(signal_feature_scale, d, 1.0, "signal_feature_scale");
    (void)mean;
    (void)shift;

    for (int j = 0; j < d; ++j) {
        if (!(sigma[j] > 0.0)) throw config_error("background feature sigma must be positive");
        // Overlap: Gaussians with positive widths always share support; a
        // non-positive width factor would collapse the signal to a point mass.
        if (!(scale[j] > 0.0))
            throw config_error("overlap violated: signal_feature_scale must be positive");
        // Smoothness: conditional mean variation across the domain bounded
        // relative to the feature width.
        if (std::fabs(drift[j]) * span() >= 0.2 * sigma[j])
            throw config_error("smoothness violated: |drift| * span must be < 0.2 * sigma for feature " +
                               std::to_string(j));
    }
}

ToyConfig default_toy_preset() {
    ToyConfig cfg;
    cfg.background_feature_drift = {0.02, -0.02, 0.01, 0.015};
    cfg.signal_feature_shift = {1.0, -1.0, 0.5, 0.0};
    cfg.signal_feature_scale = {0.8, 0.8, 0.9, 1.0};
    return cfg;
}

ToyConfig detectable_toy_preset(std::uint64_t seed) {
    ToyConfig cfg = default_toy_preset();
    cfg.n_background = 100'000;
    cfg.n_signal = 1'000;
    cfg.signal_feature_shift = {2.0, -2.0, 1.2, 0.0};
    cfg.signal_feature_scale = {0.7, 0.7, 0.8, 1.0};
    cfg.seed = seed;
    return cfg;
}

ToyConfig null_toy_preset(std::uint64_t seed) {
    ToyConfig cfg = default_toy_preset();
    cfg.n_background = 100'000;
    cfg.n_signal = 0;
    cfg.seed = seed;
    return cfg;
}

Dataset generate_background(const ToyConfig& cfg) {
    cfg.validate();
    const SpectrumTable table(cfg.background_shape, cfg.m_min, cfg.m_max);
    Dataset ds(cfg.d, true);
    ds.reserve(static_cast<std::size_t>(cfg.n_background));
    std::vector<double> x(cfg.d);
    for (long long i = 0; i < cfg.n_background; ++i) {
        StreamRng rng(cfg.seed, Stream::BackgroundEvents, static_cast<std::uint64_t>(i));
        const double m = table.sample(rng.next_unit());
        for (int j = 0; j < cfg.d; ++j)
            x[j] = cfg.feature_mean(j, m) + cfg.feature_sigma(j) * rng.next_normal();
        ds.append(m, x, Label::Background);
    }
    return ds;
}

Dataset generate_signal(const ToyConfig& cfg) {
    cfg.validate();
    Dataset ds(cfg.d, true);
    ds.reserve(static_cast<std::size_t>(cfg.n_signal));
    // truncated normal in m via inverse CDF, one uniform per event
    const double z_lo = (cfg.m_min - cfg.signal_m0) / cfg.signal_width;
    const double z_hi = (cfg.m_max - cfg.signal_m0) / cfg.signal_width;
    const double p_lo = normal_cdf(z_lo);
    const double p_hi = normal_cdf(z_hi);
    std::vector<double> x(cfg.d);
    for (long long i = 0; i < cfg.n_signal; ++i) {
        StreamRng rng(cfg.seed, Stream::SignalEvents, static_cast<std::uint64_t>(i));
        const double u = p_lo + (p_hi - p_lo) * rng.next_unit();
        const double m = cfg.signal_m0 + cfg.signal_width * normal_quantile(u);
        for (int j = 0; j < cfg.d; ++j) {
            const double shift =
                cfg.signal_feature_shift.empty() ? 0.0 : cfg.signal_feature_shift[j];
            const double scale =
                cfg.signal_feature_scale.empty() ? 1.0 : cfg.signal_feature_scale[j];
            x[j] = cfg.feature_mean(j, m) + shift +
                   cfg.feature_sigma(j) * scale * rng.next_normal();
        }
        ds.append(m, x, Label::Signal);
    }
    return ds;
}

Dataset mix_and_shuffle(const Dataset& bkg, const Dataset& sig, std::uint64_t seed) {
    if (bkg.dim() != sig.dim())
        throw data_error("feature dimension mismatch between datasets");
    if (bkg.labeled() != sig.labeled())
        throw data_error("cannot mix labeled with unlabeled dataset");
    const std::size_t n = bkg.size() + sig.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    StreamRng rng(seed, Stream::Shuffle);
    deterministic_shuffle(perm, rng);

    Dataset out(bkg.dim(), bkg.labeled());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = perm[i];
        const Dataset& src = (k < bkg.size()) ? bkg : sig;
        const std::size_t j = (k < bkg.size()) ? k : k - bkg.size();
        std::optional<Label> l;
        if (src.labeled()) l = src.label(j);
        out.append(src.m(j), src.x(j), l);
    }
    return out;
}

SealedKey emit_blackbox(const ToyConfig& cfg, const std::string& data_path,
                        const std::string& key_path) {
    const Dataset bkg = generate_background(cfg);
    const Dataset sig = generate_signal(cfg);
    const Dataset mixed = mix_and_shuffle(bkg, sig, cfg.seed);

    write_csv(mixed.without_labels(), data_path, ColumnSchema::canonical(cfg.d, false));

    SealedKey key;
    key.labels.reserve(mixed.size());
    for (std::size_t i = 0; i < mixed.size(); ++i)
        key.labels.push_back(static_cast<std::int8_t>(mixed.label(i)));
    key.signal_count = cfg.n_signal;
    key.signal_m0 = cfg.signal_m0;
    key.signal_width = cfg.signal_width;
    key.digest = Sha256::of_file(data_path);
    write_key(key, key_path);
    return key;
}

void write_key(const SealedKey& key, const std::string& key_path) {
    std::ofstream out(key_path, std::ios::binary);
    if (!out) throw data_error("cannot open key file for writing: " + key_path);
    nlohmann::json header = {{"digest", key.digest},
                             {"signal_count", key.signal_count},
                             {"signal_m0", key.signal_m0},
                             {"signal_width", key.signal_width},
                             {"n_events", key.labels.size()}};
    out << header.dump() << "\n";
    out << "label\n";
    for (std::int8_t l : key.labels) out << static_cast<int>(l) << "\n";
    if (!out) throw data_error("failed writing key file: " + key_path);
}

SealedKey read_key(const std::string& key_path) {
    std::ifstream in(key_path, std::ios::binary);
    if (!in) throw data_error("cannot open key file: " + key_path);
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty key file: " + key_path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw data_error("malformed key header: " + std::string(e.what()));
    }
    SealedKey key;
    key.digest = header.at("digest").get<std::string>();
    key.signal_count = header.at("signal_count").get<long long>();
    key.signal_m0 = header.at("signal_m0").get<double>();
    key.signal_width = header.at("signal_width").get<double>();
    const std::size_t n = header.at("n_events").get<std::size_t>();
    if (!std::getline(in, line) || line != "label")
        throw data_error("key file missing label column header");
    key.labels.reserve(n);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line == "0")
            key.labels.push_back(0);
        else if (line == "1")
            key.labels.push_back(1);
        else
            throw data_error("key label must be 0 or 1, got: " + line);
    }
    if (key.labels.size() != n)
        throw data_error("key label count does not match header n_events");
    return key;
}

void verify_key_digest(const SealedKey& key, const std::string& data_path) {
    const std::string actual = Sha256::of_file(data_path);
    if (actual != key.digest)
        throw digest_mismatch_error("dataset digest " + actual +
                                    " does not match sealed key digest " + key.digest);
}

}  // namespace resonance
