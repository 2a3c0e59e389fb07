#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace resonance {

// Error taxonomy; the CLI maps these to exit codes 1/2/3.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degenerate_window_error : data_error {
    using data_error::data_error;
};
struct out_of_domain_error : data_error {
    using data_error::data_error;
};
struct digest_mismatch_error : data_error {
    using data_error::data_error;
};

enum class Label : std::int8_t { Background = 0, Signal = 1 };

// One event: resonant feature m plus auxiliary feature vector x.
struct Event {
    double m = 0.0;
    std::vector<double> x;
    std::optional<Label> label;
};

// Columnar event table. Immutable once filled; all accessors are const
// and safe to use concurrently.
class Dataset {
  public:
    Dataset(int d, bool labeled) : d_(d), labeled_(labeled) {
        if (d < 1) throw config_error("feature dimension must be >= 1");
    }

    std::size_t size() const { return m_.size(); }
    int dim() const { return d_; }
    bool labeled() const { return labeled_; }

    double m(std::size_t i) const { return m_[i]; }
    std::span<const double> x(std::size_t i) const {
        return {x_.data() + i * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_)};
    }
    Label label(std::size_t i) const { return static_cast<Label>(label_[i]); }

    std::span<const double> m_column() const { return m_; }
    std::span<const double> x_flat() const { return x_; }
    std::span<const std::int8_t> label_column() const { return label_; }

    void reserve(std::size_t n);
    void append(double m, std::span<const double> x, std::optional<Label> label = std::nullopt);
    void append(const Event& e) { append(e.m, e.x, e.label); }
    Event event(std::size_t i) const;

    // Identical-content view without the label column.
    Dataset without_labels() const;

    // Content hash over (m, x) bits; labels excluded so that label-blind
    // stages agree on dataset identity.
    std::uint64_t feature_digest() const;

    std::size_t count_label(Label l) const;

  private:
    int d_;
    bool labeled_;
    std::vector<double> m_;
    std::vector<double> x_;
    std::vector<std::int8_t> label_;
};

// Signal region / short sideband geometry in m.
struct WindowSpec {
    double m0 = 0.0;
    double delta = 0.0;    // SR half-width
    double epsilon = 0.0;  // SS outer half-width
    double domain_lo = 0.0;
    double domain_hi = 0.0;

    double sr_lo() const { return m0 - delta; }
    double sr_hi() const { return m0 + delta; }
    double ss_lo() const { return m0 - epsilon; }
    double ss_hi() const { return m0 + epsilon; }
};

enum class Region : std::int8_t { SR = 0, SS = 1, FarSB = 2 };

const char* region_name(Region r);
Region region_from_name(const std::string& name);

// Region of a single event. Boundary values fall outward (SS at the SR
// edge, FarSB at the SS edge) so the SR stays conservatively small.
Region assign_region(double m, const WindowSpec& w);

// Split a dataset into (SR, SS, FarSB) preserving relative order.
// Throws degenerate_window_error if the SR or the SS comes out empty.
std::tuple<Dataset, Dataset, Dataset> partition(const Dataset& ds, const WindowSpec& w);

}  // namespace resonance
