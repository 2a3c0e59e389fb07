#pragma once

#include <optional>
#include <vector>

#include "resonance/core.hpp"

namespace resonance {

// Per-event anomaly scores with region tags: one row per input event, in
// input order. CWoLa scores live in [0,1]; ANODE scores are log-ratios.
class ScoreTable {
  public:
    ScoreTable(bool labeled) : labeled_(labeled) {}

    std::size_t size() const { return score_.size(); }
    bool labeled() const { return labeled_; }

    double m(std::size_t i) const { return m_[i]; }
    double score(std::size_t i) const { return score_[i]; }
    Region region(std::size_t i) const { return region_[i]; }
    Label label(std::size_t i) const { return static_cast<Label>(label_[i]); }

    std::span<const double> scores() const { return score_; }
    std::span<const double> m_column() const { return m_; }

    void reserve(std::size_t n);
    void append(double m, double score, Region region,
                std::optional<Label> label = std::nullopt);

    ScoreTable filtered_above(double threshold) const;  // keeps rows with score > threshold
    std::vector<double> scores_in(Region r) const;
    std::vector<double> sb_scores() const;  // SS + FarSB

  private:
    bool labeled_;
    std::vector<double> m_;
    std::vector<double> score_;
    std::vector<Region> region_;
    std::vector<std::int8_t> label_;
};

}  // namespace resonance
