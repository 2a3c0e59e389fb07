#include "resonance/core.hpp"

#include <cmath>
#include <cstring>

#include "resonance/rng.hpp"

namespace resonance {

void Dataset::reserve(std::size_t n) {
    m_.reserve(n);
    x_.reserve(n * static_cast<std::size_t>(d_));
    if (labeled_) label_.reserve(n);
}

void Dataset::append(double m, std::span<const double> x, std::optional<Label> label) {
    if (static_cast<int>(x.size()) != d_)
        throw data_error("event feature dimension " + std::to_string(x.size()) +
                         " does not match dataset d=" + std::to_string(d_));
    if (!std::isfinite(m) || m <= 0.0)
        throw data_error("resonant feature must be finite and positive");
    for (double v : x)
        if (!std::isfinite(v)) throw data_error("non-finite feature value");
    if (labeled_ != label.has_value())
        throw data_error(labeled_ ? "labeled dataset requires a label on every event"
                                  : "unlabeled dataset cannot carry labels");
    m_.push_back(m);
    x_.insert(x_.end(), x.begin(), x.end());
    if (labeled_) label_.push_back(static_cast<std::int8_t>(*label));
}

Event Dataset::event(std::size_t i) const {
    Event e;
    e.m = m_[i];
    auto xi = x(i);
    e.x.assign(xi.begin(), xi.end());
    if (labeled_) e.label = label(i);
    return e;
}

Dataset Dataset::without_labels() const {
    Dataset out(d_, false);
    out.m_ = m_;
    out.x_ = x_;
    return out;
}

std::uint64_t Dataset::feature_digest() const {
    std::uint64_t h = mix64(0x5eed0f00d ^ (static_cast<std::uint64_t>(d_) << 32) ^ size());
    auto absorb = [&h](const std::vector<double>& v) {
        for (double value : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &value, sizeof(bits));
            h = mix64(h ^ bits);
        }
    };
    absorb(m_);
    absorb(x_);
    return h;
}

std::size_t Dataset::count_label(Label l) const {
    std::size_t n = 0;
    for (std::int8_t v : label_)
        if (v == static_cast<std::int8_t>(l)) ++n;
    return n;
}

const char* region_name(Region r) {
    switch (r) {
        case Region::SR: return "SR";
        case Region::SS: return "SS";
        case Region::FarSB: return "FarSB";
    }
    return "?";
}

Region region_from_name(const std::string& name) {
    if (name == "SR") return Region::SR;
    if (name == "SS") return Region::SS;
    if (name == "FarSB") return Region::FarSB;
    throw data_error("unknown region tag: " + name);
}

Region assign_region(double m, const WindowSpec& w) {
    if (m < w.domain_lo || m > w.domain_hi)
        throw out_of_domain_error("m=" + std::to_string(m) + " outside domain [" +
                                  std::to_string(w.domain_lo) + ", " +
                                  std::to_string(w.domain_hi) + "]");
    // interval comparisons keep boundary values in the outer region exactly
    if (m > w.sr_lo() && m < w.sr_hi()) return Region::SR;
    if (m > w.ss_lo() && m < w.ss_hi()) return Region::SS;
    return Region::FarSB;
}

std::tuple<Dataset, Dataset, Dataset> partition(const Dataset& ds, const WindowSpec& w) {
    Dataset sr(ds.dim(), ds.labeled());
    Dataset ss(ds.dim(), ds.labeled());
    Dataset far(ds.dim(), ds.labeled());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::optional<Label> l;
        if (ds.labeled()) l = ds.label(i);
        switch (assign_region(ds.m(i), w)) {
            case Region::SR: sr.append(ds.m(i), ds.x(i), l); break;
            case Region::SS: ss.append(ds.m(i), ds.x(i), l); break;
            case Region::FarSB: far.append(ds.m(i), ds.x(i), l); break;
        }
    }
    if (sr.size() == 0)
        throw degenerate_window_error("window has empty signal region");
    if (ss.size() == 0)
        throw degenerate_window_error("window has empty short sideband");
    return {std::move(sr), std::move(ss), std::move(far)};
}

}  // namespace resonance
