#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace geoact {

// Sparse vector with strictly increasing indices.
class FeatureVector {
public:
    struct Entry {
        std::uint32_t index;
        double value;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    FeatureVector() = default;
    FeatureVector(std::initializer_list<Entry> entries);
    // Sorts, sums duplicate indices and drops explicit zeros.
    static FeatureVector from_unsorted(std::vector<Entry> entries);
    static FeatureVector dense(std::span<const double> values);

    std::span<const Entry> entries() const noexcept { return entries_; }
    std::size_t nonzeros() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    double at(std::uint32_t index) const noexcept;
    double squared_norm() const noexcept;

    // Indices at or beyond weights.size() contribute nothing.
    double dot(std::span<const double> weights) const noexcept;

    friend FeatureVector operator+(const FeatureVector& a, const FeatureVector& b);
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    std::vector<Entry> entries_;
};

}  // namespace geoact
