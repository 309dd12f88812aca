#include "geoact/feature_vector.hpp"

#include <algorithm>
#include <cassert>

namespace geoact {

FeatureVector::FeatureVector(std::initializer_list<Entry> entries)
    : FeatureVector(from_unsorted(std::vector<Entry>(entries))) {}

FeatureVector FeatureVector::from_unsorted(std::vector<Entry> entries) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.index < b.index; });
    FeatureVector v;
    v.entries_.reserve(entries.size());
    for (const auto& e : entries) {
        if (!v.entries_.empty() && v.entries_.back().index == e.index)
            v.entries_.back().value += e.value;
        else
            v.entries_.push_back(e);
    }
    std::erase_if(v.entries_, [](const Entry& e) { return e.value == 0.0; });
    return v;
}

FeatureVector FeatureVector::dense(std::span<const double> values) {
    FeatureVector v;
    v.entries_.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] != 0.0) v.entries_.push_back({static_cast<std::uint32_t>(i), values[i]});
    return v;
}

double FeatureVector::at(std::uint32_t index) const noexcept {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, std::uint32_t i) { return e.index < i; });
    return (it != entries_.end() && it->index == index) ? it->value : 0.0;
}

double FeatureVector::squared_norm() const noexcept {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value * e.value;
    return s;
}

double FeatureVector::dot(std::span<const double> weights) const noexcept {
    double s = 0.0;
    for (const auto& e : entries_)
        if (e.index < weights.size()) s += weights[e.index] * e.value;
    return s;
}

FeatureVector operator+(const FeatureVector& a, const FeatureVector& b) {
    std::vector<FeatureVector::Entry> all(a.entries_.begin(), a.entries_.end());
    all.insert(all.end(), b.entries_.begin(), b.entries_.end());
    return FeatureVector::from_unsorted(std::move(all));
}

}  // namespace geoact
