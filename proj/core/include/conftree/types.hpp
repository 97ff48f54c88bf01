#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace conftree {

using Label = int;
using FeatureVector = std::vector<double>;

// Probabilities over an ordered class subset; entries in [0,1] summing to 1.
using ProbVector = std::vector<double>;

// Ordered list of distinct class labels. A default-constructed subset is
// empty and only serves as a placeholder; every other constructor requires
// at least one label.
class ClassSubset {
public:
    ClassSubset() = default;
    explicit ClassSubset(std::vector<Label> labels);
    ClassSubset(std::initializer_list<Label> labels) : ClassSubset(std::vector<Label>(labels)) {}

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const std::vector<Label>& labels() const noexcept { return labels_; }
    Label operator[](std::size_t i) const { return labels_[i]; }
    auto begin() const noexcept { return labels_.begin(); }
    auto end() const noexcept { return labels_.end(); }

    bool contains(Label label) const noexcept;
    // Position of `label`, or size() when absent.
    std::size_t index_of(Label label) const noexcept;
    // Same labels regardless of order.
    bool same_members(const ClassSubset& other) const;
    // Labels in ascending order.
    ClassSubset sorted() const;

    friend bool operator==(const ClassSubset&, const ClassSubset&) = default;

private:
    std::vector<Label> labels_;
};

// Labels of `classes` ranked by descending score; equal scores go to the
// smaller label. Returns at most `k` labels.
std::vector<Label> rank_labels(const ClassSubset& classes, std::span<const double> scores,
                               std::size_t k);

// Label with the highest score, smallest label on ties.
Label argmax_label(const ClassSubset& classes, std::span<const double> scores);

}  // namespace conftree
