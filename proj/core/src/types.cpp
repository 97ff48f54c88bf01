#include "conftree/types.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "conftree/errors.hpp"

namespace conftree {

ClassSubset::ClassSubset(std::vector<Label> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw InvalidArgument("class subset must not be empty");
    std::unordered_set<Label> seen;
    for (Label l : labels_) {
        if (!seen.insert(l).second)
            throw InvalidArgument("duplicate label " + std::to_string(l) + " in class subset");
    }
}

bool ClassSubset::contains(Label label) const noexcept {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t ClassSubset::index_of(Label label) const noexcept {
    return static_cast<std::size_t>(std::find(labels_.begin(), labels_.end(), label) - labels_.begin());
}

bool ClassSubset::same_members(const ClassSubset& other) const {
    if (size() != other.size()) return false;
    auto a = labels_;
    auto b = other.labels_;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

ClassSubset ClassSubset::sorted() const {
    ClassSubset out;
    out.labels_ = labels_;
    std::sort(out.labels_.begin(), out.labels_.end());
    return out;
}

std::vector<Label> rank_labels(const ClassSubset& classes, std::span<const double> scores,
                               std::size_t k) {
    if (scores.size() != classes.size())
        throw ShapeError("score vector has " + std::to_string(scores.size()) + " entries for " +
                         std::to_string(classes.size()) + " classes");
    std::vector<std::size_t> order(classes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return classes[a] < classes[b];
    };
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    std::vector<Label> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(classes[order[i]]);
    return out;
}

Label argmax_label(const ClassSubset& classes, std::span<const double> scores) {
    if (classes.empty()) throw InvalidArgument("argmax over an empty class subset");
    return rank_labels(classes, scores, 1).front();
}

}  // namespace conftree
