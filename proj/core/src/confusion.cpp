#include "conftree/confusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "conftree/classifier.hpp"
#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "json_util.hpp"

namespace conftree {

SoftmaxConfusionMatrix::SoftmaxConfusionMatrix(ClassSubset classes, std::vector<double> entries)
    : classes_(std::move(classes)), entries_(std::move(entries)) {
    if (entries_.size() != classes_.size() * classes_.size())
        throw ShapeError("confusion matrix needs " + std::to_string(classes_.size() * classes_.size()) +
                         " entries, got " + std::to_string(entries_.size()));
}

double SoftmaxConfusionMatrix::row_sum(std::size_t row) const {
    const auto first = entries_.begin() + static_cast<std::ptrdiff_t>(row * size());
    return std::accumulate(first, first + static_cast<std::ptrdiff_t>(size()), 0.0);
}

double SoftmaxConfusionMatrix::max_row_deviation() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < size(); ++r) worst = std::max(worst, std::abs(row_sum(r) - 1.0));
    return worst;
}

SoftmaxConfusionMatrix compute_confusion_matrix(const ClassifierModel& model, const LabeledDataset& dataset,
                                                const ClassSubset& subset) {
    if (model.classes() != subset)
        throw InvalidArgument("model class subset differs from the requested confusion subset");
    return compute_confusion_matrix(
        [&model](const FeatureVector& x, Label) { return predict_probs(model, x); }, dataset, subset);
}

SoftmaxConfusionMatrix compute_confusion_matrix(const ExampleScorer& scorer, const LabeledDataset& dataset,
                                                const ClassSubset& subset) {
    const std::size_t n = subset.size();
    if (n == 0) throw InvalidArgument("confusion matrix over an empty subset");
    std::vector<double> sums(n * n, 0.0);
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::size_t row = subset.index_of(dataset.label(i));
        if (row == n) continue;
        const ProbVector p = scorer(dataset.features(i), dataset.label(i));
        if (p.size() != n)
            throw ShapeError("scorer returned " + std::to_string(p.size()) + " probabilities for " +
                             std::to_string(n) + " classes");
        for (std::size_t j = 0; j < n; ++j) sums[row * n + j] += p[j];
        ++counts[row];
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (counts[r] == 0)
            throw EmptyClassError(subset[r], "class " + std::to_string(subset[r]) +
                                                 " has no examples for confusion estimation");
        const double inv = 1.0 / static_cast<double>(counts[r]);
        for (std::size_t j = 0; j < n; ++j) sums[r * n + j] *= inv;
    }
    return SoftmaxConfusionMatrix(subset, std::move(sums));
}

std::vector<ConfusionSet> extract_confusion_sets(const SoftmaxConfusionMatrix& matrix, double alpha,
                                                 std::size_t cap) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in [0, 1)");
    if (cap < 1) throw InvalidArgument("confusion set cap must be at least 1");
    const std::size_t n = matrix.size();
    const ClassSubset& classes = matrix.classes();
    std::vector<ConfusionSet> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (i != j && matrix(i, j) > alpha) rows.push_back(i);
        if (rows.size() + 1 > cap) {
            std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
                if (matrix(a, j) != matrix(b, j)) return matrix(a, j) > matrix(b, j);
                return classes[a] < classes[b];
            });
            rows.resize(cap - 1);
        }
        ConfusionSet set;
        set.owner = classes[j];
        set.members.push_back(classes[j]);
        for (std::size_t i : rows) set.members.push_back(classes[i]);
        std::sort(set.members.begin(), set.members.end());
        out.push_back(std::move(set));
    }
    return out;
}

std::string confusion_matrix_csv(const SoftmaxConfusionMatrix& matrix) {
    std::string out = "label";
    for (Label l : matrix.classes()) out += "," + std::to_string(l);
    out += "\n";
    char buf[32];
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out += std::to_string(matrix.classes()[i]);
        for (std::size_t j = 0; j < matrix.size(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", matrix(i, j));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string confusion_sets_json(const std::vector<ConfusionSet>& sets) {
    detail::json j = detail::json::object();
    for (const auto& s : sets) j[std::to_string(s.owner)] = s.members;
    return j.dump(1) + "\n";
}

}  // namespace conftree
