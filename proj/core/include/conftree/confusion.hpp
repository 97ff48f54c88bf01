#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "conftree/types.hpp"

namespace conftree {

class ClassifierModel;
class LabeledDataset;

// Row i is the mean predicted probability vector over the examples of
// class i; rows and columns follow `classes`.
class SoftmaxConfusionMatrix {
public:
    SoftmaxConfusionMatrix() = default;
    SoftmaxConfusionMatrix(ClassSubset classes, std::vector<double> entries);

    std::size_t size() const noexcept { return classes_.size(); }
    const ClassSubset& classes() const noexcept { return classes_; }
    double operator()(std::size_t row, std::size_t col) const { return entries_[row * size() + col]; }
    const std::vector<double>& entries() const noexcept { return entries_; }
    double row_sum(std::size_t row) const;

    // Largest |row_sum - 1|.
    double max_row_deviation() const;

private:
    ClassSubset classes_;
    std::vector<double> entries_;
};

struct ConfusionSet {
    Label owner = 0;
    std::vector<Label> members;  // ascending, contains owner

    friend bool operator==(const ConfusionSet&, const ConfusionSet&) = default;
};

// Scores one example (features, true label) over a fixed class order.
using ExampleScorer = std::function<ProbVector(const FeatureVector&, Label)>;

// Examples whose label is outside `subset` are ignored. Throws
// EmptyClassError for a class of `subset` with no example.
SoftmaxConfusionMatrix compute_confusion_matrix(const ClassifierModel& model,
                                                const LabeledDataset& dataset,
                                                const ClassSubset& subset);
SoftmaxConfusionMatrix compute_confusion_matrix(const ExampleScorer& scorer,
                                                const LabeledDataset& dataset,
                                                const ClassSubset& subset);

// S_j = {c_i : H(i,j) > alpha} plus c_j. Sets larger than `cap` keep c_j
// and the cap-1 highest column scores (smaller label on ties).
std::vector<ConfusionSet> extract_confusion_sets(const SoftmaxConfusionMatrix& matrix, double alpha,
                                                 std::size_t cap);

// Header "label,<c_1>,...,<c_n>" then one row per true class.
std::string confusion_matrix_csv(const SoftmaxConfusionMatrix& matrix);
// {"<owner>": [members...], ...}
std::string confusion_sets_json(const std::vector<ConfusionSet>& sets);

}  // namespace conftree
