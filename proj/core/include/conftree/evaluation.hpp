#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "conftree/classifier.hpp"
#include "conftree/tree.hpp"
#include "conftree/types.hpp"

namespace conftree {

class LabeledDataset;

// Anything that ranks the full class set.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual const ClassSubset& classes() const = 0;
    // Top-k ranked labels; k is clamped to the number of classes.
    virtual std::vector<Label> rank(std::span<const double> x, std::size_t k) const = 0;
    // Probability vector over classes().
    virtual ProbVector class_scores(std::span<const double> x) const = 0;
    virtual std::string id() const = 0;
};

class ModelPredictor final : public Predictor {
public:
    explicit ModelPredictor(ClassifierModel model, std::string id = "basic");

    const ClassSubset& classes() const override { return model_.classes(); }
    std::vector<Label> rank(std::span<const double> x, std::size_t k) const override;
    ProbVector class_scores(std::span<const double> x) const override;
    std::string id() const override { return id_; }
    const ClassifierModel& model() const noexcept { return model_; }

private:
    ClassifierModel model_;
    std::string id_;
};

// Ranks with predict_topk. Scores are the leaf probabilities placed on the
// leaf subset, zero elsewhere.
class TreePredictor final : public Predictor {
public:
    explicit TreePredictor(ClassifierTree tree, std::string id = "tree");

    const ClassSubset& classes() const override { return tree_.classes(); }
    std::vector<Label> rank(std::span<const double> x, std::size_t k) const override;
    ProbVector class_scores(std::span<const double> x) const override;
    std::string id() const override { return id_; }
    const ClassifierTree& tree() const noexcept { return tree_; }

private:
    ClassifierTree tree_;
    std::string id_;
};

// Arithmetic mean of the members' class_scores, in the first member's
// class order.
class Ensemble final : public Predictor {
public:
    explicit Ensemble(std::vector<std::shared_ptr<const Predictor>> members, std::string id = "ensemble");

    const ClassSubset& classes() const override { return classes_; }
    std::vector<Label> rank(std::span<const double> x, std::size_t k) const override;
    ProbVector class_scores(std::span<const double> x) const override;
    std::string id() const override { return id_; }
    std::size_t size() const noexcept { return members_.size(); }

private:
    std::vector<std::shared_ptr<const Predictor>> members_;
    ClassSubset classes_;
    // member -> (position in classes_ for each of its classes)
    std::vector<std::vector<std::size_t>> index_maps_;
    std::string id_;
};

std::vector<Label> ensemble_topk(const Ensemble& ensemble, std::span<const double> x, std::size_t k);

struct EvalReport {
    std::string predictor_id;
    std::size_t n_examples = 0;
    std::map<std::size_t, double> top_k_errors;
    std::map<std::size_t, std::size_t> top_k_misses;
    std::map<Label, double> per_class_errors;  // top-1

    std::string to_json() const;
    std::string to_table() const;
};

// `workers` > 1 scores examples on that many threads; the report is
// identical for any worker count.
EvalReport evaluate(const Predictor& predictor, const LabeledDataset& dataset,
                    std::span<const std::size_t> ks, std::size_t workers = 1);

enum class FlipTag { Corrected, Broken, BothWrongDifferent };
std::string_view to_string(FlipTag tag);

struct Flip {
    std::size_t example_id = 0;
    Label truth = 0;
    Label basic_prediction = 0;
    Label tree_prediction = 0;
    FlipTag tag = FlipTag::BothWrongDifferent;
};

struct Comparison {
    EvalReport basic;
    EvalReport tree;
    std::vector<Flip> flips;

    std::size_t corrected() const;
    std::size_t broken() const;
    std::string flips_csv() const;
};

Comparison compare(const Predictor& basic, const Predictor& tree, const LabeledDataset& dataset,
                   std::span<const std::size_t> ks, std::size_t workers = 1);

}  // namespace conftree
