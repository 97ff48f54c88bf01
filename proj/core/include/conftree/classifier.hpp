#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conftree/types.hpp"

namespace conftree {

class LabeledDataset;

enum class Architecture { SoftmaxRegression, OneHiddenLayer };

std::string_view to_string(Architecture arch);
Architecture architecture_from_string(std::string_view name);

// Fully connected layer; weights are row-major (outputs x inputs).
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out)
        : inputs(in), outputs(out), weights(in * out, 0.0), bias(out, 0.0) {}

    double& w(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
    double w(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelShape {
    Architecture architecture = Architecture::SoftmaxRegression;
    std::size_t hidden_width = 0;  // ignored for softmax regression
};

// Softmax regression (input -> output) or a one-hidden-layer tanh network
// (input -> hidden -> output). The output layer always has one unit per
// label of class_subset, in that order.
class ClassifierModel {
public:
    ClassifierModel() = default;

    // All-zero parameters.
    static ClassifierModel zeros(const ModelShape& shape, std::size_t input_dim, ClassSubset classes);

    Architecture architecture() const noexcept { return arch_; }
    bool has_hidden() const noexcept { return arch_ == Architecture::OneHiddenLayer; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t hidden_width() const noexcept { return has_hidden() ? hidden_.outputs : 0; }
    std::size_t num_classes() const noexcept { return classes_.size(); }
    const ClassSubset& classes() const noexcept { return classes_; }
    ModelShape shape() const noexcept { return {arch_, hidden_width()}; }

    DenseLayer& hidden_layer() { return hidden_; }
    const DenseLayer& hidden_layer() const { return hidden_; }
    DenseLayer& output_layer() { return output_; }
    const DenseLayer& output_layer() const { return output_; }

    // Width of the representation feeding the output layer.
    std::size_t feature_width() const noexcept { return has_hidden() ? hidden_.outputs : input_dim_; }

    // Throws ShapeError when layer shapes disagree, InvalidArgument on
    // non-finite parameters.
    void check() const;

    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

private:
    Architecture arch_ = Architecture::SoftmaxRegression;
    std::size_t input_dim_ = 0;
    ClassSubset classes_;
    DenseLayer hidden_;
    DenseLayer output_;
};

struct TrainSpec {
    double learning_rate = 0.1;
    int epochs = 50;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool freeze_hidden = false;
    double l2 = 0.0;
    // Optional step decay: multiply the rate by lr_decay every decay_every
    // epochs. decay_every == 0 keeps a fixed rate.
    double lr_decay = 1.0;
    int decay_every = 0;

    void validate() const;
    friend bool operator==(const TrainSpec&, const TrainSpec&) = default;
};

struct FitHooks {
    // Called once with the initialized model, before the first SGD step.
    std::function<void(const ClassifierModel&)> on_start;
    // Called after each epoch with the mean training loss of that epoch.
    std::function<void(int epoch, double mean_loss)> on_epoch;
};

// Numerically stable softmax (max-subtracted).
ProbVector softmax(std::span<const double> logits);

std::vector<double> predict_logits(const ClassifierModel& model, std::span<const double> x);
ProbVector predict_probs(const ClassifierModel& model, std::span<const double> x);

// Fresh model: hidden weights Xavier-uniform, output layer uniform in
// [-0.01, 0.01], biases zero; all drawn from `seed`.
ClassifierModel init_model(const ModelShape& shape, std::size_t input_dim, ClassSubset classes,
                           std::uint64_t seed);

// Trains a fresh model on `dataset` over `subset`.
ClassifierModel fit(const LabeledDataset& dataset, const ClassSubset& subset, const TrainSpec& spec,
                    const ModelShape& shape, const FitHooks* hooks = nullptr);

// Warm start: copies the hidden layer of `warm_start`, replaces the output
// layer by a freshly initialized one sized for `subset` (uniform in
// [-0.01, 0.01], seeded by spec.seed), then runs SGD. With
// spec.freeze_hidden the copied hidden layer is never updated.
ClassifierModel fine_tune(const LabeledDataset& dataset, const ClassSubset& subset,
                          const TrainSpec& spec, const ClassifierModel& warm_start,
                          const FitHooks* hooks = nullptr);

// Runs SGD on `model` in place. Every dataset label must belong to
// model.classes().
void train_sgd(ClassifierModel& model, const LabeledDataset& dataset, const TrainSpec& spec,
               const FitHooks* hooks = nullptr);

struct LossGradient {
    double loss = 0.0;
    DenseLayer hidden;  // empty for softmax regression
    DenseLayer output;
};

// Mean softmax cross-entropy over the selected examples plus
// (l2 / 2) * ||weights||^2 (biases are not penalized), and its gradient.
LossGradient loss_and_gradient(const ClassifierModel& model, const LabeledDataset& dataset,
                               std::span<const std::size_t> indices, double l2);

// Loss alone, sharing no code with the backward pass.
double loss(const ClassifierModel& model, const LabeledDataset& dataset,
            std::span<const std::size_t> indices, double l2);

// Flat parameter view: hidden weights, hidden bias, output weights, output bias.
std::vector<double> parameters(const ClassifierModel& model);
void set_parameters(ClassifierModel& model, std::span<const double> params);
std::vector<double> flatten(const LossGradient& grad);

std::string model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(std::string_view text);
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace conftree
