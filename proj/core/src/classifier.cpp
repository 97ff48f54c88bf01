#include "conftree/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "json_util.hpp"

namespace conftree {

namespace {

constexpr double kOutputInitRange = 0.01;
constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

void fill_uniform(std::vector<double>& values, double range, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-range, range);
    for (double& v : values) v = dist(rng);
}

// Hidden activations (tanh) for one input.
void hidden_forward(const DenseLayer& layer, std::span<const double> x, std::vector<double>& out) {
    out.resize(layer.outputs);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double* row = layer.weights.data() + o * layer.inputs;
        double z = layer.bias[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) z += row[i] * x[i];
        out[o] = std::tanh(z);
    }
}

void linear_forward(const DenseLayer& layer, std::span<const double> x, std::vector<double>& out) {
    out.resize(layer.outputs);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double* row = layer.weights.data() + o * layer.inputs;
        double z = layer.bias[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) z += row[i] * x[i];
        out[o] = z;
    }
}

void check_input(const ClassifierModel& model, std::size_t dim) {
    if (dim != model.input_dim())
        throw ShapeError("input has dimension " + std::to_string(dim) + ", model expects " +
                         std::to_string(model.input_dim()));
}

// Class position of every example; throws InvalidLabel for labels outside
// the model's subset.
std::vector<std::size_t> target_indices(const ClassifierModel& model, const LabeledDataset& dataset) {
    std::vector<std::size_t> targets(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::size_t t = model.classes().index_of(dataset.label(i));
        if (t == model.num_classes())
            throw InvalidLabel("label " + std::to_string(dataset.label(i)) + " of example " +
                               std::to_string(i) + " is not in the model's class subset");
        targets[i] = t;
    }
    return targets;
}

double weight_norm_sq(const ClassifierModel& model) {
    double s = 0.0;
    for (double w : model.output_layer().weights) s += w * w;
    if (model.has_hidden())
        for (double w : model.hidden_layer().weights) s += w * w;
    return s;
}

// Accumulates the unpenalized, unaveraged cross-entropy gradient of a
// batch into `grad` and returns the summed loss.
double accumulate_batch(const ClassifierModel& model, const LabeledDataset& dataset,
                        std::span<const std::size_t> indices, std::span<const std::size_t> targets,
                        LossGradient& grad) {
    const DenseLayer& out_layer = model.output_layer();
    const std::size_t n = out_layer.outputs;
    const std::size_t f = out_layer.inputs;
    std::vector<double> act;
    std::vector<double> logits;
    std::vector<double> delta(n);
    std::vector<double> back(f);
    double total = 0.0;

    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& x = dataset.features(indices[b]);
        std::span<const double> feat(x);
        if (model.has_hidden()) {
            hidden_forward(model.hidden_layer(), x, act);
            feat = act;
        }
        linear_forward(out_layer, feat, logits);
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        const double log_z = mx + std::log(z);
        const std::size_t t = targets[b];
        total += log_z - logits[t];

        for (std::size_t o = 0; o < n; ++o) delta[o] = std::exp(logits[o] - log_z) - (o == t ? 1.0 : 0.0);
        for (std::size_t o = 0; o < n; ++o) {
            double* grow = grad.output.weights.data() + o * f;
            for (std::size_t i = 0; i < f; ++i) grow[i] += delta[o] * feat[i];
            grad.output.bias[o] += delta[o];
        }
        if (!model.has_hidden()) continue;

        std::fill(back.begin(), back.end(), 0.0);
        for (std::size_t o = 0; o < n; ++o) {
            const double* row = out_layer.weights.data() + o * f;
            for (std::size_t i = 0; i < f; ++i) back[i] += row[i] * delta[o];
        }
        const DenseLayer& hid = model.hidden_layer();
        for (std::size_t h = 0; h < hid.outputs; ++h) {
            const double dz = back[h] * (1.0 - act[h] * act[h]);
            double* grow = grad.hidden.weights.data() + h * hid.inputs;
            for (std::size_t i = 0; i < hid.inputs; ++i) grow[i] += dz * x[i];
            grad.hidden.bias[h] += dz;
        }
    }
    return total;
}

LossGradient zero_gradient(const ClassifierModel& model) {
    LossGradient g;
    g.output = DenseLayer(model.output_layer().inputs, model.output_layer().outputs);
    if (model.has_hidden()) g.hidden = DenseLayer(model.hidden_layer().inputs, model.hidden_layer().outputs);
    return g;
}

void finish_gradient(const ClassifierModel& model, LossGradient& g, double summed_loss,
                     std::size_t count, double l2) {
    const double inv = 1.0 / static_cast<double>(count);
    auto scale = [&](DenseLayer& grad_layer, const DenseLayer& layer) {
        for (std::size_t i = 0; i < grad_layer.weights.size(); ++i)
            grad_layer.weights[i] = grad_layer.weights[i] * inv + l2 * layer.weights[i];
        for (double& b : grad_layer.bias) b *= inv;
    };
    scale(g.output, model.output_layer());
    if (model.has_hidden()) scale(g.hidden, model.hidden_layer());
    g.loss = summed_loss * inv + 0.5 * l2 * weight_norm_sq(model);
}

void sgd_step(DenseLayer& layer, const DenseLayer& grad, double rate) {
    for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= rate * grad.weights[i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= rate * grad.bias[i];
}

detail::json layer_to_json(const DenseLayer& layer) {
    return {{"inputs", layer.inputs},
            {"outputs", layer.outputs},
            {"weights", detail::doubles_to_json(layer.weights)},
            {"bias", detail::doubles_to_json(layer.bias)}};
}

DenseLayer layer_from_json(const detail::json& j, const std::string& where) {
    DenseLayer layer;
    layer.inputs = detail::as_u64(detail::member(j, "inputs", where), where + "/inputs");
    layer.outputs = detail::as_u64(detail::member(j, "outputs", where), where + "/outputs");
    layer.weights = detail::as_doubles(detail::member(j, "weights", where), where + "/weights");
    layer.bias = detail::as_doubles(detail::member(j, "bias", where), where + "/bias");
    if (layer.weights.size() != layer.inputs * layer.outputs)
        throw ParseError(where + "/weights", "expected " + std::to_string(layer.inputs * layer.outputs) +
                                                 " values, found " + std::to_string(layer.weights.size()));
    if (layer.bias.size() != layer.outputs)
        throw ParseError(where + "/bias", "expected " + std::to_string(layer.outputs) + " values");
    return layer;
}

}  // namespace

std::string_view to_string(Architecture arch) {
    return arch == Architecture::SoftmaxRegression ? "softmax-regression" : "one-hidden-layer";
}

Architecture architecture_from_string(std::string_view name) {
    if (name == "softmax-regression" || name == "softmax") return Architecture::SoftmaxRegression;
    if (name == "one-hidden-layer" || name == "mlp") return Architecture::OneHiddenLayer;
    throw InvalidArgument("unknown architecture '" + std::string(name) + "'");
}

ClassifierModel ClassifierModel::zeros(const ModelShape& shape, std::size_t input_dim, ClassSubset classes) {
    if (input_dim == 0) throw InvalidArgument("input dimension must be positive");
    if (classes.empty()) throw InvalidArgument("model needs at least one class");
    ClassifierModel m;
    m.arch_ = shape.architecture;
    m.input_dim_ = input_dim;
    m.classes_ = std::move(classes);
    if (m.has_hidden()) {
        if (shape.hidden_width == 0) throw InvalidArgument("hidden width must be positive");
        m.hidden_ = DenseLayer(input_dim, shape.hidden_width);
    }
    m.output_ = DenseLayer(m.feature_width(), m.classes_.size());
    return m;
}

void ClassifierModel::check() const {
    if (output_.outputs != classes_.size())
        throw ShapeError("output layer has " + std::to_string(output_.outputs) + " units for " +
                         std::to_string(classes_.size()) + " classes");
    if (output_.inputs != feature_width()) throw ShapeError("output layer input width mismatch");
    if (has_hidden() && hidden_.inputs != input_dim_) throw ShapeError("hidden layer input width mismatch");
    if (!has_hidden() && (hidden_.inputs != 0 || hidden_.outputs != 0))
        throw ShapeError("softmax regression carries a hidden layer");
    auto finite = [](const DenseLayer& l) {
        return std::all_of(l.weights.begin(), l.weights.end(), [](double v) { return std::isfinite(v); }) &&
               std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); });
    };
    if (!finite(hidden_) || !finite(output_)) throw InvalidArgument("model has non-finite parameters");
}

void TrainSpec::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InvalidArgument("learning_rate must be positive");
    if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
    if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InvalidArgument("l2 must be nonnegative");
    if (!(lr_decay > 0.0)) throw InvalidArgument("lr_decay must be positive");
    if (decay_every < 0) throw InvalidArgument("decay_every must be nonnegative");
}

ProbVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidArgument("softmax of an empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    ProbVector p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

std::vector<double> predict_logits(const ClassifierModel& model, std::span<const double> x) {
    check_input(model, x.size());
    std::vector<double> logits;
    if (model.has_hidden()) {
        std::vector<double> act;
        hidden_forward(model.hidden_layer(), x, act);
        linear_forward(model.output_layer(), act, logits);
    } else {
        linear_forward(model.output_layer(), x, logits);
    }
    return logits;
}

ProbVector predict_probs(const ClassifierModel& model, std::span<const double> x) {
    return softmax(predict_logits(model, x));
}

ClassifierModel init_model(const ModelShape& shape, std::size_t input_dim, ClassSubset classes,
                           std::uint64_t seed) {
    ClassifierModel m = ClassifierModel::zeros(shape, input_dim, std::move(classes));
    std::mt19937_64 rng(seed);
    if (m.has_hidden()) {
        const double range = std::sqrt(6.0 / static_cast<double>(input_dim + shape.hidden_width));
        fill_uniform(m.hidden_layer().weights, range, rng);
    }
    fill_uniform(m.output_layer().weights, kOutputInitRange, rng);
    return m;
}

void train_sgd(ClassifierModel& model, const LabeledDataset& dataset, const TrainSpec& spec,
               const FitHooks* hooks) {
    spec.validate();
    if (dataset.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
    check_input(model, dataset.dim());
    const auto targets = target_indices(model, dataset);

    if (hooks && hooks->on_start) hooks->on_start(model);

    std::mt19937_64 rng(spec.seed ^ kShuffleStream);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> batch_targets;
    double rate = spec.learning_rate;
    const std::size_t batch = static_cast<std::size_t>(spec.batch_size);

    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        if (spec.decay_every > 0 && epoch > 0 && epoch % spec.decay_every == 0) rate *= spec.lr_decay;
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            std::span<const std::size_t> idx(order.data() + start, stop - start);
            batch_targets.resize(idx.size());
            for (std::size_t b = 0; b < idx.size(); ++b) batch_targets[b] = targets[idx[b]];
            LossGradient g = zero_gradient(model);
            const double summed = accumulate_batch(model, dataset, idx, batch_targets, g);
            finish_gradient(model, g, summed, idx.size(), spec.l2);
            epoch_loss += g.loss * static_cast<double>(idx.size());
            sgd_step(model.output_layer(), g.output, rate);
            if (model.has_hidden() && !spec.freeze_hidden) sgd_step(model.hidden_layer(), g.hidden, rate);
        }
        if (hooks && hooks->on_epoch) hooks->on_epoch(epoch, epoch_loss / static_cast<double>(order.size()));
    }
    model.check();
}

ClassifierModel fit(const LabeledDataset& dataset, const ClassSubset& subset, const TrainSpec& spec,
                    const ModelShape& shape, const FitHooks* hooks) {
    spec.validate();
    if (subset.size() < 2) throw InvalidArgument("fit needs a class subset of at least 2 labels");
    if (dataset.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
    ClassifierModel model = init_model(shape, dataset.dim(), subset, spec.seed);
    train_sgd(model, dataset, spec, hooks);
    return model;
}

ClassifierModel fine_tune(const LabeledDataset& dataset, const ClassSubset& subset,
                          const TrainSpec& spec, const ClassifierModel& warm_start,
                          const FitHooks* hooks) {
    spec.validate();
    if (subset.size() < 2) throw InvalidArgument("fit needs a class subset of at least 2 labels");
    if (dataset.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
    if (warm_start.input_dim() != dataset.dim())
        throw ShapeError("warm-start model expects dimension " + std::to_string(warm_start.input_dim()) +
                         ", dataset has " + std::to_string(dataset.dim()));
    ClassifierModel model = ClassifierModel::zeros(warm_start.shape(), warm_start.input_dim(), subset);
    if (model.has_hidden()) model.hidden_layer() = warm_start.hidden_layer();
    std::mt19937_64 rng(spec.seed);
    fill_uniform(model.output_layer().weights, kOutputInitRange, rng);
    train_sgd(model, dataset, spec, hooks);
    return model;
}

LossGradient loss_and_gradient(const ClassifierModel& model, const LabeledDataset& dataset,
                               std::span<const std::size_t> indices, double l2) {
    if (indices.empty()) throw InvalidArgument("gradient over an empty batch");
    check_input(model, dataset.dim());
    const auto all_targets = target_indices(model, dataset);
    std::vector<std::size_t> targets(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) targets[b] = all_targets.at(indices[b]);
    LossGradient g = zero_gradient(model);
    const double summed = accumulate_batch(model, dataset, indices, targets, g);
    finish_gradient(model, g, summed, indices.size(), l2);
    return g;
}

double loss(const ClassifierModel& model, const LabeledDataset& dataset,
            std::span<const std::size_t> indices, double l2) {
    if (indices.empty()) throw InvalidArgument("loss over an empty batch");
    double total = 0.0;
    for (std::size_t i : indices) {
        const auto logits = predict_logits(model, dataset.features(i));
        const std::size_t t = model.classes().index_of(dataset.label(i));
        if (t == model.num_classes()) throw InvalidLabel("label outside the model's class subset");
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        total += mx + std::log(z) - logits[t];
    }
    return total / static_cast<double>(indices.size()) + 0.5 * l2 * weight_norm_sq(model);
}

std::vector<double> parameters(const ClassifierModel& model) {
    std::vector<double> p;
    const auto& h = model.hidden_layer();
    const auto& o = model.output_layer();
    p.insert(p.end(), h.weights.begin(), h.weights.end());
    p.insert(p.end(), h.bias.begin(), h.bias.end());
    p.insert(p.end(), o.weights.begin(), o.weights.end());
    p.insert(p.end(), o.bias.begin(), o.bias.end());
    return p;
}

void set_parameters(ClassifierModel& model, std::span<const double> params) {
    auto& h = model.hidden_layer();
    auto& o = model.output_layer();
    const std::size_t n = h.weights.size() + h.bias.size() + o.weights.size() + o.bias.size();
    if (params.size() != n) throw ShapeError("parameter vector has the wrong length");
    auto it = params.begin();
    for (auto* v : {&h.weights, &h.bias, &o.weights, &o.bias}) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
        it += static_cast<std::ptrdiff_t>(v->size());
    }
}

std::vector<double> flatten(const LossGradient& grad) {
    std::vector<double> p;
    p.insert(p.end(), grad.hidden.weights.begin(), grad.hidden.weights.end());
    p.insert(p.end(), grad.hidden.bias.begin(), grad.hidden.bias.end());
    p.insert(p.end(), grad.output.weights.begin(), grad.output.weights.end());
    p.insert(p.end(), grad.output.bias.begin(), grad.output.bias.end());
    return p;
}

std::string model_to_json(const ClassifierModel& model) {
    model.check();
    detail::json j;
    j["format"] = "conftree-model";
    j["version"] = 1;
    j["architecture"] = std::string(to_string(model.architecture()));
    j["input_dim"] = model.input_dim();
    j["hidden_width"] = model.hidden_width();
    j["classes"] = model.classes().labels();
    if (model.has_hidden()) j["hidden"] = layer_to_json(model.hidden_layer());
    j["output"] = layer_to_json(model.output_layer());
    return j.dump(1) + "\n";
}

ClassifierModel model_from_json(std::string_view text) {
    const auto j = detail::parse_json(text, "model");
    const std::string root;
    if (detail::as_string(detail::member(j, "format", root), "/format") != "conftree-model")
        throw ParseError("/format", "not a conftree model document");
    ModelShape shape;
    try {
        shape.architecture =
            architecture_from_string(detail::as_string(detail::member(j, "architecture", root), "/architecture"));
    } catch (const InvalidArgument& e) {
        throw ParseError("/architecture", e.what());
    }
    shape.hidden_width = detail::as_u64(detail::member(j, "hidden_width", root), "/hidden_width");
    const auto input_dim = detail::as_u64(detail::member(j, "input_dim", root), "/input_dim");
    const auto labels = detail::as_ints(detail::member(j, "classes", root), "/classes");
    ClassifierModel m;
    try {
        m = ClassifierModel::zeros(shape, input_dim, ClassSubset(labels));
    } catch (const InvalidArgument& e) {
        throw ParseError("", e.what());
    }
    if (m.has_hidden()) m.hidden_layer() = layer_from_json(detail::member(j, "hidden", root), "/hidden");
    m.output_layer() = layer_from_json(detail::member(j, "output", root), "/output");
    try {
        m.check();
    } catch (const Error& e) {
        throw ParseError("", e.what());
    }
    return m;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << model_to_json(model);
    if (!out) throw Error("failed writing " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return model_from_json(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + (e.location().empty() ? "" : ":" + e.location()), e.message());
    }
}

}  // namespace conftree
