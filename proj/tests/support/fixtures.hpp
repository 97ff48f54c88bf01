#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "conftree/classifier.hpp"
#include "conftree/dataio.hpp"
#include "conftree/packing.hpp"
#include "conftree/tree.hpp"

namespace conftree::testing {

// Two Gaussian blobs far apart along the first axis.
inline LabeledDataset two_blobs(std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<FeatureVector> x;
    std::vector<Label> y;
    for (Label c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            x.push_back({(c == 0 ? -3.0 : 3.0) + noise(rng), noise(rng)});
            y.push_back(c);
        }
    }
    return LabeledDataset(std::move(x), std::move(y));
}

inline LabeledDataset random_dataset(std::size_t n_classes, std::size_t per_class, std::size_t dim,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<FeatureVector> x;
    std::vector<Label> y;
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            FeatureVector v(dim);
            for (double& e : v) e = noise(rng);
            v[c % dim] += 2.0;
            x.push_back(std::move(v));
            y.push_back(static_cast<Label>(c));
        }
    }
    return LabeledDataset(std::move(x), std::move(y));
}

// Softmax-regression model with zero weights and the given output biases.
inline ClassifierModel bias_model(std::vector<Label> labels, std::vector<double> bias, std::size_t dim) {
    auto m = ClassifierModel::zeros({Architecture::SoftmaxRegression, 0}, dim, ClassSubset(std::move(labels)));
    m.output_layer().bias = std::move(bias);
    return m;
}

inline PackingInstance random_instance(std::mt19937_64& rng, std::size_t max_sets, std::size_t max_limit,
                                       std::size_t label_range) {
    PackingInstance inst;
    inst.limit = std::uniform_int_distribution<std::size_t>(1, max_limit)(rng);
    const auto n = std::uniform_int_distribution<std::size_t>(1, max_sets)(rng);
    std::uniform_int_distribution<Label> label(0, static_cast<Label>(label_range) - 1);
    for (std::size_t j = 0; j < n; ++j) {
        const auto size = std::uniform_int_distribution<std::size_t>(1, inst.limit)(rng);
        LabelSet s;
        while (s.size() < size) {
            s.push_back(label(rng));
            s = make_label_set(s);
        }
        inst.sets.push_back(std::move(s));
    }
    return inst;
}

inline TrainSpec quick_spec(std::uint64_t seed = 1, int epochs = 30) {
    TrainSpec s;
    s.learning_rate = 0.1;
    s.epochs = epochs;
    s.batch_size = 16;
    s.seed = seed;
    return s;
}

inline TreeConfig depth_one_config(std::size_t limit, double alpha, const TrainSpec& spec, std::uint64_t seed = 0) {
    TreeConfig c;
    c.max_depth = 1;
    c.size_limits = {limit};
    c.alphas = {alpha};
    c.train_specs = {spec};
    c.seed = seed;
    return c;
}

// Every non-leaf routes each label to a child containing it.
inline bool routing_sound(const ClassifierTree& tree) {
    for (const auto& n : tree.nodes()) {
        if (n.is_leaf()) {
            if (!n.routing.empty()) return false;
            continue;
        }
        if (n.routing.size() != n.subset.size()) return false;
        for (Label l : n.subset) {
            auto it = n.routing.find(l);
            if (it == n.routing.end() || it->second >= n.children.size()) return false;
            if (!tree.node(n.children[it->second]).subset.contains(l)) return false;
        }
    }
    return true;
}

}  // namespace conftree::testing
