#pragma once

// Reference computations that share no code path with the library
// routines they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "conftree/classifier.hpp"
#include "conftree/dataio.hpp"
#include "conftree/packing.hpp"

namespace conftree::oracle {

// Central differences of conftree::loss over the flat parameter vector.
inline std::vector<double> finite_difference_gradient(const ClassifierModel& model, const LabeledDataset& data,
                                                      const std::vector<std::size_t>& idx, double l2,
                                                      double step = 1e-5) {
    ClassifierModel probe = model;
    auto params = parameters(model);
    std::vector<double> grad(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        const double saved = params[p];
        params[p] = saved + step;
        set_parameters(probe, params);
        const double up = loss(probe, data, idx, l2);
        params[p] = saved - step;
        set_parameters(probe, params);
        const double down = loss(probe, data, idx, l2);
        params[p] = saved;
        grad[p] = (up - down) / (2.0 * step);
    }
    return grad;
}

// Entry-by-entry mean of a scorer's outputs, one pass per matrix cell.
inline std::vector<double> direct_confusion(const std::function<std::vector<double>(std::size_t)>& probs_of_example,
                                            const LabeledDataset& data, const ClassSubset& subset) {
    const std::size_t n = subset.size();
    std::vector<double> h(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t e = 0; e < data.size(); ++e) {
                if (data.label(e) != subset[i]) continue;
                sum += probs_of_example(e)[j];
                ++count;
            }
            h[i * n + j] = sum / static_cast<double>(count);
        }
    }
    return h;
}

// Minimum number of supersets by enumerating every set partition of the
// instance (restricted growth strings) with no pruning.
inline std::size_t exhaustive_min_supersets(const PackingInstance& inst) {
    const std::size_t n = inst.sets.size();
    std::vector<std::size_t> rgs(n, 0);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t groups) {
        if (pos == n) {
            std::vector<std::set<Label>> unions(groups);
            for (std::size_t j = 0; j < n; ++j) unions[rgs[j]].insert(inst.sets[j].begin(), inst.sets[j].end());
            const bool feasible = std::all_of(unions.begin(), unions.end(),
                                              [&](const std::set<Label>& u) { return u.size() <= inst.limit; });
            if (feasible) best = std::min(best, groups);
            return;
        }
        for (std::size_t g = 0; g <= groups; ++g) {
            rgs[pos] = g;
            rec(pos + 1, std::max(groups, g + 1));
        }
    };
    rec(0, 0);
    return best;
}

inline std::vector<double> closed_form_softmax(const std::vector<double>& logits) {
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    std::vector<double> p;
    for (double l : logits) p.push_back(std::exp(l) / z);
    return p;
}

}  // namespace conftree::oracle
