#include "conftree/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "json_util.hpp"

namespace conftree {

using detail::json;

ModelPredictor::ModelPredictor(ClassifierModel model, std::string id)
    : model_(std::move(model)), id_(std::move(id)) {
    model_.check();
}

std::vector<Label> ModelPredictor::rank(std::span<const double> x, std::size_t k) const {
    return rank_labels(model_.classes(), predict_probs(model_, x), k);
}

ProbVector ModelPredictor::class_scores(std::span<const double> x) const { return predict_probs(model_, x); }

TreePredictor::TreePredictor(ClassifierTree tree, std::string id) : tree_(std::move(tree)), id_(std::move(id)) {}

std::vector<Label> TreePredictor::rank(std::span<const double> x, std::size_t k) const {
    return predict_topk(tree_, x, k);
}

ProbVector TreePredictor::class_scores(std::span<const double> x) const {
    const auto leaf = route(tree_, x);
    const ClassSubset& leaf_subset = tree_.node(leaf.leaf).subset;
    ProbVector scores(tree_.classes().size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < leaf_subset.size(); ++i) {
        scores[tree_.classes().index_of(leaf_subset[i])] = leaf.probs[i];
        total += leaf.probs[i];
    }
    for (double& s : scores) s /= total;
    return scores;
}

Ensemble::Ensemble(std::vector<std::shared_ptr<const Predictor>> members, std::string id)
    : members_(std::move(members)), id_(std::move(id)) {
    if (members_.empty()) throw InvalidArgument("ensemble needs at least one member");
    for (const auto& m : members_)
        if (!m) throw InvalidArgument("null ensemble member");
    classes_ = members_.front()->classes();
    for (const auto& m : members_) {
        if (!m->classes().same_members(classes_))
            throw InvalidArgument("ensemble member '" + m->id() + "' scores a different class set");
        std::vector<std::size_t> map;
        for (Label l : m->classes()) map.push_back(classes_.index_of(l));
        index_maps_.push_back(std::move(map));
    }
}

ProbVector Ensemble::class_scores(std::span<const double> x) const {
    ProbVector mean(classes_.size(), 0.0);
    for (std::size_t m = 0; m < members_.size(); ++m) {
        const ProbVector s = members_[m]->class_scores(x);
        for (std::size_t i = 0; i < s.size(); ++i) mean[index_maps_[m][i]] += s[i];
    }
    for (double& v : mean) v /= static_cast<double>(members_.size());
    return mean;
}

// Mean score descending; ties go to the smaller summed position in the
// members' own rankings, then to the smaller label.
std::vector<Label> Ensemble::rank(std::span<const double> x, std::size_t k) const {
    const std::size_t n = classes_.size();
    const ProbVector mean = class_scores(x);
    std::vector<std::size_t> position_sum(n, 0);
    for (const auto& m : members_) {
        const auto order = m->rank(x, n);
        for (std::size_t p = 0; p < order.size(); ++p) position_sum[classes_.index_of(order[p])] += p;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, n);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (mean[a] != mean[b]) return mean[a] > mean[b];
                          if (position_sum[a] != position_sum[b]) return position_sum[a] < position_sum[b];
                          return classes_[a] < classes_[b];
                      });
    std::vector<Label> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(classes_[idx[i]]);
    return out;
}

std::vector<Label> ensemble_topk(const Ensemble& ensemble, std::span<const double> x, std::size_t k) {
    if (k == 0) throw InvalidArgument("k must be at least 1");
    return ensemble.rank(x, k);
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

double rounded4(double v) { return std::round(v * 1e4) / 1e4; }

// Rankings of length max(ks) for every example.
std::vector<std::vector<Label>> rank_all(const Predictor& predictor, const LabeledDataset& dataset,
                                         std::size_t depth, std::size_t workers) {
    std::vector<std::vector<Label>> out(dataset.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out[i] = predictor.rank(dataset.features(i), depth);
    };
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, dataset.size()));
    if (workers == 1) {
        work(0, dataset.size());
        return out;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (dataset.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(dataset.size(), b + chunk);
        if (b < e) pool.emplace_back(work, b, e);
    }
    return out;
}

EvalReport report_from_rankings(const Predictor& predictor, const LabeledDataset& dataset,
                                std::span<const std::size_t> ks, const std::vector<std::vector<Label>>& ranks) {
    EvalReport r;
    r.predictor_id = predictor.id();
    r.n_examples = dataset.size();
    for (std::size_t k : ks) r.top_k_misses[k] = 0;
    std::map<Label, std::pair<std::size_t, std::size_t>> per_class;  // misses, total
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Label truth = dataset.label(i);
        const auto& ranking = ranks[i];
        const auto pos = static_cast<std::size_t>(std::find(ranking.begin(), ranking.end(), truth) - ranking.begin());
        for (auto& [k, misses] : r.top_k_misses)
            if (pos >= k) ++misses;
        auto& pc = per_class[truth];
        if (pos != 0) ++pc.first;
        ++pc.second;
    }
    for (const auto& [k, misses] : r.top_k_misses)
        r.top_k_errors[k] = static_cast<double>(misses) / static_cast<double>(r.n_examples);
    for (const auto& [label, c] : per_class)
        r.per_class_errors[label] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return r;
}

void check_eval_inputs(const Predictor& predictor, const LabeledDataset& dataset, std::span<const std::size_t> ks) {
    if (dataset.empty()) throw InvalidArgument("cannot evaluate on an empty dataset");
    if (ks.empty()) throw InvalidArgument("no k values requested");
    for (std::size_t k : ks)
        if (k == 0) throw InvalidArgument("k must be at least 1");
    for (Label l : dataset.classes())
        if (!predictor.classes().contains(l))
            throw InvalidArgument("predictor '" + predictor.id() + "' does not cover label " + std::to_string(l));
}

}  // namespace

std::string EvalReport::to_json() const {
    json errs = json::object();
    for (const auto& [k, e] : top_k_errors) errs[std::to_string(k)] = rounded4(e);
    json misses = json::object();
    for (const auto& [k, m] : top_k_misses) misses[std::to_string(k)] = m;
    json per_class = json::object();
    for (const auto& [l, e] : per_class_errors) per_class[std::to_string(l)] = rounded4(e);
    json j = {{"predictor_id", predictor_id},
              {"n_examples", n_examples},
              {"top_k_errors", std::move(errs)},
              {"top_k_misses", std::move(misses)},
              {"per_class_errors", std::move(per_class)}};
    return j.dump(1) + "\n";
}

std::string EvalReport::to_table() const {
    char buf[128];
    std::string out = "predictor: " + predictor_id + "\nexamples:  " + std::to_string(n_examples) + "\n\n";
    std::snprintf(buf, sizeof buf, "%-8s %10s %10s\n", "k", "misses", "error");
    out += buf;
    for (const auto& [k, e] : top_k_errors) {
        std::snprintf(buf, sizeof buf, "%-8zu %10zu %10s\n", k, top_k_misses.at(k), fixed4(e).c_str());
        out += buf;
    }
    out += "\n";
    std::snprintf(buf, sizeof buf, "%-8s %10s\n", "class", "top1_err");
    out += buf;
    for (const auto& [l, e] : per_class_errors) {
        std::snprintf(buf, sizeof buf, "%-8d %10s\n", l, fixed4(e).c_str());
        out += buf;
    }
    return out;
}

EvalReport evaluate(const Predictor& predictor, const LabeledDataset& dataset, std::span<const std::size_t> ks,
                    std::size_t workers) {
    check_eval_inputs(predictor, dataset, ks);
    const std::size_t depth = *std::max_element(ks.begin(), ks.end());
    return report_from_rankings(predictor, dataset, ks, rank_all(predictor, dataset, depth, workers));
}

std::string_view to_string(FlipTag tag) {
    switch (tag) {
        case FlipTag::Corrected: return "corrected";
        case FlipTag::Broken: return "broken";
        case FlipTag::BothWrongDifferent: return "both-wrong-different";
    }
    return "unknown";
}

std::size_t Comparison::corrected() const {
    return static_cast<std::size_t>(
        std::count_if(flips.begin(), flips.end(), [](const Flip& f) { return f.tag == FlipTag::Corrected; }));
}

std::size_t Comparison::broken() const {
    return static_cast<std::size_t>(
        std::count_if(flips.begin(), flips.end(), [](const Flip& f) { return f.tag == FlipTag::Broken; }));
}

std::string Comparison::flips_csv() const {
    std::string out = "example_id,truth,basic_pred,tree_pred,tag\n";
    for (const Flip& f : flips) {
        out += std::to_string(f.example_id) + "," + std::to_string(f.truth) + "," +
               std::to_string(f.basic_prediction) + "," + std::to_string(f.tree_prediction) + "," +
               std::string(to_string(f.tag)) + "\n";
    }
    return out;
}

Comparison compare(const Predictor& basic, const Predictor& tree, const LabeledDataset& dataset,
                   std::span<const std::size_t> ks, std::size_t workers) {
    check_eval_inputs(basic, dataset, ks);
    check_eval_inputs(tree, dataset, ks);
    const std::size_t depth = *std::max_element(ks.begin(), ks.end());
    const auto basic_ranks = rank_all(basic, dataset, depth, workers);
    const auto tree_ranks = rank_all(tree, dataset, depth, workers);
    Comparison c;
    c.basic = report_from_rankings(basic, dataset, ks, basic_ranks);
    c.tree = report_from_rankings(tree, dataset, ks, tree_ranks);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Label b = basic_ranks[i].front();
        const Label t = tree_ranks[i].front();
        if (b == t) continue;
        const Label truth = dataset.label(i);
        Flip f{i, truth, b, t, FlipTag::BothWrongDifferent};
        if (t == truth)
            f.tag = FlipTag::Corrected;
        else if (b == truth)
            f.tag = FlipTag::Broken;
        c.flips.push_back(f);
    }
    return c;
}

}  // namespace conftree
