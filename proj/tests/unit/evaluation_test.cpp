#include <doctest.h>

#include <memory>
#include <random>

#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "conftree/evaluation.hpp"
#include "support/fixtures.hpp"

using namespace conftree;

namespace {

// Ranks the truth first (oracle) or last (adversary) by peeking at a label
// encoded in the first feature.
class PeekingPredictor final : public Predictor {
public:
    PeekingPredictor(ClassSubset classes, bool truth_first) : classes_(std::move(classes)), first_(truth_first) {}
    const ClassSubset& classes() const override { return classes_; }
    std::vector<Label> rank(std::span<const double> x, std::size_t k) const override {
        return rank_labels(classes_, class_scores(x), k);
    }
    ProbVector class_scores(std::span<const double> x) const override {
        const auto truth = static_cast<Label>(x[0]);
        ProbVector p(classes_.size(), first_ ? 0.0 : 1.0 / static_cast<double>(classes_.size() - 1));
        p[classes_.index_of(truth)] = first_ ? 1.0 : 0.0;
        return p;
    }
    std::string id() const override { return first_ ? "oracle" : "adversary"; }

private:
    ClassSubset classes_;
    bool first_;
};

LabeledDataset labelled_by_feature(std::size_t n_classes, std::size_t per_class) {
    std::vector<FeatureVector> x;
    std::vector<Label> y;
    for (std::size_t c = 0; c < n_classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            x.push_back({static_cast<double>(c), static_cast<double>(i)});
            y.push_back(static_cast<Label>(c));
        }
    return LabeledDataset(std::move(x), std::move(y));
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("oracle and adversarial predictors") {
    const auto data = labelled_by_feature(5, 4);
    const std::vector<std::size_t> ks = {1, 2, 5};
    const auto good = evaluate(PeekingPredictor(data.classes(), true), data, ks);
    for (const auto& [k, e] : good.top_k_errors) CHECK(e == 0.0);
    const auto bad = evaluate(PeekingPredictor(data.classes(), false), data, ks);
    CHECK(bad.top_k_errors.at(1) == 1.0);
    CHECK(bad.top_k_errors.at(2) == 1.0);
    CHECK(bad.top_k_errors.at(5) == 0.0);
    CHECK(bad.per_class_errors.at(3) == 1.0);
    CHECK(bad.n_examples == 20);

    const auto model = testing::bias_model({0, 1, 2, 3, 4}, {0.3, 0.1, 0.5, 0.2, 0.4}, 2);
    const std::vector<std::size_t> k5 = {5};
    CHECK(evaluate(ModelPredictor(model), data, k5).top_k_errors.at(5) == 0.0);
}

TEST_CASE("input validation") {
    const auto data = labelled_by_feature(3, 2);
    const auto model = testing::bias_model({0, 1}, {0, 0}, 2);
    const std::vector<std::size_t> ks = {1};
    CHECK_THROWS_AS(evaluate(ModelPredictor(model), data, ks), InvalidArgument);
    const std::vector<std::size_t> zero = {0};
    CHECK_THROWS_AS(evaluate(PeekingPredictor(data.classes(), true), data, zero), InvalidArgument);
    CHECK_THROWS_AS(evaluate(PeekingPredictor(data.classes(), true), LabeledDataset(), ks), InvalidArgument);
}

TEST_CASE("top-k error is nonincreasing and worker-count independent") {
    SyntheticSpec spec;
    spec.samples_per_class = 20;
    spec.seed = 3;
    const auto data = generate_synthetic(spec);
    const ModelPredictor p(fit(data, data.classes(), testing::quick_spec(1, 3), {}));
    const std::vector<std::size_t> ks = {1, 2, 3, 5, 10, 20};
    const auto r = evaluate(p, data, ks);
    double prev = 1.0;
    for (const auto& [k, e] : r.top_k_errors) {
        CHECK(e <= prev);
        CHECK(e >= 0.0);
        prev = e;
    }
    CHECK(r.top_k_errors.at(20) == 0.0);
    const auto threaded = evaluate(p, data, ks, 4);
    CHECK(threaded.to_json() == r.to_json());
    CHECK(r.to_table().find("top1_err") != std::string::npos);
}

TEST_CASE("ensemble averaging") {
    auto a = std::make_shared<ModelPredictor>(testing::bias_model({0, 1}, {20.0, 0.0}, 1), "a");
    auto b = std::make_shared<ModelPredictor>(testing::bias_model({0, 1}, {0.0, 20.0}, 1), "b");
    const Ensemble pair({a, b});
    const FeatureVector x{0.0};
    const auto s = pair.class_scores(x);
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(ensemble_topk(pair, x, 2) == std::vector<Label>{0, 1});

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    auto m = std::make_shared<ModelPredictor>(
        init_model({Architecture::OneHiddenLayer, 3}, 2, ClassSubset{0, 1, 2, 3}, 5), "m");
    const Ensemble one({m});
    const Ensemble twice({m, m});
    for (int i = 0; i < 100; ++i) {
        FeatureVector v{g(rng) * 3, g(rng) * 3};
        CHECK(ensemble_topk(one, v, 4) == m->rank(v, 4));
        CHECK(ensemble_topk(twice, v, 4) == m->rank(v, 4));
    }

    // Members may list the class set in different orders.
    auto reordered = std::make_shared<ModelPredictor>(testing::bias_model({1, 0}, {0.0, 20.0}, 1), "r");
    CHECK(Ensemble({a, reordered}).rank(x, 1) == std::vector<Label>{0});

    auto other = std::make_shared<ModelPredictor>(testing::bias_model({0, 2}, {0, 0}, 1), "o");
    CHECK_THROWS_AS(Ensemble({a, other}), InvalidArgument);
    CHECK_THROWS_AS(Ensemble({}), InvalidArgument);
}

TEST_CASE("tree scores place leaf mass on the leaf subset") {
    TreeConfig cfg;
    cfg.max_depth = 0;
    const auto data = testing::random_dataset(4, 10, 2, 1);
    const auto basic = fit(data, data.classes(), testing::quick_spec(1, 5), {});
    const TreePredictor flat(train_tree(basic, data, cfg));
    const ModelPredictor base(basic);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto a = flat.class_scores(data.features(i));
        const auto b = base.class_scores(data.features(i));
        for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-14));
    }
}

TEST_CASE("an ensemble of one tree keeps the tree's extended ranking") {
    const auto data = testing::random_dataset(6, 20, 3, 12);
    const auto basic = fit(data, data.classes(), testing::quick_spec(2, 10), {});
    auto tree = std::make_shared<TreePredictor>(
        train_tree(basic, data, testing::depth_one_config(3, 0.02, testing::quick_spec(3, 10), 1)));
    REQUIRE(tree->tree().nodes().size() > 1);
    const Ensemble one({tree});
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0, 3);
    for (int i = 0; i < 200; ++i) {
        FeatureVector v{g(rng), g(rng), g(rng)};
        CHECK(one.rank(v, 6) == tree->rank(v, 6));
    }
}

TEST_CASE("compare: flips and accounting identity") {
    const auto data = labelled_by_feature(3, 3);
    const std::vector<std::size_t> ks = {1, 2};
    const PeekingPredictor good(data.classes(), true);
    const PeekingPredictor bad(data.classes(), false);
    const auto c = compare(bad, good, data, ks);
    CHECK(c.flips.size() == data.size());
    CHECK(c.corrected() == data.size());
    CHECK(c.broken() == 0);
    const auto back = compare(good, bad, data, ks);
    CHECK(back.broken() == data.size());

    const auto same = compare(good, good, data, ks);
    CHECK(same.flips.empty());
    CHECK(same.flips_csv() == "example_id,truth,basic_pred,tree_pred,tag\n");

    // Two models that disagree on exactly one example.
    std::vector<FeatureVector> x = {{-1.0}, {1.0}, {2.0}};
    const LabeledDataset tiny(x, std::vector<Label>{0, 1, 1});
    auto m1 = testing::bias_model({0, 1}, {0.0, 0.0}, 1);
    m1.output_layer().weights = {-1.0, 1.0};
    auto m2 = m1;
    m2.output_layer().bias = {3.5, 0.0};
    const auto one = compare(ModelPredictor(m1), ModelPredictor(m2), tiny, std::vector<std::size_t>{1});
    REQUIRE(one.flips.size() == 1);
    CHECK(one.flips[0].example_id == 1);
    CHECK(one.flips[0].tag == FlipTag::Broken);
    const long long diff = static_cast<long long>(one.basic.top_k_misses.at(1)) -
                           static_cast<long long>(one.tree.top_k_misses.at(1));
    CHECK(static_cast<long long>(one.corrected()) - static_cast<long long>(one.broken()) == diff);
    CHECK(one.flips_csv() == "example_id,truth,basic_pred,tree_pred,tag\n1,1,1,0,broken\n");
}

}
