#include <doctest.h>

#include <random>

#include "conftree/classifier.hpp"
#include "conftree/confusion.hpp"
#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "oracles.hpp"
#include "support/fixtures.hpp"

using namespace conftree;

namespace {

SoftmaxConfusionMatrix identity(std::size_t n) {
    std::vector<Label> labels(n);
    std::vector<double> e(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<Label>(i);
        e[i * n + i] = 1.0;
    }
    return SoftmaxConfusionMatrix(ClassSubset(labels), e);
}

}  // namespace

TEST_SUITE("confusion") {

TEST_CASE("oracle and uniform scorers") {
    const auto data = testing::random_dataset(4, 6, 3, 5);
    const ClassSubset& sub = data.classes();
    const auto oracle_h = compute_confusion_matrix(
        [&](const FeatureVector&, Label truth) {
            ProbVector p(sub.size(), 0.0);
            p[sub.index_of(truth)] = 1.0;
            return p;
        },
        data, sub);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(oracle_h(i, j) == (i == j ? 1.0 : 0.0));

    const auto uniform = testing::bias_model(sub.labels(), {0, 0, 0, 0}, 3);
    const auto h = compute_confusion_matrix(uniform, data, sub);
    for (double v : h.entries()) CHECK(v == doctest::Approx(0.25));
    CHECK(h.max_row_deviation() < 1e-12);
}

TEST_CASE("rows are arithmetic means of predicted vectors") {
    std::vector<FeatureVector> x = {{0.0}, {1.0}, {2.0}};
    std::vector<Label> y = {1, 1, 2};
    const LabeledDataset data(x, y);
    const auto h = compute_confusion_matrix(
        [](const FeatureVector& f, Label) {
            if (f[0] == 0.0) return ProbVector{0.9, 0.1};
            if (f[0] == 1.0) return ProbVector{0.7, 0.3};
            return ProbVector{0.5, 0.5};
        },
        data, ClassSubset{1, 2});
    CHECK(h(0, 0) == doctest::Approx(0.8));
    CHECK(h(0, 1) == doctest::Approx(0.2));
}

TEST_CASE("empty class is reported by label") {
    std::vector<FeatureVector> x = {{0.0}, {1.0}};
    const LabeledDataset data(x, std::vector<Label>{0, 0});
    const auto model = testing::bias_model({0, 5}, {0, 0}, 1);
    try {
        compute_confusion_matrix(model, data, ClassSubset{0, 5});
        FAIL("expected EmptyClassError");
    } catch (const EmptyClassError& e) {
        CHECK(e.label() == 5);
    }
}

TEST_CASE("matches direct per-example accumulation") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng() % 4;
        const std::size_t per = 1 + rng() % 4;
        const auto data = testing::random_dataset(n, per, 3, rng());
        auto model = init_model({Architecture::OneHiddenLayer, 3}, 3, data.classes(), rng());
        auto params = parameters(model);
        std::normal_distribution<double> g(0, 1);
        for (double& p : params) p = g(rng);
        set_parameters(model, params);
        const auto h = compute_confusion_matrix(model, data, data.classes());
        const auto ref = oracle::direct_confusion(
            [&](std::size_t e) { return predict_probs(model, data.features(e)); }, data, data.classes());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(h.entries()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        CHECK(h.max_row_deviation() < 1e-6);
    }
}

TEST_CASE("threshold extraction examples") {
    for (const auto& s : extract_confusion_sets(identity(5), 0.5, 5)) CHECK(s.members == std::vector<Label>{s.owner});

    const SoftmaxConfusionMatrix h(ClassSubset{1, 2}, {0.8, 0.2, 0.4, 0.6});
    const auto sets = extract_confusion_sets(h, 0.3, 10);
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].owner == 1);
    CHECK(sets[0].members == std::vector<Label>{1, 2});
    CHECK(sets[1].owner == 2);
    CHECK(sets[1].members == std::vector<Label>{2});

    const SoftmaxConfusionMatrix u(ClassSubset{0, 1, 2, 3}, std::vector<double>(16, 0.25));
    for (const auto& s : extract_confusion_sets(u, 0.1, 4)) CHECK(s.members == std::vector<Label>{0, 1, 2, 3});

    CHECK_THROWS_AS(extract_confusion_sets(h, 1.0, 2), InvalidArgument);
    CHECK_THROWS_AS(extract_confusion_sets(h, -0.1, 2), InvalidArgument);
    CHECK_THROWS_AS(extract_confusion_sets(h, 0.1, 0), InvalidArgument);
}

TEST_CASE("owner kept even with a small diagonal") {
    const SoftmaxConfusionMatrix h(ClassSubset{0, 1}, {0.1, 0.9, 0.05, 0.95});
    const auto sets = extract_confusion_sets(h, 0.5, 2);
    CHECK(sets[0].members == std::vector<Label>{0});
    CHECK(sets[1].members == std::vector<Label>{0, 1});
}

TEST_CASE("cap keeps owner plus highest scores with label tie-break") {
    // Column 0 scores: owner 0.4, then 0.2 (label 3), 0.2 (label 1), 0.2 (label 2).
    const ClassSubset sub{0, 3, 1, 2};
    std::vector<double> e = {0.4, 0.2, 0.2, 0.2,  //
                             0.2, 0.8, 0.0, 0.0,  //
                             0.2, 0.0, 0.8, 0.0,  //
                             0.2, 0.0, 0.0, 0.8};
    const SoftmaxConfusionMatrix h(sub, e);
    const auto sets = extract_confusion_sets(h, 0.1, 3);
    CHECK(sets[0].owner == 0);
    CHECK(sets[0].members == std::vector<Label>{0, 1, 2});
}

TEST_CASE("raising alpha never grows a set") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 6;
        std::vector<Label> labels(n);
        std::vector<double> e(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<Label>(i);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += (e[i * n + j] = u(rng));
            for (std::size_t j = 0; j < n; ++j) e[i * n + j] /= s;
        }
        const SoftmaxConfusionMatrix h(ClassSubset(labels), e);
        const double lo = u(rng) * 0.5;
        const double hi = lo + u(rng) * 0.49;
        const auto a = extract_confusion_sets(h, lo, n);
        const auto b = extract_confusion_sets(h, hi, n);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(std::includes(a[j].members.begin(), a[j].members.end(), b[j].members.begin(), b[j].members.end()));
            CHECK(std::binary_search(b[j].members.begin(), b[j].members.end(), b[j].owner));
        }
    }
}

TEST_CASE("exports") {
    const SoftmaxConfusionMatrix h(ClassSubset{1, 2}, {0.75, 0.25, 0.5, 0.5});
    CHECK(confusion_matrix_csv(h) == "label,1,2\n1,0.75,0.25\n2,0.5,0.5\n");
    const auto sets = extract_confusion_sets(h, 0.3, 2);
    CHECK(confusion_sets_json(sets) == "{\n \"1\": [\n  1,\n  2\n ],\n \"2\": [\n  2\n ]\n}\n");
}

}
