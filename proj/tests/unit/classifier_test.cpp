#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "conftree/classifier.hpp"
#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "oracles.hpp"
#include "support/fixtures.hpp"

using namespace conftree;

TEST_SUITE("classifier") {

TEST_CASE("softmax closed forms") {
    auto p = softmax(std::vector<double>{0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    for (double c : {-1e3, -2.5, 0.0, 7.0, 1e3}) {
        p = softmax(std::vector<double>{c, c, c});
        for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    p = softmax(std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
    CHECK(p[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("softmax is stable under large shifts and preserves argmax") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> logits(5);
        for (double& l : logits) l = u(rng);
        const auto ref = oracle::closed_form_softmax(logits);
        auto shifted = logits;
        for (double& l : shifted) l += 800.0;
        const auto p = softmax(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(std::isfinite(p[i]));
            CHECK(p[i] == doctest::Approx(ref[i]).epsilon(1e-9));
            sum += p[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
        CHECK(std::max_element(p.begin(), p.end()) - p.begin() ==
              std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
}

TEST_CASE("predict_probs on hand-built models") {
    const auto uniform = testing::bias_model({0, 1, 2, 3}, {0, 0, 0, 0}, 3);
    for (const auto& x : {FeatureVector{1, 2, 3}, FeatureVector{-7, 0.5, 100}}) {
        const auto p = predict_probs(uniform, x);
        for (double v : p) CHECK(v == doctest::Approx(0.25));
    }

    const auto biased = testing::bias_model({0, 1}, {1.0, 0.0}, 2);
    const auto p = predict_probs(biased, FeatureVector{4.0, -1.0});
    // e / (e + 1) and 1 / (e + 1), hand-evaluated.
    CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(predict_probs(biased, FeatureVector{4.0, -1.0}) == p);

    CHECK_THROWS_AS(predict_probs(biased, FeatureVector{1.0}), ShapeError);
}

TEST_CASE("fit separates linearly separable classes") {
    const auto data = testing::two_blobs(50, 11);
    TrainSpec spec = testing::quick_spec(5, 200);
    const auto model = fit(data, data.classes(), spec, {Architecture::SoftmaxRegression, 0});
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        correct += argmax_label(model.classes(), predict_probs(model, data.features(i))) == data.label(i);
    CHECK(correct == data.size());
}

TEST_CASE("fit rejects labels outside the subset and bad specs") {
    std::vector<FeatureVector> x = {{0.0}, {1.0}, {2.0}, {3.0}};
    std::vector<Label> y = {1, 2, 3, 7};
    const LabeledDataset data(x, y);
    CHECK_THROWS_AS(fit(data, ClassSubset{1, 2, 3}, testing::quick_spec(), {}), InvalidLabel);

    const auto ok = testing::two_blobs(5, 1);
    TrainSpec bad = testing::quick_spec();
    bad.epochs = 0;
    CHECK_THROWS_AS(fit(ok, ok.classes(), bad, {}), InvalidArgument);
    bad = testing::quick_spec();
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(fit(ok, ok.classes(), bad, {}), InvalidArgument);
    CHECK_THROWS_AS(fit(ok, ClassSubset{0}, testing::quick_spec(), {}), Error);
}

TEST_CASE("warm start copies hidden weights and reinitializes the output layer") {
    const auto data = testing::random_dataset(4, 20, 3, 9);
    const ModelShape mlp{Architecture::OneHiddenLayer, 5};
    const auto parent = fit(data, data.classes(), testing::quick_spec(2, 5), mlp);
    const ClassSubset sub{1, 2};
    const auto sub_data = data.restrict_to(sub);

    TrainSpec frozen = testing::quick_spec(4, 1);
    frozen.freeze_hidden = true;
    ClassifierModel at_start;
    FitHooks hooks;
    hooks.on_start = [&](const ClassifierModel& m) { at_start = m; };
    const auto child = fine_tune(sub_data, sub, frozen, parent, &hooks);

    CHECK(at_start.hidden_layer() == parent.hidden_layer());
    CHECK(child.hidden_layer() == parent.hidden_layer());
    CHECK(child.classes() == sub);
    CHECK(child.output_layer().outputs == 2);
    for (double w : at_start.output_layer().weights) CHECK(std::abs(w) <= 0.01);
    for (double b : at_start.output_layer().bias) CHECK(b == 0.0);

    // Longer frozen training still leaves the hidden layer bit-identical.
    frozen.epochs = 25;
    CHECK(fine_tune(sub_data, sub, frozen, parent).hidden_layer() == parent.hidden_layer());

    TrainSpec full = frozen;
    full.freeze_hidden = false;
    CHECK(fine_tune(sub_data, sub, full, parent).hidden_layer() != parent.hidden_layer());

    const auto other_dim = testing::random_dataset(2, 5, 4, 1);
    CHECK_THROWS_AS(fine_tune(other_dim, other_dim.classes(), full, parent), ShapeError);
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + rng() % 5;
        const std::size_t n = 2 + rng() % 3;
        const std::size_t h = 1 + rng() % 6;
        const auto data = testing::random_dataset(n, 3, d, rng());
        const auto arch = trial % 2 ? Architecture::OneHiddenLayer : Architecture::SoftmaxRegression;
        auto model = init_model({arch, h}, d, data.classes(), rng());
        auto params = parameters(model);
        std::normal_distribution<double> g(0.0, 0.5);
        for (double& p : params) p = g(rng);
        set_parameters(model, params);

        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        const double l2 = trial % 3 == 0 ? 0.0 : 0.05;
        const auto analytic = flatten(loss_and_gradient(model, data, idx, l2));
        const auto numeric = oracle::finite_difference_gradient(model, data, idx, l2);
        REQUIRE(analytic.size() == numeric.size());
        for (std::size_t p = 0; p < analytic.size(); ++p) {
            const double denom = std::max({std::abs(analytic[p]), std::abs(numeric[p]), 1e-8});
            CHECK(std::abs(analytic[p] - numeric[p]) / denom < 1e-4);
        }
        CHECK(loss_and_gradient(model, data, idx, l2).loss == doctest::Approx(loss(model, data, idx, l2)));
    }
}

TEST_CASE("training is seed-deterministic and reduces loss") {
    const auto data = testing::random_dataset(3, 30, 4, 21);
    const TrainSpec spec = testing::quick_spec(8, 15);
    const ModelShape mlp{Architecture::OneHiddenLayer, 6};
    std::vector<double> losses;
    FitHooks hooks;
    hooks.on_epoch = [&](int, double l) { losses.push_back(l); };
    const auto a = fit(data, data.classes(), spec, mlp, &hooks);
    const auto b = fit(data, data.classes(), spec, mlp);
    CHECK(a == b);
    REQUIRE(losses.size() == 15);
    CHECK(losses.back() < losses.front());

    TrainSpec other = spec;
    other.seed = 9;
    CHECK(fit(data, data.classes(), other, mlp) != a);
}

TEST_CASE("step decay lowers the effective rate") {
    const auto data = testing::random_dataset(2, 10, 2, 4);
    TrainSpec spec = testing::quick_spec(1, 4);
    spec.lr_decay = 0.0001;
    spec.decay_every = 1;
    const auto decayed = fit(data, data.classes(), spec, {});
    spec.epochs = 1;
    const auto one_epoch = fit(data, data.classes(), spec, {});
    const auto pa = parameters(decayed);
    const auto pb = parameters(one_epoch);
    double diff = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) diff = std::max(diff, std::abs(pa[i] - pb[i]));
    CHECK(diff < 1e-2);
}

TEST_CASE("model JSON round trip is value-exact") {
    const auto data = testing::random_dataset(3, 10, 4, 2);
    const auto model = fit(data, data.classes(), testing::quick_spec(3, 3), {Architecture::OneHiddenLayer, 4});
    const auto back = model_from_json(model_to_json(model));
    CHECK(back == model);
    CHECK(model_to_json(back) == model_to_json(model));

    const auto path = std::filesystem::temp_directory_path() / "conftree_model_roundtrip.json";
    save_model(model, path);
    CHECK(load_model(path) == model);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(model_from_json("{\"format\": \"conftree-model\""), ParseError);
    CHECK_THROWS_AS(model_from_json("{\"format\": \"conftree-model\"}"), ParseError);
}

TEST_CASE("predict_probs outputs are valid probability vectors") {
    std::mt19937_64 rng(44);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto model = init_model({trial % 2 ? Architecture::OneHiddenLayer : Architecture::SoftmaxRegression, 4}, 3,
                                ClassSubset{0, 1, 2, 3, 4}, rng());
        auto params = parameters(model);
        for (double& p : params) p = g(rng);
        set_parameters(model, params);
        const auto p = predict_probs(model, FeatureVector{g(rng), g(rng), g(rng)});
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

}
