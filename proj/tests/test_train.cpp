#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "windcast/errors.hpp"
#include "windcast/train.hpp"

using namespace windcast;

namespace {

const InputShape kDenmark{5, 4, 4};

Tensor scalar_tensor(double v) { return Tensor(Shape{1}, {v}); }

/// Denmark-shaped samples whose targets are a fixed linear map of the
/// normalized inputs.
SampleSet linear_samples(Index n, std::uint64_t seed, double target_shift = 0.0)
{
    std::mt19937_64 gen(seed);
    const Tensor inputs = oracle::random_tensor({n, 5, 4, 4}, gen, 0.0, 1.0);
    std::mt19937_64 wgen(7);
    const Tensor w = oracle::random_tensor({80, 3}, wgen, -0.2, 0.2);
    Eigen::MatrixXd targets(n, 3);
    for (Index s = 0; s < n; ++s)
        for (Index j = 0; j < 3; ++j) {
            double acc = target_shift;
            for (Index k = 0; k < 80; ++k) acc += inputs[s * 80 + k] * w(k, j);
            targets(s, j) = acc;
        }
    std::vector<Timestamp> anchors(static_cast<std::size_t>(n));
    for (Index s = 0; s < n; ++s) anchors[static_cast<std::size_t>(s)] = s * 3600;
    return SampleSet(inputs, targets, Eigen::MatrixXd::Zero(n, 5), anchors, {2, 3, 4}, 6, 3600);
}

SampleSet with_targets(const SampleSet& s, double value)
{
    return SampleSet(s.inputs(), Eigen::MatrixXd::Constant(s.size(), s.target_count(), value), s.anchor_wind(), s.anchors(),
                     s.target_cities(), s.horizon_steps(), 3600);
}

} // namespace

TEST_CASE("train config invariants")
{
    TrainConfig c;
    CHECK(c.max_epochs == 150);
    CHECK(c.batch_size == 64);
    CHECK(c.learning_rate == 1e-3);
    CHECK(c.patience == 20);
    CHECK(c.seed == 42);
    CHECK_NOTHROW(c.validate());
    for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
             [](TrainConfig& t) { t.max_epochs = 0; }, [](TrainConfig& t) { t.batch_size = 0; },
             [](TrainConfig& t) { t.learning_rate = 0; }, [](TrainConfig& t) { t.patience = 0; },
             [](TrainConfig& t) { t.patience = t.max_epochs; }}) {
        TrainConfig bad;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("mse loss")
{
    const Var zero = Var::constant(Tensor(Shape{2}));
    CHECK(mse_loss(Var::constant(Tensor(Shape{2}, {2, -2})), zero).value()[0] == 4.0);
    const Var same = Var::constant(Tensor(Shape{2, 2}, {1, 2, 3, 4}));
    CHECK(mse_loss(same, same).value()[0] == 0.0);

    Var p = Var::parameter(scalar_tensor(1.0));
    backward(mse_loss(p, Var::constant(scalar_tensor(0.0))));
    CHECK(p.grad()[0] == 2.0);

    CHECK_THROWS_AS(mse_loss(zero, Var::constant(Tensor(Shape{3}))), ShapeError);

    std::mt19937_64 gen(51);
    for (int i = 0; i < 5; ++i) {
        const Var a = Var::parameter(oracle::random_tensor({4, 3}, gen));
        const Tensor t = oracle::random_tensor({4, 3}, gen);
        const auto r = oracle::check_gradients([&] { return mse_loss(a, Var::constant(t)); }, {a}, gen);
        CHECK(r.max_rel_error < oracle::kFdTolerance);
    }
}

TEST_CASE("adam")
{
    SUBCASE("closed-form first step")
    {
        Var theta = Var::parameter(scalar_tensor(1.0));
        Adam adam({theta});
        theta.zero_grad();
        backward(mul(theta, Var::constant(scalar_tensor(1.0))));
        adam.step();
        CHECK(theta.value()[0] == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
        CHECK(theta.value()[0] == doctest::Approx(0.999).epsilon(1e-10));
        CHECK(adam.steps() == 1);
    }
    SUBCASE("zero gradient leaves parameters unchanged")
    {
        std::mt19937_64 gen(52);
        Var a = Var::parameter(oracle::random_tensor({3, 3}, gen));
        Var b = Var::parameter(oracle::random_tensor({2}, gen));
        const Tensor a0 = a.value(), b0 = b.value();
        Adam adam({a, b});
        a.zero_grad();
        adam.step();
        adam.step();
        CHECK(a.value() == a0);
        CHECK(b.value() == b0);
        CHECK(adam.steps() == 2);
    }
    SUBCASE("constant gradient steps approach the learning rate")
    {
        Var theta = Var::parameter(scalar_tensor(0.0));
        Adam adam({theta}, AdamOptions{0.01});
        double previous = 0.0;
        for (int i = 0; i < 500; ++i) {
            theta.zero_grad();
            backward(mul(theta, Var::constant(scalar_tensor(-3.0))));
            adam.step();
            const double change = theta.value()[0] - previous;
            previous = theta.value()[0];
            CHECK(std::abs(change - 0.01) < 1e-9);
        }
        for (const auto& v : adam.second_moments()) CHECK(v.flat().minCoeff() >= 0.0);
        CHECK(adam.first_moments()[0].shape() == theta.shape());
    }
}

TEST_CASE("batching keeps every sample and never leaves a singleton")
{
    for (Index n = 1; n <= 40; ++n)
        for (Index bs : {1, 2, 4, 7, 64}) {
            std::vector<Index> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), Index{0});
            const auto batches = make_batches(order, bs);
            std::vector<Index> flat;
            for (const auto& b : batches) {
                flat.insert(flat.end(), b.begin(), b.end());
                if (batches.size() > 1 && bs > 1) CHECK(b.size() >= 2);
            }
            CHECK(flat == order);
        }
    std::vector<Index> nine(9);
    std::iota(nine.begin(), nine.end(), Index{0});
    const auto b = make_batches(nine, 4);
    REQUIRE(b.size() == 2);
    CHECK(b[1].size() == 5);
}

TEST_CASE("a linear target map is learnable")
{
    const SampleSet train = linear_samples(256, 1), val = linear_samples(64, 2);
    auto model = build_conv2d(kDenmark, {2, 3, 4}, 5);
    TrainConfig c;
    c.batch_size = 32;
    c.patience = 149;
    const TrainingTrace t = fit(*model, train, val, c);
    CHECK(t.epochs_run <= 150);
    CHECK(t.epochs.back().train_loss < 1e-2);
    CHECK(evaluate_loss(*model, train) < 1e-2);
}

TEST_CASE("adversarial validation stops at 1 + patience")
{
    // Training pulls predictions towards +5 while validation wants -5, so the
    // validation loss rises every epoch.
    const SampleSet base = linear_samples(64, 3);
    const SampleSet train = with_targets(base, 5.0), val = with_targets(linear_samples(16, 4), -5.0);
    for (int patience : {1, 3, 5}) {
        auto model = build_conv2d(kDenmark, {2, 3, 4}, 6);
        TrainConfig c;
        c.max_epochs = 30;
        c.patience = patience;
        c.batch_size = 16;
        const TrainingTrace t = fit(*model, train, val, c);
        for (std::size_t i = 1; i < t.epochs.size(); ++i) REQUIRE(t.epochs[i].val_loss > t.epochs[i - 1].val_loss);
        CHECK(t.epochs_run == 1 + patience);
        CHECK(t.best_epoch == 1);
        CHECK(t.early_stopped);
        CHECK(evaluate_loss(*model, val) == t.epochs.front().val_loss);
    }
}

TEST_CASE("early stopping invariants")
{
    const SampleSet train = linear_samples(96, 5, 1.0), val = linear_samples(32, 6, 1.3);
    for (ModelKind kind : trainable_kinds()) {
        CAPTURE(to_string(kind));
        auto model = build_model({kind, kDenmark, {2, 3, 4}}, 8);
        TrainConfig c;
        c.max_epochs = 12;
        c.patience = 3;
        c.batch_size = 32;
        const TrainingTrace t = fit(*model, train, val, c);
        CHECK(t.epochs_run <= c.max_epochs);
        CHECK(t.epochs_run - t.best_epoch <= c.patience + 1);
        double lowest = INFINITY;
        for (const auto& e : t.epochs) lowest = std::min(lowest, e.val_loss);
        CHECK(t.best_val_loss == lowest);
        CHECK(evaluate_loss(*model, val) == t.best_val_loss);
        CHECK(t.epochs[static_cast<std::size_t>(t.best_epoch - 1)].val_loss == lowest);
    }
}

TEST_CASE("same seed gives a bit-identical trace and weights")
{
    const SampleSet train = linear_samples(80, 7), val = linear_samples(20, 8);
    TrainConfig c;
    c.max_epochs = 4;
    c.patience = 2;
    c.batch_size = 16;
    c.seed = 11;
    for (ModelKind kind : {ModelKind::multidim, ModelKind::conv2d_attention}) {
        auto a = build_model({kind, kDenmark, {2, 3, 4}}, c.seed);
        auto b = build_model({kind, kDenmark, {2, 3, 4}}, c.seed);
        const auto ta = fit(*a, train, val, c), tb = fit(*b, train, val, c);
        REQUIRE(ta.epochs.size() == tb.epochs.size());
        for (std::size_t i = 0; i < ta.epochs.size(); ++i) {
            CHECK(ta.epochs[i].train_loss == tb.epochs[i].train_loss);
            CHECK(ta.epochs[i].val_loss == tb.epochs[i].val_loss);
        }
        CHECK(save_weights(*a) == save_weights(*b));

        TrainConfig other = c;
        other.seed = 12;
        auto d = build_model({kind, kDenmark, {2, 3, 4}}, c.seed);
        const auto td = fit(*d, train, val, other);
        CHECK(td.epochs.front().train_loss != ta.epochs.front().train_loss);
    }
}

TEST_CASE("one small Adam step does not increase the full-batch loss")
{
    const SampleSet data = linear_samples(48, 9, 2.0);
    std::vector<Index> all(48);
    std::iota(all.begin(), all.end(), Index{0});
    const Var x = Var::constant(data.batch_inputs(all));
    Tensor y(Shape{48, 3});
    y.matrix(48, 3) = data.batch_targets(all);
    const Var target = Var::constant(y);

    for (ModelKind kind : trainable_kinds()) {
        CAPTURE(to_string(kind));
        int failures = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto model = build_model({kind, kDenmark, {2, 3, 4}}, 1000 + seed);
            Adam adam(model->parameters(), AdamOptions{1e-4});
            model->parameters().zero_grad();
            const Var before = mse_loss(model->forward(x, Mode::train), target);
            backward(before);
            adam.step();
            const double after = mse_loss(model->forward(x, Mode::train), target).value()[0];
            if (after > before.value()[0] * (1 + 1e-12)) ++failures;
        }
        CHECK(failures * 100 < 5 * 20);
    }
}

TEST_CASE("every parameter receives gradient")
{
    const SampleSet data = linear_samples(160, 10, 1.0);
    for (ModelKind kind : trainable_kinds()) {
        CAPTURE(to_string(kind));
        auto model = build_model({kind, kDenmark, {2, 3, 4}}, 21);
        std::vector<Tensor> reached;
        for (const auto& e : model->parameters().entries()) reached.push_back(Tensor::zeros(e.var.shape()));
        for (Index b = 0; b < 10; ++b) {
            std::vector<Index> rows(16);
            std::iota(rows.begin(), rows.end(), b * 16);
            Tensor y(Shape{16, 3});
            y.matrix(16, 3) = data.batch_targets(rows);
            model->parameters().zero_grad();
            backward(mse_loss(model->forward(Var::constant(data.batch_inputs(rows)), Mode::train), Var::constant(y)));
            const auto& entries = model->parameters().entries();
            for (std::size_t p = 0; p < entries.size(); ++p)
                if (entries[p].var.has_grad())
                    for (Index i = 0; i < reached[p].size(); ++i)
                        if (entries[p].var.grad()[i] != 0.0) reached[p][i] = 1.0;
        }
        const auto& entries = model->parameters().entries();
        for (std::size_t p = 0; p < entries.size(); ++p) {
            CAPTURE(entries[p].name);
            CHECK(reached[p].flat().maxCoeff() == 1.0);
        }
    }
}

TEST_CASE("fit errors")
{
    const SampleSet train = linear_samples(32, 11), val = linear_samples(8, 12);
    auto model = build_conv2d(kDenmark, {2, 3, 4}, 1);
    TrainConfig c;
    c.max_epochs = 3;
    c.patience = 1;
    CHECK_THROWS_AS(fit(*model, SampleSet{}, val, c), InvalidArgument);
    CHECK_THROWS_AS(fit(*model, train, SampleSet{}, c), InvalidArgument);
    PersistenceModel persistence({ModelKind::persistence, kDenmark, {2, 3, 4}});
    CHECK_THROWS_AS(fit(persistence, train, val, c), InvalidArgument);

    const SampleSet poisoned = with_targets(train, std::nan(""));
    try {
        fit(*model, poisoned, val, c);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() == 1);
        CHECK(e.batch() == 1);
    }
}

TEST_CASE("trace JSON lines round-trip")
{
    TrainingTrace t;
    t.epochs = {{1, 0.5, 0.75, 0.125}, {2, 0.25, 0.8, 0.25}, {3, 0.1, 0.7, 0.375}};
    const std::string text = t.to_jsonl();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    const TrainingTrace back = TrainingTrace::from_jsonl(text);
    REQUIRE(back.epochs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.epochs[i].epoch == t.epochs[i].epoch);
        CHECK(back.epochs[i].train_loss == t.epochs[i].train_loss);
        CHECK(back.epochs[i].val_loss == t.epochs[i].val_loss);
        CHECK(back.epochs[i].elapsed_s == t.epochs[i].elapsed_s);
    }
    CHECK(back.best_epoch == 3);
    CHECK(back.best_val_loss == 0.7);
    CHECK(back.epochs_run == 3);
    CHECK(back.to_jsonl() == text);
}
