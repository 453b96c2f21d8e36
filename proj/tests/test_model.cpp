#include "lobench/error.hpp"
#include "lobench/model.hpp"
#include "lobench/preprocess.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lobench;

namespace {

std::vector<Window> random_windows(std::uint64_t seed, int n, int steps, int cols, bool labeled = false) {
    std::mt19937_64 rng(seed);
    std::vector<Window> out;
    for (int i = 0; i < n; ++i) {
        Window w;
        w.data = oracle::random_matrix(rng, steps, cols, 0.5);
        if (labeled) w.label = trend_from_class(i % 3);
        w.origin.start = i;
        out.push_back(std::move(w));
    }
    return out;
}

TrainConfig tiny_config(TaskKind task, int levels = 2) {
    TrainConfig c;
    c.task = task;
    c.loss.weights = WeightProfile::level_decay(levels);
    c.batch_size = 4;
    c.epochs = 1;
    c.seed = 3;
    return c;
}

Network tiny_net(TaskKind task, std::uint64_t seed = 1) {
    Network net = make_autoencoder(4, 8, 2, Activation::identity, seed);
    if (task == TaskKind::prediction) net.head = make_head(task, 2, 3, 5, seed + 7);
    if (task == TaskKind::imputation) net.head.kind = task;
    return net;
}

// Checks the analytic backward pass parameter by parameter.
void check_gradients(TaskKind task) {
    Network net = tiny_net(task);
    const auto data = random_windows(9, 6, 4, 8, task == TaskKind::prediction);
    TrainConfig cfg = tiny_config(task);
    if (task == TaskKind::reconstruction) cfg.loss.lambda = 0;
    std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
    const Batch batch = make_batch(net, data, idx, cfg, 11);
    const auto grads = compute_gradients(net, batch, cfg);
    auto loss_at = [&] {
        const RowMatrix out = forward(net, batch.inputs);
        return task_loss(net, batch, out, cfg).loss;
    };
    EXPECT_NEAR(grads.loss, loss_at(), 1e-12);
    int checked = 0;
    for (auto& p : parameters(net)) {
        const Vector& g = grads.by_name.at(p.name);
        for (std::size_t k = 0; k < p.values.size(); ++k) {
            const double keep = p.values[k];
            p.values[k] = keep + 1e-6;
            const double up = loss_at();
            p.values[k] = keep - 1e-6;
            const double down = loss_at();
            p.values[k] = keep;
            const double fd = (up - down) / 2e-6;
            EXPECT_NEAR(g[static_cast<Eigen::Index>(k)], fd, 1e-6 * std::max(1.0, std::fabs(fd))) << p.name << "[" << k << "]";
            ++checked;
        }
    }
    EXPECT_GE(checked, 66);
}

std::vector<double> snapshot_params(Network& net, const std::string& prefix) {
    std::vector<double> out;
    for (const auto& p : parameters(net))
        if (p.name.starts_with(prefix)) out.insert(out.end(), p.values.begin(), p.values.end());
    return out;
}

}  // namespace

TEST(Network, ReferenceAutoencoderShape) {
    Network net = make_autoencoder(100, 40, 256, Activation::identity, 1);
    EXPECT_EQ(net.inputs(), 4000);
    EXPECT_EQ(net.latent(), 256);
    EXPECT_EQ(net.head.outputs(), 4000);
    std::mt19937_64 rng(1);
    Window w;
    w.data = oracle::random_matrix(rng, 100, 40);
    const Vector z = encode(net, w);
    EXPECT_EQ(z.size(), 256);
    EXPECT_EQ(decode(net, z).size(), 4000);
    EXPECT_THROW(encode(net, Vector::Zero(3999)), ValidationError);
    EXPECT_THROW(decode(net, Vector::Zero(255)), ValidationError);
}

TEST(Network, EncodeIsAffineWithoutActivation) {
    Network net = make_autoencoder(4, 8, 3, Activation::identity, 2);
    std::mt19937_64 rng(2);
    const Vector a = oracle::random_matrix(rng, 32, 1), b = oracle::random_matrix(rng, 32, 1);
    const Vector zero = encode(net, Vector::Zero(32));
    EXPECT_TRUE((encode(net, a + b) - zero).isApprox(encode(net, a) - zero + encode(net, b) - zero, 1e-12));
    EXPECT_TRUE(zero.isApprox(net.encoder.bias));
}

TEST(Network, DeterministicInit) {
    Network a = make_autoencoder(4, 8, 3, Activation::identity, 5);
    Network b = make_autoencoder(4, 8, 3, Activation::identity, 5);
    Network c = make_autoencoder(4, 8, 3, Activation::identity, 6);
    EXPECT_EQ(a.encoder.weight, b.encoder.weight);
    EXPECT_NE(a.encoder.weight, c.encoder.weight);
    const double bound = 1.0 / std::sqrt(32.0);
    EXPECT_LE(a.encoder.weight.cwiseAbs().maxCoeff(), bound);
}

TEST(Network, PredictionHeadLayout) {
    const TaskHead h = make_head(TaskKind::prediction, 256, 3, 256, 1);
    ASSERT_EQ(h.layers.size(), 2u);
    EXPECT_EQ(h.layers[0].activation, Activation::relu);
    EXPECT_EQ(h.outputs(), 3);
    EXPECT_EQ(make_head(TaskKind::prediction, 256, 3, 0, 1).layers.size(), 1u);
}

TEST(Gradients, ReconstructionMatchesFiniteDifferences) { check_gradients(TaskKind::reconstruction); }
TEST(Gradients, PredictionMatchesFiniteDifferences) { check_gradients(TaskKind::prediction); }
TEST(Gradients, ImputationMatchesFiniteDifferences) { check_gradients(TaskKind::imputation); }

TEST(Adam, ZeroGradientLeavesParameters) {
    Network net = tiny_net(TaskKind::reconstruction);
    const auto before = snapshot_params(net, "");
    auto params = parameters(net);
    std::map<std::string, Vector> grads;
    for (const auto& p : params) grads[p.name] = Vector::Zero(static_cast<Eigen::Index>(p.values.size()));
    AdamState adam;
    for (int i = 0; i < 5; ++i) adam.apply(params, grads);
    EXPECT_EQ(snapshot_params(net, ""), before);
    EXPECT_EQ(adam.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> x{1.0, -2.0};
    std::vector<ParamView> params{{"x", {x.data(), 2}, {2}}};
    AdamState adam;
    adam.config.lr = 0.1;
    adam.apply(params, {{"x", Vector::Constant(2, 3.0)}});
    EXPECT_NEAR(x[0], 0.9, 1e-8);
    EXPECT_NEAR(x[1], -2.1, 1e-8);
}

TEST(Train, ZeroLearningRateChangesNothing) {
    Network net = tiny_net(TaskKind::reconstruction);
    const auto before = snapshot_params(net, "");
    const auto data = random_windows(1, 10, 4, 8);
    TrainConfig cfg = tiny_config(TaskKind::reconstruction);
    cfg.adam.lr = 0;
    cfg.epochs = 3;
    AdamState adam;
    const auto r = train(net, adam, data, cfg);
    EXPECT_EQ(snapshot_params(net, ""), before);
    EXPECT_EQ(r.epoch_loss.size(), 3u);
    EXPECT_EQ(r.steps, 9u);
}

TEST(Train, SmallLearningRateDecreasesLoss) {
    Network net = tiny_net(TaskKind::reconstruction);
    const auto data = random_windows(2, 16, 4, 8);
    TrainConfig cfg = tiny_config(TaskKind::reconstruction);
    cfg.adam.lr = 1e-4;
    cfg.batch_size = 16;
    cfg.epochs = 30;
    AdamState adam;
    const auto r = train(net, adam, data, cfg);
    for (std::size_t i = 1; i < r.epoch_loss.size(); ++i) EXPECT_LT(r.epoch_loss[i], r.epoch_loss[i - 1]);
}

TEST(Train, DeterministicGivenSeed) {
    const auto data = random_windows(3, 12, 4, 8);
    const TrainConfig cfg = tiny_config(TaskKind::reconstruction);
    Network a = tiny_net(TaskKind::reconstruction), b = tiny_net(TaskKind::reconstruction);
    AdamState sa, sb;
    EXPECT_EQ(train(a, sa, data, cfg).epoch_loss, train(b, sb, data, cfg).epoch_loss);
    EXPECT_EQ(snapshot_params(a, ""), snapshot_params(b, ""));
}

TEST(Train, MaxStepsStopsEarly) {
    Network net = tiny_net(TaskKind::reconstruction);
    const auto data = random_windows(4, 12, 4, 8);
    TrainConfig cfg = tiny_config(TaskKind::reconstruction);
    cfg.epochs = 10;
    cfg.max_steps = 5;
    AdamState adam;
    EXPECT_EQ(train(net, adam, data, cfg).steps, 5u);
}

TEST(Train, NonFiniteLossAborts) {
    Network net = tiny_net(TaskKind::reconstruction);
    auto data = random_windows(5, 4, 4, 8);
    data[2].data(1, 1) = std::numeric_limits<double>::infinity();
    AdamState adam;
    try {
        train(net, adam, data, tiny_config(TaskKind::reconstruction));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
    }
}

TEST(Train, RejectsMismatchedTaskAndConfig) {
    Network net = tiny_net(TaskKind::reconstruction);
    const auto data = random_windows(6, 4, 4, 8, true);
    AdamState adam;
    EXPECT_THROW(train(net, adam, data, tiny_config(TaskKind::prediction)), ValidationError);
    TrainConfig bad = tiny_config(TaskKind::reconstruction);
    bad.batch_size = 0;
    EXPECT_THROW(train(net, adam, data, bad), ValidationError);
    EXPECT_THROW(train(net, adam, std::span<const Window>{}, tiny_config(TaskKind::reconstruction)), ValidationError);
}

TEST(Finetune, EncoderIsFrozen) {
    Network net = tiny_net(TaskKind::prediction);
    const auto data = random_windows(7, 20, 4, 8, true);
    const auto enc = snapshot_params(net, "encoder.");
    const auto head = snapshot_params(net, "head.");
    AdamState adam;
    const auto r = finetune_frozen(net, adam, data, 7, tiny_config(TaskKind::prediction));
    EXPECT_EQ(r.steps, 7u);
    EXPECT_EQ(snapshot_params(net, "encoder."), enc);
    EXPECT_NE(snapshot_params(net, "head."), head);
    EXPECT_EQ(adam.first.count("encoder.weight"), 0u);
}

TEST(Finetune, ZeroBudgetLeavesHead) {
    Network net = tiny_net(TaskKind::prediction);
    const auto data = random_windows(8, 20, 4, 8, true);
    const auto head = snapshot_params(net, "head.");
    AdamState adam;
    const auto r = finetune_frozen(net, adam, data, 0, tiny_config(TaskKind::prediction));
    EXPECT_EQ(r.steps, 0u);
    EXPECT_EQ(snapshot_params(net, "head."), head);
}

TEST(Finetune, BudgetCapsSteps) {
    const auto data = random_windows(9, 30, 4, 8, true);
    for (std::uint64_t budget : {1u, 8u, 25u, 100u}) {
        Network net = tiny_net(TaskKind::prediction);
        AdamState adam;
        EXPECT_EQ(finetune_frozen(net, adam, data, budget, tiny_config(TaskKind::prediction)).steps, budget);
    }
}

TEST(Classification, HandExample) {
    using T = Trend;
    const std::vector<T> labels{T::up, T::up, T::down, T::steady, T::steady, T::down};
    const std::vector<T> pred{T::up, T::steady, T::down, T::steady, T::up, T::up};
    const auto r = evaluate_classification(pred, labels);
    EXPECT_EQ(r.confusion[2][2], 1u);
    EXPECT_EQ(r.confusion[0][2], 1u);
    EXPECT_DOUBLE_EQ(*r.recall[0], 0.5);
    EXPECT_DOUBLE_EQ(*r.recall[1], 0.5);
    EXPECT_DOUBLE_EQ(*r.recall[2], 0.5);
    EXPECT_DOUBLE_EQ(*r.precision[2], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(*r.precision[0], 1.0);
    EXPECT_DOUBLE_EQ(*r.macro_recall, 0.5);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
}

TEST(Classification, AbsentClassesAreOmittedFromMacros) {
    const std::vector<Trend> labels{Trend::up, Trend::up, Trend::steady};
    const std::vector<Trend> pred{Trend::up, Trend::up, Trend::up};
    const auto r = evaluate_classification(pred, labels);
    EXPECT_FALSE(r.recall[0]);
    EXPECT_FALSE(r.precision[1]);
    EXPECT_DOUBLE_EQ(*r.macro_recall, 0.5);
    EXPECT_DOUBLE_EQ(*r.macro_precision, 2.0 / 3.0);
    EXPECT_THROW(evaluate_classification(std::vector<Trend>{}, std::vector<Trend>{}), ValidationError);
}

TEST(Classification, RandomAgainstConfusionOracle) {
    std::mt19937_64 rng(21);
    for (int k = 0; k < 200; ++k) {
        const int n = 1 + static_cast<int>(rng() % 60);
        std::vector<Trend> labels, pred;
        int conf[3][3] = {};
        for (int i = 0; i < n; ++i) {
            const int a = static_cast<int>(rng() % 3), b = static_cast<int>(rng() % 3);
            labels.push_back(trend_from_class(a));
            pred.push_back(trend_from_class(b));
            ++conf[a][b];
        }
        const auto r = evaluate_classification(pred, labels);
        double sum = 0;
        int present = 0, correct = 0;
        for (int c = 0; c < 3; ++c) {
            const int row = conf[c][0] + conf[c][1] + conf[c][2];
            correct += conf[c][c];
            if (row == 0) continue;
            sum += static_cast<double>(conf[c][c]) / row;
            ++present;
        }
        EXPECT_NEAR(*r.macro_recall, sum / present, 1e-15);
        EXPECT_NEAR(r.accuracy, static_cast<double>(correct) / n, 1e-15);
        EXPECT_GE(*r.macro_recall, 0.0);
        EXPECT_LE(*r.macro_recall, 1.0);
    }
}

TEST(Classification, LogitsArgmaxAndCrossEntropy) {
    RowMatrix logits(2, 3);
    logits << 0, 0, 0, 5, 1, 1;
    const std::vector<Trend> labels{Trend::steady, Trend::down};
    const auto r = evaluate_classification(logits, labels);
    EXPECT_EQ(r.confusion[0][0], 1u);
    const double l2[3] = {5, 1, 1};
    EXPECT_NEAR(*r.cross_entropy, (std::log(3.0) + oracle::cross_entropy(l2, 0)) / 2, 1e-12);
}
