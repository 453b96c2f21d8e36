#pragma once

#include "lobench/metrics.hpp"
#include "lobench/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lobench {

enum class Activation : std::uint8_t { identity, relu };
enum class TaskKind : std::uint8_t { reconstruction, prediction, imputation };

std::string to_string(Activation a);
std::string to_string(TaskKind k);
Activation parse_activation(const std::string& s);
TaskKind parse_task(const std::string& s);

// y = act(W x + b), W is out x in.
struct Dense {
    RowMatrix weight;
    Vector bias;
    Activation activation = Activation::identity;

    Eigen::Index inputs() const { return weight.cols(); }
    Eigen::Index outputs() const { return weight.rows(); }
};

// Uniform in +-1/sqrt(fan_in), drawn from `rng`.
Dense make_dense(Eigen::Index inputs, Eigen::Index outputs, Activation act, std::uint64_t seed);

struct TaskHead {
    TaskKind kind = TaskKind::reconstruction;
    std::vector<Dense> layers;

    Eigen::Index inputs() const { return layers.front().inputs(); }
    Eigen::Index outputs() const { return layers.back().outputs(); }
};

// Reconstruction/imputation: one affine map latent -> output_dim.
// Prediction: latent -> hidden (relu) -> 3 logits; hidden = 0 drops the hidden layer.
TaskHead make_head(TaskKind kind, Eigen::Index latent, Eigen::Index output_dim, Eigen::Index hidden,
                   std::uint64_t seed);

// Encoder followed by a task head. With a reconstruction head this is the reference
// linear autoencoder (encoder 4000 -> 256, decoder 256 -> 4000).
struct Network {
    Dense encoder;
    TaskHead head;

    // Window shape the network consumes; inputs() == steps * columns.
    int steps = 100;
    int columns = 40;

    Eigen::Index latent() const { return encoder.outputs(); }
    Eigen::Index inputs() const { return encoder.inputs(); }
};

Network make_autoencoder(int steps, int columns, Eigen::Index latent, Activation hidden, std::uint64_t seed);

// Named views over every parameter, encoder first, in a fixed order.
struct ParamView {
    std::string name;
    std::span<double> values;
    std::vector<std::uint64_t> shape;
};
std::vector<ParamView> parameters(Network& net);
std::vector<ParamView> parameters(TaskHead& head, const std::string& prefix = "head");
double parameter_norm(Network& net);

Vector encode(const Network& net, const Window& w);
Vector encode(const Network& net, const Eigen::Ref<const Vector>& flat);
Vector decode(const Network& net, const Eigen::Ref<const Vector>& latent);
Vector head_forward(const TaskHead& head, const Eigen::Ref<const Vector>& latent);
// Batched forward: one flattened window per row.
RowMatrix forward(const Network& net, const RowMatrix& inputs);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::map<std::string, Vector> first;
    std::map<std::string, Vector> second;

    // Applies one update; accumulators are created (zeroed) on first use.
    void apply(std::span<ParamView> params, const std::map<std::string, Vector>& grads);
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    std::uint64_t seed = 0;
    LossConfig loss;
    TaskKind task = TaskKind::reconstruction;
    bool freeze_encoder = false;
    AdamConfig adam;
    double clip_norm = 0;        // global-norm clip; 0 disables
    double mask_ratio = 0.2;     // imputation only
    std::optional<std::uint64_t> max_steps;  // stop after this many optimizer steps
    bool shuffle = true;

    void validate() const;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean per-sample training loss of each epoch
    std::uint64_t steps = 0;
};

// Inputs/targets for one task, assembled from windows.
struct Batch {
    RowMatrix inputs;                      // B x (T*C)
    std::vector<const Window*> windows;    // targets
    std::vector<std::vector<int>> masks;   // imputation
};

// Mean per-sample task loss and its gradient with respect to the network output.
struct LossAndGrad {
    double loss = 0;
    RowMatrix output_grad;
};
LossAndGrad task_loss(const Network& net, const Batch& batch, const RowMatrix& outputs, const TrainConfig& cfg);

struct Gradients {
    std::map<std::string, Vector> by_name;
    double loss = 0;
};
// Analytic backward pass for a batch.
Gradients compute_gradients(const Network& net, const Batch& batch, const TrainConfig& cfg);

Batch make_batch(const Network& net, std::span<const Window> windows, std::span<const std::size_t> indices,
                 const TrainConfig& cfg, std::uint64_t mask_seed);

// Mini-batch Adam. Aborts with NumericError on a non-finite loss.
TrainResult train(Network& net, AdamState& adam, std::span<const Window> data, const TrainConfig& cfg);

// Trains only the head for at most `budget_batches` optimizer steps; the encoder is untouched.
TrainResult finetune_frozen(Network& net, AdamState& adam, std::span<const Window> data, std::uint64_t budget_batches,
                            TrainConfig cfg);

struct ClassificationReport {
    std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
    std::array<std::optional<double>, 3> precision;         // absent when never predicted
    std::array<std::optional<double>, 3> recall;            // absent when class not in labels
    std::optional<double> macro_precision;
    std::optional<double> macro_recall;
    double accuracy = 0;
    std::optional<double> cross_entropy;
    std::size_t samples = 0;
};

ClassificationReport evaluate_classification(std::span<const Trend> predicted, std::span<const Trend> labels);
// Argmax predictions plus mean cross-entropy; logits is N x 3.
ClassificationReport evaluate_classification(const RowMatrix& logits, std::span<const Trend> labels);

}  // namespace lobench
