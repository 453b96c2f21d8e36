#include "lobench/model.hpp"

#include "lobench/error.hpp"
#include "lobench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lobench {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

std::string to_string(TaskKind k) {
    switch (k) {
    case TaskKind::reconstruction: return "reconstruction";
    case TaskKind::prediction: return "prediction";
    case TaskKind::imputation: return "imputation";
    }
    return "unknown";
}

Activation parse_activation(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    throw ValidationError("unknown activation '" + s + "'");
}

TaskKind parse_task(const std::string& s) {
    if (s == "reconstruction") return TaskKind::reconstruction;
    if (s == "prediction") return TaskKind::prediction;
    if (s == "imputation") return TaskKind::imputation;
    throw ValidationError("unknown task '" + s + "'");
}

// splitmix64 finalizer; derives independent stream seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

RowMatrix layer_forward(const Dense& layer, const RowMatrix& in, RowMatrix* pre = nullptr) {
    RowMatrix z = in * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (pre) *pre = z;
    if (layer.activation == Activation::relu) z = z.cwiseMax(0.0);
    return z;
}

std::vector<const Dense*> layer_list(const Network& net) {
    std::vector<const Dense*> layers{&net.encoder};
    for (const auto& l : net.head.layers) layers.push_back(&l);
    return layers;
}

std::vector<std::string> layer_names(const Network& net) {
    std::vector<std::string> names{"encoder"};
    for (std::size_t i = 0; i < net.head.layers.size(); ++i) names.push_back("head." + std::to_string(i));
    return names;
}

void check_input(const Network& net, Eigen::Index n) {
    if (n != net.inputs())
        throw ValidationError("network expects " + std::to_string(net.inputs()) + " inputs, got " + std::to_string(n));
}

}  // namespace

Dense make_dense(Eigen::Index inputs, Eigen::Index outputs, Activation act, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
    std::uniform_real_distribution<double> u(-bound, bound);
    Dense d;
    d.activation = act;
    d.weight.resize(outputs, inputs);
    for (Eigen::Index i = 0; i < d.weight.size(); ++i) d.weight.data()[i] = u(rng);
    d.bias.resize(outputs);
    for (Eigen::Index i = 0; i < outputs; ++i) d.bias[i] = u(rng);
    return d;
}

TaskHead make_head(TaskKind kind, Eigen::Index latent, Eigen::Index output_dim, Eigen::Index hidden,
                   std::uint64_t seed) {
    TaskHead h;
    h.kind = kind;
    if (kind == TaskKind::prediction) {
        if (hidden > 0) {
            h.layers.push_back(make_dense(latent, hidden, Activation::relu, mix_seed(seed, 0)));
            h.layers.push_back(make_dense(hidden, 3, Activation::identity, mix_seed(seed, 1)));
        } else {
            h.layers.push_back(make_dense(latent, 3, Activation::identity, mix_seed(seed, 0)));
        }
    } else {
        h.layers.push_back(make_dense(latent, output_dim, Activation::identity, mix_seed(seed, 0)));
    }
    return h;
}

Network make_autoencoder(int steps, int columns, Eigen::Index latent, Activation hidden, std::uint64_t seed) {
    Network net;
    net.steps = steps;
    net.columns = columns;
    const Eigen::Index d = static_cast<Eigen::Index>(steps) * columns;
    net.encoder = make_dense(d, latent, hidden, mix_seed(seed, 100));
    net.head = make_head(TaskKind::reconstruction, latent, d, 0, mix_seed(seed, 200));
    return net;
}

namespace {
void add_dense(std::vector<ParamView>& out, Dense& d, const std::string& name) {
    out.push_back({name + ".weight", {d.weight.data(), static_cast<std::size_t>(d.weight.size())},
                   {static_cast<std::uint64_t>(d.weight.rows()), static_cast<std::uint64_t>(d.weight.cols())}});
    out.push_back({name + ".bias", {d.bias.data(), static_cast<std::size_t>(d.bias.size())},
                   {static_cast<std::uint64_t>(d.bias.size())}});
}
}  // namespace

std::vector<ParamView> parameters(TaskHead& head, const std::string& prefix) {
    std::vector<ParamView> out;
    for (std::size_t i = 0; i < head.layers.size(); ++i) add_dense(out, head.layers[i], prefix + "." + std::to_string(i));
    return out;
}

std::vector<ParamView> parameters(Network& net) {
    std::vector<ParamView> out;
    add_dense(out, net.encoder, "encoder");
    for (auto& p : parameters(net.head)) out.push_back(std::move(p));
    return out;
}

double parameter_norm(Network& net) {
    double sq = 0;
    for (const auto& p : parameters(net))
        for (double v : p.values) sq += v * v;
    return std::sqrt(sq);
}

Vector encode(const Network& net, const Eigen::Ref<const Vector>& flat) {
    check_input(net, flat.size());
    RowMatrix in = flat.transpose();
    return layer_forward(net.encoder, in).row(0).transpose();
}

Vector encode(const Network& net, const Window& w) {
    return encode(net, Eigen::Map<const Vector>(w.data.data(), w.data.size()));
}

Vector head_forward(const TaskHead& head, const Eigen::Ref<const Vector>& latent) {
    if (latent.size() != head.inputs())
        throw ValidationError("head expects " + std::to_string(head.inputs()) + " inputs, got " +
                              std::to_string(latent.size()));
    RowMatrix a = latent.transpose();
    for (const auto& layer : head.layers) a = layer_forward(layer, a);
    return a.row(0).transpose();
}

Vector decode(const Network& net, const Eigen::Ref<const Vector>& latent) { return head_forward(net.head, latent); }

RowMatrix forward(const Network& net, const RowMatrix& inputs) {
    check_input(net, inputs.cols());
    RowMatrix a = inputs;
    for (const Dense* layer : layer_list(net)) a = layer_forward(*layer, a);
    return a;
}

void AdamState::apply(std::span<ParamView> params, const std::map<std::string, Vector>& grads) {
    ++step;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (auto& p : params) {
        auto git = grads.find(p.name);
        if (git == grads.end()) continue;
        const Vector& g = git->second;
        const auto n = static_cast<Eigen::Index>(p.values.size());
        if (g.size() != n) throw ValidationError("adam: gradient shape mismatch for " + p.name);
        auto& m = first[p.name];
        auto& v = second[p.name];
        if (m.size() != n) m = Vector::Zero(n);
        if (v.size() != n) v = Vector::Zero(n);
        m = config.beta1 * m + (1 - config.beta1) * g;
        v = config.beta2 * v + (1 - config.beta2) * g.cwiseAbs2();
        Eigen::Map<Vector> values(p.values.data(), n);
        values.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("train: batch size must be >= 1");
    if (!(adam.lr >= 0)) throw ValidationError("train: learning rate must be >= 0");
    if (task == TaskKind::imputation && !(mask_ratio > 0 && mask_ratio < 1))
        throw ValidationError("train: mask ratio must lie in (0, 1)");
}

Batch make_batch(const Network& net, std::span<const Window> windows, std::span<const std::size_t> indices,
                 const TrainConfig& cfg, std::uint64_t mask_seed) {
    Batch b;
    b.inputs.resize(static_cast<Eigen::Index>(indices.size()), net.inputs());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Window& w = windows[indices[k]];
        check_input(net, w.data.size());
        b.windows.push_back(&w);
        if (cfg.task == TaskKind::imputation) {
            Window masked = w.mask.empty() ? mask_for_imputation(w, cfg.mask_ratio, mix_seed(mask_seed, indices[k])) : w;
            const RowMatrix x = masked_input(masked);
            b.inputs.row(k) = Eigen::Map<const Eigen::RowVectorXd>(x.data(), x.size());
            b.masks.push_back(std::move(masked.mask));
        } else {
            if (cfg.task == TaskKind::prediction && !w.label)
                throw ValidationError("prediction batch: window at " + std::to_string(w.origin.start) + " is unlabeled");
            b.inputs.row(k) = Eigen::Map<const Eigen::RowVectorXd>(w.data.data(), w.data.size());
        }
    }
    return b;
}

LossAndGrad task_loss(const Network& net, const Batch& batch, const RowMatrix& outputs, const TrainConfig& cfg) {
    const auto n = static_cast<Eigen::Index>(batch.windows.size());
    LossAndGrad out;
    out.output_grad.resize(outputs.rows(), outputs.cols());
    const double inv = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Window& w = *batch.windows[i];
        if (cfg.task == TaskKind::prediction) {
            const Eigen::Vector3d logits = outputs.row(i).transpose();
            out.loss += cross_entropy(logits, *w.label) * inv;
            out.output_grad.row(i) = cross_entropy_gradient(logits, *w.label).transpose() * inv;
            continue;
        }
        const RowMatrix pred = Eigen::Map<const RowMatrix>(outputs.row(i).data(), net.steps, net.columns);
        RowMatrix g;
        if (cfg.task == TaskKind::reconstruction) {
            out.loss += l_all(w.data, pred, cfg.loss) * inv;
            g = l_all_gradient(w.data, pred, cfg.loss);
        } else {
            out.loss += masked_mse(w.data, pred, batch.masks[i]) * inv;
            g = masked_mse_gradient(w.data, pred, batch.masks[i]);
        }
        out.output_grad.row(i) = Eigen::Map<const Eigen::RowVectorXd>(g.data(), g.size()) * inv;
    }
    return out;
}

Gradients compute_gradients(const Network& net, const Batch& batch, const TrainConfig& cfg) {
    const auto layers = layer_list(net);
    const auto names = layer_names(net);
    std::vector<RowMatrix> acts{batch.inputs};
    std::vector<RowMatrix> pres(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) acts.push_back(layer_forward(*layers[i], acts.back(), &pres[i]));

    auto lg = task_loss(net, batch, acts.back(), cfg);
    Gradients grads;
    grads.loss = lg.loss;

    RowMatrix upstream = std::move(lg.output_grad);
    for (std::size_t i = layers.size(); i-- > 0;) {
        const Dense& layer = *layers[i];
        if (layer.activation == Activation::relu) upstream = upstream.cwiseProduct((pres[i].array() > 0).cast<double>().matrix());
        const bool frozen = i == 0 && cfg.freeze_encoder;
        if (!frozen) {
            const RowMatrix dw = upstream.transpose() * acts[i];
            grads.by_name[names[i] + ".weight"] = Eigen::Map<const Vector>(dw.data(), dw.size());
            grads.by_name[names[i] + ".bias"] = upstream.colwise().sum().transpose();
        }
        if (i == 1 && cfg.freeze_encoder) break;
        if (i > 0) upstream = upstream * layer.weight;
    }
    return grads;
}

TrainResult train(Network& net, AdamState& adam, std::span<const Window> data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw ValidationError("train: no training windows");
    if (cfg.task != net.head.kind) throw ValidationError("train: task does not match the network head");
    adam.config = cfg.adam;

    auto params = parameters(net);
    if (cfg.freeze_encoder)
        params.erase(std::remove_if(params.begin(), params.end(),
                                    [](const ParamView& p) { return p.name.starts_with("encoder."); }),
                     params.end());

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);

    TrainResult result;
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        std::size_t seen = 0;
        bool stop = false;
        for (std::size_t start = 0, batch_id = 0; start < order.size(); start += batch_size, ++batch_id) {
            if (cfg.max_steps && result.steps >= *cfg.max_steps) {
                stop = true;
                break;
            }
            const std::size_t end = std::min(order.size(), start + batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Batch batch = make_batch(net, data, idx, cfg, mix_seed(cfg.seed, 1000 + epoch));
            auto grads = compute_gradients(net, batch, cfg);
            if (!std::isfinite(grads.loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_id) + " (parameter norm " +
                                   std::to_string(parameter_norm(net)) + ")");
            if (cfg.clip_norm > 0) {
                double sq = 0;
                for (const auto& [name, g] : grads.by_name) sq += g.squaredNorm();
                const double norm = std::sqrt(sq);
                if (norm > cfg.clip_norm)
                    for (auto& [name, g] : grads.by_name) g *= cfg.clip_norm / norm;
            }
            adam.apply(params, grads.by_name);
            ++result.steps;
            loss_sum += grads.loss * static_cast<double>(idx.size());
            seen += idx.size();
        }
        if (seen > 0) result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
        if (stop || (cfg.max_steps && result.steps >= *cfg.max_steps)) break;
    }
    return result;
}

TrainResult finetune_frozen(Network& net, AdamState& adam, std::span<const Window> data, std::uint64_t budget_batches,
                            TrainConfig cfg) {
    if (budget_batches == 0) return {};
    if (data.empty()) throw ValidationError("finetune: no data");
    cfg.freeze_encoder = true;
    cfg.max_steps = budget_batches;
    const std::uint64_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
    cfg.epochs = static_cast<int>((budget_batches + per_epoch - 1) / per_epoch);
    return train(net, adam, data, cfg);
}

ClassificationReport evaluate_classification(std::span<const Trend> predicted, std::span<const Trend> labels) {
    if (predicted.empty() || predicted.size() != labels.size())
        throw ValidationError("evaluate_classification: need equal, non-empty prediction and label lists");
    ClassificationReport r;
    r.samples = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) ++r.confusion[class_index(labels[i])][class_index(predicted[i])];

    std::size_t correct = 0;
    double p_sum = 0, r_sum = 0;
    int p_n = 0, r_n = 0;
    for (int c = 0; c < 3; ++c) {
        correct += r.confusion[c][c];
        std::size_t row = 0, col = 0;
        for (int k = 0; k < 3; ++k) {
            row += r.confusion[c][k];
            col += r.confusion[k][c];
        }
        if (col > 0) {
            r.precision[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(col);
            p_sum += *r.precision[c];
            ++p_n;
        }
        if (row > 0) {
            r.recall[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
            r_sum += *r.recall[c];
            ++r_n;
        }
    }
    if (p_n > 0) r.macro_precision = p_sum / p_n;
    if (r_n > 0) r.macro_recall = r_sum / r_n;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
    return r;
}

ClassificationReport evaluate_classification(const RowMatrix& logits, std::span<const Trend> labels) {
    if (logits.cols() != 3) throw ValidationError("evaluate_classification: logits must have 3 columns");
    if (logits.rows() != static_cast<Eigen::Index>(labels.size()))
        throw ValidationError("evaluate_classification: logits/labels count mismatch");
    std::vector<Trend> pred;
    double ce = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        pred.push_back(trend_from_class(static_cast<int>(arg)));
        ce += cross_entropy(logits.row(i).transpose(), labels[i]);
    }
    auto r = evaluate_classification(pred, labels);
    r.cross_entropy = ce / static_cast<double>(labels.size());
    return r;
}

}  // namespace lobench
