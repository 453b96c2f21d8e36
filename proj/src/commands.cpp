#include "lobench/commands.hpp"

#include "lobench/error.hpp"
#include "lobench/text_format.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>

namespace lobench {

namespace {

std::string day_tag(const std::string& instrument, int day) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_d%03d", day);
    return instrument + buf;
}

// config.ini: the command section holds the options under their command-line names,
// [inputs] maps every input path to its SHA-256.
class RunConfig {
public:
    explicit RunConfig(const std::string& command) : command_(command) {
        w_.comment("lobench " + command);
        w_.section(command);
    }
    template <class T>
    void put(const std::string& key, const T& value) {
        w_.put(key, value);
    }
    void input(const fs::path& path) { inputs_.emplace_back(path.string(), sha256_file(path)); }

    fs::path write(const fs::path& out) {
        if (!inputs_.empty()) {
            w_.section("inputs");
            for (const auto& [p, h] : inputs_) w_.put(p, h);
        }
        const auto file = out / "config.ini";
        write_file(file, w_.str());
        return file;
    }

private:
    std::string command_;
    KeyValueWriter w_;
    std::vector<std::pair<std::string, std::string>> inputs_;
};

void prepare_out(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
}

FlowProfile resolve_profile(const std::string& spec) {
    const auto names = FlowProfile::builtin_names();
    if (std::find(names.begin(), names.end(), spec) != names.end()) return FlowProfile::builtin(spec);
    if (!fs::exists(spec)) {
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw ValidationError("profile '" + spec + "' is neither a file nor a built-in (" + known + ")");
    }
    return FlowProfile::from_text(read_file(spec));
}

WeightProfile resolve_weights(const std::string& name, int levels) {
    if (name == "level-decay") return WeightProfile::level_decay(levels);
    if (name == "uniform") return WeightProfile::uniform(levels);
    throw ValidationError("unknown weight profile '" + name + "' (expected level-decay or uniform)");
}

// One `epoch=<i> loss=<mean>` record per epoch.
std::string trace_records(const TrainResult& r) {
    std::string s;
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
        s += format_record({{"epoch", std::to_string(e)}, {"loss", format_double(r.epoch_loss[e])}}) + '\n';
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_generate(const GenerateOptions& opt, const fs::path& out) {
    if (opt.days < 1) throw ValidationError("generate: days must be >= 1");
    if (opt.first_day < 0) throw ValidationError("generate: first-day must be >= 0");
    FlowProfile profile = resolve_profile(opt.profile);
    profile.seed = opt.seed;
    profile.validate();
    prepare_out(out);

    RunConfig cfg("generate");
    cfg.put("profile", opt.profile);
    cfg.put("days", opt.days);
    cfg.put("first-day", opt.first_day);
    cfg.put("seed", opt.seed);
    if (fs::exists(opt.profile)) cfg.input(opt.profile);

    std::vector<fs::path> files;
    files.push_back(out / "profile.ini");
    write_file(files.back(), profile.to_text());
    for (int d = opt.first_day; d < opt.first_day + opt.days; ++d) {
        const FlowStream stream = generate_day(profile, d);
        files.push_back(out / ("flow_" + day_tag(stream.instrument, d) + ".csv"));
        write_file(files.back(), format_order_flow(stream));
        spdlog::info("generate: {} day {}: {} orders", stream.instrument, d, stream.orders.size());
    }
    files.push_back(cfg.write(out));
    return files;
}

std::vector<fs::path> cmd_build(const BuildOptions& opt, const fs::path& out) {
    if (opt.flows.empty()) throw ValidationError("build: no order-flow files given");
    SampleOptions sample;
    sample.levels = opt.levels;
    if (opt.levels < 1) throw ValidationError("build: levels must be >= 1");
    if (opt.padding == "extrapolate") sample.padding = PaddingMode::extrapolate;
    else if (opt.padding == "reject") sample.padding = PaddingMode::reject;
    else throw ValidationError("build: padding must be extrapolate or reject");
    prepare_out(out);

    RunConfig cfg("build");
    std::string joined;
    for (const auto& f : opt.flows) joined += (joined.empty() ? "" : " ") + f.string();
    cfg.put("flow", joined);
    cfg.put("levels", opt.levels);
    cfg.put("padding", opt.padding);

    std::vector<fs::path> files;
    for (const auto& f : opt.flows) {
        cfg.input(f);
        const FlowStream stream = parse_order_flow(read_file(f), f.string());
        const ReplayReport report = replay_check(stream, SessionCalendar{}, sample);
        const std::string tag = day_tag(stream.instrument, stream.day);
        files.push_back(out / ("series_" + tag + ".lobs"));
        write_file(files.back(), encode_day_series(report.series));
        files.push_back(out / ("replay_" + tag + ".txt"));
        write_file(files.back(), report.summary());
        spdlog::info("build: {}: {} snapshots", tag, report.series.size());
    }
    files.push_back(cfg.write(out));
    return files;
}

// ---------------------------------------------------------------------------

std::string DatasetInfo::to_text() const {
    KeyValueWriter w;
    w.section("dataset");
    w.put("normalized", normalized);
    w.put("scheme", scheme);
    w.put("scope", scope);
    w.put("steps", steps);
    w.put("columns", columns);
    w.put("stride", stride);
    w.put("labeled", labeled);
    w.put("balanced", balanced);
    w.put("mask_ratio", mask_ratio);
    w.put("train_windows", static_cast<std::uint64_t>(train_windows));
    w.put("test_windows", static_cast<std::uint64_t>(test_windows));
    w.section("label");
    w.put("horizon", label.horizon);
    w.put("delta", label.delta);
    return w.str();
}

DatasetInfo DatasetInfo::from_text(const std::string& text) {
    const KeyValueReader r(text, "dataset.ini");
    DatasetInfo d;
    d.normalized = r.get_bool_or("dataset.normalized", false);
    d.scheme = r.get("dataset.scheme");
    d.scope = r.get("dataset.scope");
    d.steps = r.get_int("dataset.steps");
    d.columns = r.get_int("dataset.columns");
    d.stride = r.get_int("dataset.stride");
    d.labeled = r.get_bool_or("dataset.labeled", false);
    d.balanced = r.get_bool_or("dataset.balanced", false);
    d.mask_ratio = r.get_double_or("dataset.mask_ratio", 0);
    d.train_windows = r.get_uint64_or("dataset.train_windows", 0);
    d.test_windows = r.get_uint64_or("dataset.test_windows", 0);
    d.label.horizon = r.get_int("label.horizon");
    d.label.delta = r.get_double("label.delta");
    return d;
}

std::vector<fs::path> cmd_preprocess(const PreprocessOptions& opt, const fs::path& out) {
    if (opt.series.empty()) throw ValidationError("preprocess: no day-series files given");
    const bool normalize_data = opt.scheme != "none";
    const NormScheme scheme = normalize_data ? parse_norm_scheme(opt.scheme) : NormScheme::global;
    if (opt.scope != "train" && opt.scope != "snapshot" && opt.scope != "window")
        throw ValidationError("preprocess: scope must be train, snapshot or window");
    if (opt.scope == "snapshot" && scheme == NormScheme::feature_wise && normalize_data)
        throw ValidationError("preprocess: feature-wise statistics cannot be fitted on a single snapshot");
    if (opt.steps < 1 || opt.stride < 1) throw ValidationError("preprocess: steps and stride must be >= 1");
    if (opt.balance && !opt.labels) throw ValidationError("preprocess: balancing needs labels");
    if (!(opt.mask_ratio >= 0 && opt.mask_ratio < 1)) throw ValidationError("preprocess: mask-ratio must lie in [0, 1)");
    const LabelConfig label{opt.label_horizon, opt.label_delta};
    label.validate();
    prepare_out(out);

    RunConfig cfg("preprocess");
    std::string joined;
    for (const auto& f : opt.series) joined += (joined.empty() ? "" : " ") + f.string();
    cfg.put("series", joined);
    cfg.put("scheme", opt.scheme);
    cfg.put("scope", opt.scope);
    cfg.put("epsilon", opt.epsilon);
    cfg.put("steps", opt.steps);
    cfg.put("stride", opt.stride);
    cfg.put("labels", opt.labels);
    cfg.put("label-horizon", opt.label_horizon);
    cfg.put("label-delta", opt.label_delta);
    cfg.put("balance", opt.balance);
    cfg.put("mask-ratio", opt.mask_ratio);
    cfg.put("seed", opt.seed);

    const SessionCalendar calendar;
    struct Part {
        DaySeries train, test;
        RowMatrix train_raw, test_raw;
    };
    std::vector<Part> parts;
    int levels = -1;
    for (const auto& f : opt.series) {
        cfg.input(f);
        DaySeries s = decode_day_series(read_file(f), f.string());
        if (levels >= 0 && s.levels != levels) throw ValidationError("preprocess: day series differ in depth");
        levels = s.levels;
        auto [train, test] = split_train_test(s);
        Part p{std::move(train), std::move(test), {}, {}};
        p.train_raw = to_matrix(p.train.snapshots);
        p.test_raw = to_matrix(p.test.snapshots);
        parts.push_back(std::move(p));
    }

    std::optional<NormStats> stats;
    if (normalize_data && opt.scope == "train") {
        Eigen::Index rows = 0;
        for (const auto& p : parts) rows += p.train_raw.rows();
        RowMatrix all(rows, 4 * levels);
        Eigen::Index r = 0;
        for (const auto& p : parts) {
            all.middleRows(r, p.train_raw.rows()) = p.train_raw;
            r += p.train_raw.rows();
        }
        stats = fit_stats(all, scheme, opt.epsilon, "train");
    }

    const auto prepare = [&](const RowMatrix& raw) -> RowMatrix {
        if (!normalize_data || opt.scope == "window") return raw;
        if (opt.scope == "snapshot") return normalize_each_row(raw, opt.epsilon).first;
        return normalize(raw, *stats);
    };
    const auto windows_of = [&](const DaySeries& s, const RowMatrix& raw, int offset) {
        auto w = make_session_windows(s, prepare(raw), calendar.period, opt.steps, opt.stride, offset);
        if (opt.labels) w = label_session_windows(std::move(w), s, calendar.period, label, offset);
        if (normalize_data && opt.scope == "window")
            for (auto& win : w) win.data = normalize(win.data, fit_stats(win.data, scheme, opt.epsilon, "window"));
        return w;
    };

    Dataset train_set{opt.steps, 4 * levels, {}}, test_set{opt.steps, 4 * levels, {}};
    for (const auto& p : parts) {
        auto a = windows_of(p.train, p.train_raw, 0);
        auto b = windows_of(p.test, p.test_raw, static_cast<int>(p.train.size()));
        std::move(a.begin(), a.end(), std::back_inserter(train_set.windows));
        std::move(b.begin(), b.end(), std::back_inserter(test_set.windows));
    }
    if (opt.balance) train_set.windows = balance_classes(train_set.windows, mix_seed(opt.seed, 1));
    if (opt.mask_ratio > 0)
        for (std::size_t i = 0; i < test_set.windows.size(); ++i)
            test_set.windows[i] = mask_for_imputation(test_set.windows[i], opt.mask_ratio, mix_seed(opt.seed, 2 + i));

    DatasetInfo info;
    info.normalized = normalize_data;
    info.scheme = opt.scheme;
    info.scope = opt.scope;
    info.steps = opt.steps;
    info.columns = 4 * levels;
    info.stride = opt.stride;
    info.labeled = opt.labels;
    info.balanced = opt.balance;
    info.label = label;
    info.mask_ratio = opt.mask_ratio;
    info.train_windows = train_set.windows.size();
    info.test_windows = test_set.windows.size();

    std::vector<fs::path> files;
    files.push_back(out / "train.lobd");
    write_file(files.back(), encode_dataset(train_set));
    files.push_back(out / "test.lobd");
    write_file(files.back(), encode_dataset(test_set));
    if (stats) {
        files.push_back(out / "norm.ini");
        write_file(files.back(), stats->to_text());
    }
    files.push_back(out / "dataset.ini");
    write_file(files.back(), info.to_text());
    spdlog::info("preprocess: {} train / {} test windows", info.train_windows, info.test_windows);
    files.push_back(cfg.write(out));
    return files;
}

LoadedDataset load_dataset(const fs::path& dir, const std::string& split, bool need_normalized, bool need_labels) {
    if (split != "train" && split != "test") throw ValidationError("split must be train or test");
    const auto sidecar = dir / "dataset.ini";
    if (!fs::exists(sidecar))
        throw ValidationError(dir.string() + " lacks dataset.ini: missing stage 'preprocess'");
    LoadedDataset d;
    d.info = DatasetInfo::from_text(read_file(sidecar));
    if (need_normalized && !d.info.normalized)
        throw ValidationError(dir.string() + " holds unnormalized windows: missing stage 'normalize'");
    if (need_labels && !d.info.labeled)
        throw ValidationError(dir.string() + " holds unlabeled windows: missing stage 'label'");
    d.file = dir / (split + ".lobd");
    d.data = decode_dataset(read_file(d.file), d.file.string());
    if (d.data.steps != d.info.steps || d.data.columns != d.info.columns)
        throw ValidationError(d.file.string() + ": window shape disagrees with dataset.ini");
    if (d.data.windows.empty()) throw ValidationError(d.file.string() + " contains no windows");
    return d;
}

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_train(const TrainOptions& opt, const fs::path& out) {
    const TaskKind task = parse_task(opt.task);
    const auto data = load_dataset(opt.data, "train", true, task == TaskKind::prediction);
    const int levels = data.data.columns / 4;

    TrainConfig tc;
    tc.epochs = opt.epochs;
    tc.batch_size = opt.batch_size;
    tc.seed = mix_seed(opt.seed, 10);
    tc.task = task;
    tc.adam.lr = opt.lr;
    tc.loss.alpha = opt.alpha;
    tc.loss.lambda = opt.lambda;
    tc.loss.weights = resolve_weights(opt.weights, levels);
    tc.loss.validate(data.data.columns);
    tc.mask_ratio = opt.mask_ratio;
    tc.clip_norm = opt.clip;
    if (opt.max_steps > 0) tc.max_steps = opt.max_steps;
    tc.validate();
    if (opt.latent < 1 || opt.hidden < 0) throw ValidationError("train: latent must be >= 1 and hidden >= 0");
    prepare_out(out);

    RunConfig cfg("train");
    cfg.put("data", opt.data.string());
    cfg.put("task", opt.task);
    cfg.put("epochs", opt.epochs);
    cfg.put("batch-size", opt.batch_size);
    cfg.put("lr", opt.lr);
    cfg.put("latent", opt.latent);
    cfg.put("hidden", opt.hidden);
    cfg.put("activation", opt.activation);
    cfg.put("alpha", opt.alpha);
    cfg.put("lambda", opt.lambda);
    cfg.put("weights", opt.weights);
    cfg.put("mask-ratio", opt.mask_ratio);
    cfg.put("clip", opt.clip);
    cfg.put("max-steps", opt.max_steps);
    cfg.put("seed", opt.seed);
    cfg.input(opt.data / "dataset.ini");
    cfg.input(data.file);

    Network net = make_autoencoder(data.data.steps, data.data.columns, opt.latent, parse_activation(opt.activation),
                                   mix_seed(opt.seed, 0));
    if (task == TaskKind::prediction) net.head = make_head(task, opt.latent, 3, opt.hidden, mix_seed(opt.seed, 1));
    else net.head.kind = task;

    AdamState adam{tc.adam, 0, {}, {}};
    const TrainResult result = train(net, adam, data.data.windows, tc);
    spdlog::info("train: {} steps, final loss {}", result.steps,
                 result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back());

    Checkpoint ckpt = to_checkpoint(net, &adam);
    ckpt.meta["loss.alpha"] = format_double(opt.alpha);
    ckpt.meta["loss.lambda"] = format_double(opt.lambda);
    ckpt.meta["loss.weights"] = opt.weights;
    ckpt.meta["mask_ratio"] = format_double(opt.mask_ratio);

    std::vector<fs::path> files;
    files.push_back(out / "model.lobc");
    write_file(files.back(), encode_checkpoint(ckpt));
    files.push_back(out / "trace.txt");
    write_file(files.back(), trace_records(result));
    files.push_back(cfg.write(out));
    return files;
}

LoadedModel load_model(const fs::path& checkpoint, const fs::path& delta) {
    LoadedModel m;
    const std::string bytes = read_file(checkpoint);
    m.digest = sha256_hex(bytes);
    m.checkpoint = decode_checkpoint(bytes, checkpoint.string());
    m.net = network_from_checkpoint(m.checkpoint, &m.adam);
    if (!delta.empty()) {
        const Checkpoint d = decode_checkpoint(read_file(delta), delta.string());
        auto base = d.meta.find("base");
        if (base == d.meta.end() || base->second != m.digest)
            throw ValidationError(delta.string() + " was not derived from " + checkpoint.string());
        apply_head_delta(m.net, d);
    }
    return m;
}

MetricsReport evaluate_network(const Network& net, TaskKind task, const std::vector<Window>& windows,
                               const LossConfig& loss, double mask_ratio, std::uint64_t seed,
                               const NormStats* stats) {
    if (windows.empty()) throw ValidationError("evaluate: no windows");
    if (net.head.kind != task) throw ValidationError("evaluate: head does not match the task");
    MetricsReport report;
    if (task == TaskKind::prediction) {
        RowMatrix inputs(static_cast<Eigen::Index>(windows.size()), net.inputs());
        std::vector<Trend> labels;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            if (!windows[i].label) throw ValidationError("evaluate: window " + std::to_string(i) + " is unlabeled");
            inputs.row(static_cast<Eigen::Index>(i)) =
                Eigen::Map<const Eigen::RowVectorXd>(windows[i].data.data(), windows[i].data.size());
            labels.push_back(*windows[i].label);
        }
        const auto cr = evaluate_classification(forward(net, inputs), labels);
        report.samples = cr.samples;
        report.ce = cr.cross_entropy;
        report.accuracy = cr.accuracy;
        report.macro_precision = cr.macro_precision;
        report.macro_recall = cr.macro_recall;
        return report;
    }
    if (task == TaskKind::imputation) {
        double total = 0;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const Window w = windows[i].mask.empty() ? mask_for_imputation(windows[i], mask_ratio, mix_seed(seed, i))
                                                     : windows[i];
            const RowMatrix x = masked_input(w);
            const Vector y = decode(net, encode(net, Eigen::Map<const Vector>(x.data(), x.size())));
            total += masked_mse(w.data, Eigen::Map<const RowMatrix>(y.data(), net.steps, net.columns), w.mask);
        }
        report.samples = windows.size();
        report.masked_mse = total / static_cast<double>(windows.size());
        return report;
    }
    std::vector<RowMatrix> truth, pred;
    for (const auto& w : windows) {
        const Vector y = decode(net, encode(net, w));
        truth.push_back(w.data);
        pred.push_back(Eigen::Map<const RowMatrix>(y.data(), net.steps, net.columns));
    }
    MetricsReport recon = reconstruction_report(truth, pred, loss);
    if (stats) {
        double total = 0;
        for (const auto& y : pred) total += l_reg(denormalize(y, *stats));
        recon.l_reg_denorm = total / static_cast<double>(pred.size());
    }
    return recon;
}

std::vector<fs::path> cmd_evaluate(const EvaluateOptions& opt, const fs::path& out) {
    LoadedModel model = load_model(opt.checkpoint, opt.delta);
    const TaskKind task = model.net.head.kind;
    const auto data = load_dataset(opt.data, opt.split, true, task == TaskKind::prediction);
    if (data.data.steps != model.net.steps || data.data.columns != model.net.columns)
        throw ValidationError("evaluate: dataset window shape does not match the model");
    prepare_out(out);

    const auto meta = [&](const std::string& k, const std::string& fallback) {
        auto it = model.checkpoint.meta.find(k);
        return it == model.checkpoint.meta.end() ? fallback : it->second;
    };
    LossConfig loss;
    loss.alpha = KeyValueReader("v=" + meta("loss.alpha", "0.5"), "checkpoint").get_double("v");
    loss.lambda = KeyValueReader("v=" + meta("loss.lambda", "1"), "checkpoint").get_double("v");
    loss.weights = resolve_weights(meta("loss.weights", "level-decay"), data.data.columns / 4);
    const double mask_ratio = KeyValueReader("v=" + meta("mask_ratio", "0.2"), "checkpoint").get_double("v");

    RunConfig cfg("evaluate");
    cfg.put("data", opt.data.string());
    cfg.put("split", opt.split);
    cfg.put("checkpoint", opt.checkpoint.string());
    if (!opt.delta.empty()) cfg.put("delta", opt.delta.string());
    cfg.put("seed", opt.seed);
    cfg.input(opt.checkpoint);
    if (!opt.delta.empty()) cfg.input(opt.delta);
    cfg.input(data.file);

    std::optional<NormStats> stats;
    if (fs::exists(opt.data / "norm.ini")) {
        cfg.input(opt.data / "norm.ini");
        stats = NormStats::from_text(read_file(opt.data / "norm.ini"));
    }
    MetricsReport report = evaluate_network(model.net, task, data.data.windows, loss, mask_ratio,
                                            mix_seed(opt.seed, 3), stats ? &*stats : nullptr);
    report.context.insert(report.context.begin(), {{"task", to_string(task)}, {"split", opt.split}});

    std::vector<fs::path> files;
    files.push_back(out / "metrics.txt");
    write_file(files.back(), report.to_record() + '\n');
    spdlog::info("evaluate: {}", report.to_record());
    files.push_back(cfg.write(out));
    return files;
}

std::vector<fs::path> cmd_transfer(const TransferOptions& opt, const fs::path& out) {
    LoadedModel model = load_model(opt.checkpoint);
    const auto data = load_dataset(opt.data, "train", true, true);
    if (data.data.steps != model.net.steps || data.data.columns != model.net.columns)
        throw ValidationError("transfer: target window shape does not match the encoder");
    if (opt.budget == 0) throw ValidationError("transfer: budget must be >= 1");
    prepare_out(out);

    RunConfig cfg("transfer");
    cfg.put("checkpoint", opt.checkpoint.string());
    cfg.put("data", opt.data.string());
    cfg.put("budget", opt.budget);
    cfg.put("batch-size", opt.batch_size);
    cfg.put("lr", opt.lr);
    cfg.put("hidden", opt.hidden);
    cfg.put("seed", opt.seed);
    cfg.input(opt.checkpoint);
    cfg.input(data.file);

    AdamState adam;
    adam.config.lr = opt.lr;
    if (model.net.head.kind != TaskKind::prediction)
        model.net.head = make_head(TaskKind::prediction, model.net.latent(), 3, opt.hidden, mix_seed(opt.seed, 1));

    const Dense encoder_before = model.net.encoder;
    TrainConfig tc;
    tc.batch_size = opt.batch_size;
    tc.seed = mix_seed(opt.seed, 10);
    tc.task = TaskKind::prediction;
    tc.adam = adam.config;
    const TrainResult result = finetune_frozen(model.net, adam, data.data.windows, opt.budget, tc);
    if (model.net.encoder.weight != encoder_before.weight || model.net.encoder.bias != encoder_before.bias)
        throw NumericError("transfer: encoder changed during frozen fine-tuning");
    spdlog::info("transfer: {} head steps", result.steps);

    std::vector<fs::path> files;
    files.push_back(out / "head_delta.lobc");
    write_file(files.back(), encode_checkpoint(head_delta_checkpoint(model.net.head, model.digest, &adam)));
    files.push_back(out / "trace.txt");
    write_file(files.back(), trace_records(result));
    files.push_back(cfg.write(out));
    return files;
}

}  // namespace lobench
