#include "lobench/commands.hpp"
#include "lobench/error.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

using namespace lobench;

namespace {

fs::path default_out(const std::string& command) {
    const char* root = std::getenv("LOBENCH_OUT");
    return fs::path(root && *root ? root : "runs") / command;
}

void print_files(const std::vector<fs::path>& files) {
    for (const auto& f : files) std::cout << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Limit order book benchmark pipeline"};
    app.set_config("--config", "", "Read options from an ini file (sections named after subcommands)");
    app.require_subcommand(1);
    app.fallthrough();
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    fs::path out;
    const auto add_out = [&](CLI::App* sub) {
        sub->add_option("--out", out, "Output directory (default: $LOBENCH_OUT/<command>, else runs/<command>)");
    };

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Synthesize order flow for one or more days");
    g->add_option("--profile", gen.profile, "Built-in profile name or profile file")->capture_default_str();
    g->add_option("--days", gen.days, "Number of days")->capture_default_str();
    g->add_option("--first-day", gen.first_day, "Index of the first day")->capture_default_str();
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    add_out(g);

    BuildOptions build;
    auto* b = app.add_subcommand("build", "Replay order flow through the engine and sample day series");
    b->add_option("--flow", build.flows, "Order-flow files")->required()->delimiter(' ');
    b->add_option("--levels", build.levels, "Book levels per snapshot")->capture_default_str();
    b->add_option("--padding", build.padding, "Thin-book policy: extrapolate or reject")->capture_default_str();
    add_out(b);

    PreprocessOptions pre;
    auto* p = app.add_subcommand("preprocess", "Normalize, split, window and label day series");
    p->add_option("--series", pre.series, "Day-series files")->required()->delimiter(' ');
    p->add_option("--scheme", pre.scheme, "global, feature-wise or none")->capture_default_str();
    p->add_option("--scope", pre.scope, "Statistics fitted on: train, snapshot or window")->capture_default_str();
    p->add_option("--epsilon", pre.epsilon, "Standard deviation floor")->capture_default_str();
    p->add_option("--steps", pre.steps, "Window length")->capture_default_str();
    p->add_option("--stride", pre.stride, "Window stride")->capture_default_str();
    p->add_option("--labels", pre.labels, "Attach trend labels")->capture_default_str();
    p->add_option("--label-horizon", pre.label_horizon, "Label lookahead in snapshots")->capture_default_str();
    p->add_option("--label-delta", pre.label_delta, "Label threshold")->capture_default_str();
    p->add_option("--balance", pre.balance, "Down-sample training windows to the minority class")->capture_default_str();
    p->add_option("--mask-ratio", pre.mask_ratio, "Fixed imputation masks on test windows (0 = none)")
        ->capture_default_str();
    p->add_option("--seed", pre.seed, "Random seed")->capture_default_str();
    add_out(p);

    TrainOptions tr;
    auto* t = app.add_subcommand("train", "Train the reference model");
    t->add_option("--data", tr.data, "Preprocess output directory")->required();
    t->add_option("--task", tr.task, "reconstruction, prediction or imputation")->capture_default_str();
    t->add_option("--epochs", tr.epochs)->capture_default_str();
    t->add_option("--batch-size", tr.batch_size)->capture_default_str();
    t->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--latent", tr.latent, "Encoder width")->capture_default_str();
    t->add_option("--hidden", tr.hidden, "Prediction head hidden width (0 = none)")->capture_default_str();
    t->add_option("--activation", tr.activation, "Encoder activation: identity or relu")->capture_default_str();
    t->add_option("--alpha", tr.alpha)->capture_default_str();
    t->add_option("--lambda", tr.lambda)->capture_default_str();
    t->add_option("--weights", tr.weights, "level-decay or uniform")->capture_default_str();
    t->add_option("--mask-ratio", tr.mask_ratio, "Imputation mask ratio")->capture_default_str();
    t->add_option("--clip", tr.clip, "Global gradient-norm clip (0 = off)")->capture_default_str();
    t->add_option("--max-steps", tr.max_steps, "Optimizer step limit (0 = none)")->capture_default_str();
    t->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
    add_out(t);

    EvaluateOptions ev;
    auto* e = app.add_subcommand("evaluate", "Write metric records for a checkpoint");
    e->add_option("--data", ev.data, "Preprocess output directory")->required();
    e->add_option("--split", ev.split, "test or train")->capture_default_str();
    e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
    e->add_option("--delta", ev.delta, "Head delta written by transfer");
    e->add_option("--seed", ev.seed, "Seed for imputation masks not stored in the data")->capture_default_str();
    add_out(e);

    TransferOptions tf;
    auto* x = app.add_subcommand("transfer", "Fine-tune a prediction head on a frozen encoder");
    x->add_option("--checkpoint", tf.checkpoint, "Pretrained checkpoint")->required();
    x->add_option("--data", tf.data, "Target preprocess output directory")->required();
    x->add_option("--budget", tf.budget, "Fine-tuning batches")->capture_default_str();
    x->add_option("--batch-size", tf.batch_size)->capture_default_str();
    x->add_option("--lr", tf.lr)->capture_default_str();
    x->add_option("--hidden", tf.hidden, "Hidden width of a new head")->capture_default_str();
    x->add_option("--seed", tf.seed, "Random seed")->capture_default_str();
    add_out(x);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::validation);
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("lobench"));
    spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (out.empty()) out = default_out(name);
        if (name == "generate") print_files(cmd_generate(gen, out));
        else if (name == "build") print_files(cmd_build(build, out));
        else if (name == "preprocess") print_files(cmd_preprocess(pre, out));
        else if (name == "train") print_files(cmd_train(tr, out));
        else if (name == "evaluate") print_files(cmd_evaluate(ev, out));
        else if (name == "transfer") print_files(cmd_transfer(tf, out));
        return 0;
    } catch (const Error& err) {
        spdlog::error("{}", err.what());
        return err.exit_code();
    } catch (const fs::filesystem_error& err) {
        spdlog::error("{}", err.what());
        return static_cast<int>(ErrorKind::io);
    }
}
