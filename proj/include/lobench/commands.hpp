#pragma once

#include "lobench/io.hpp"
#include "lobench/model.hpp"
#include "lobench/preprocess.hpp"
#include "lobench/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Pipeline stages behind the command-line tool. Every stage writes into its own output
// directory, including a config.ini that records the options, the seed and the SHA-256
// of every input file. config.ini uses the option names of the command line, so it can be
// fed back through --config to repeat a run.

namespace lobench {

namespace fs = std::filesystem;

struct GenerateOptions {
    std::string profile = "sz000001";  // built-in name or path to a profile file
    int days = 1;
    int first_day = 0;
    std::uint64_t seed = 1;
};

struct BuildOptions {
    std::vector<fs::path> flows;
    int levels = 10;
    std::string padding = "extrapolate";  // extrapolate | reject
};

struct PreprocessOptions {
    std::vector<fs::path> series;
    std::string scheme = "global";  // global | feature-wise | none
    std::string scope = "train";    // train | snapshot | window
    double epsilon = 1e-8;
    int steps = 100;
    int stride = 1;
    bool labels = true;
    int label_horizon = 5;
    double label_delta = 0.001;
    bool balance = false;    // down-sample the training windows to the minority class
    double mask_ratio = 0;   // > 0 stores fixed imputation masks on the test windows
    std::uint64_t seed = 1;
};

struct TrainOptions {
    fs::path data;  // preprocess output directory
    std::string task = "reconstruction";
    int epochs = 100;
    int batch_size = 64;
    double lr = 1e-3;
    int latent = 256;
    int hidden = 256;  // prediction head
    std::string activation = "identity";
    double alpha = 0.5;
    double lambda = 1.0;
    std::string weights = "level-decay";  // level-decay | uniform
    double mask_ratio = 0.2;
    double clip = 0;
    std::uint64_t max_steps = 0;  // 0 = no limit
    std::uint64_t seed = 1;
};

struct EvaluateOptions {
    fs::path data;
    std::string split = "test";  // test | train
    fs::path checkpoint;
    fs::path delta;  // optional head delta applied on top of the checkpoint
    std::uint64_t seed = 1;
};

struct TransferOptions {
    fs::path checkpoint;
    fs::path data;  // target dataset directory
    std::uint64_t budget = 100;
    int batch_size = 64;
    double lr = 1e-3;
    int hidden = 256;
    std::uint64_t seed = 1;
};

// Each returns the files it wrote, config.ini last.
std::vector<fs::path> cmd_generate(const GenerateOptions& opt, const fs::path& out);
std::vector<fs::path> cmd_build(const BuildOptions& opt, const fs::path& out);
std::vector<fs::path> cmd_preprocess(const PreprocessOptions& opt, const fs::path& out);
std::vector<fs::path> cmd_train(const TrainOptions& opt, const fs::path& out);
std::vector<fs::path> cmd_evaluate(const EvaluateOptions& opt, const fs::path& out);
std::vector<fs::path> cmd_transfer(const TransferOptions& opt, const fs::path& out);

// Sidecar describing a preprocess output directory.
struct DatasetInfo {
    bool normalized = false;
    std::string scheme;
    std::string scope;
    int steps = 100;
    int columns = 40;
    int stride = 1;
    bool labeled = false;
    bool balanced = false;
    LabelConfig label;
    double mask_ratio = 0;
    std::size_t train_windows = 0;
    std::size_t test_windows = 0;

    std::string to_text() const;
    static DatasetInfo from_text(const std::string& text);
};

// Loads <dir>/dataset.ini and the requested split, checking that the stages a consumer
// needs have run. Errors name the missing stage.
struct LoadedDataset {
    DatasetInfo info;
    Dataset data;
    fs::path file;
};
LoadedDataset load_dataset(const fs::path& dir, const std::string& split, bool need_normalized, bool need_labels);

// Network plus optimizer state from a checkpoint file, optionally with a head delta applied.
struct LoadedModel {
    Network net;
    AdamState adam;
    Checkpoint checkpoint;
    std::string digest;
};
LoadedModel load_model(const fs::path& checkpoint, const fs::path& delta = {});

// Evaluation of a network on windows; shared by the evaluate command and the tests.
// With `stats`, reconstruction reports also carry l_reg of the denormalized predictions.
MetricsReport evaluate_network(const Network& net, TaskKind task, const std::vector<Window>& windows,
                               const LossConfig& loss, double mask_ratio, std::uint64_t seed,
                               const NormStats* stats = nullptr);

}  // namespace lobench
