#pragma once

#include "lobench/pipeline.hpp"
#include "lobench/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lobench {

enum class NormScheme : std::uint8_t { feature_wise, global };

std::string to_string(NormScheme s);
NormScheme parse_norm_scheme(const std::string& s);

// Fitted z-score parameters. Feature-wise stats hold one (mean, std) per column; global
// stats hold one pair for all price columns and one for all volume columns.
struct NormStats {
    NormScheme scheme = NormScheme::global;
    int levels = 10;
    double epsilon = 1e-8;
    std::string scope = "train";  // what the stats were fitted on
    Vector mean;                   // feature-wise only
    Vector stddev;                 // feature-wise only
    double price_mean = 0;
    double price_std = 1;
    double volume_mean = 0;
    double volume_std = 1;

    int columns() const { return 4 * levels; }
    // Per-column (mean, std) after expanding the scheme.
    std::pair<Vector, Vector> column_params() const;

    std::string to_text() const;
    static NormStats from_text(const std::string& text);
};

// Population mean/std per column; std floored at epsilon. Requires >= 2 rows.
NormStats fit_feature_stats(const RowMatrix& data, double epsilon = 1e-8, std::string scope = "train");
// Pooled over the price columns and over the volume columns.
NormStats fit_group_stats(const RowMatrix& data, double epsilon = 1e-8, std::string scope = "train");
NormStats fit_stats(const RowMatrix& data, NormScheme scheme, double epsilon = 1e-8, std::string scope = "train");

RowMatrix normalize(const RowMatrix& data, const NormStats& stats);
RowMatrix denormalize(const RowMatrix& data, const NormStats& stats);
Window normalize(const Window& w, const NormStats& stats);
Window denormalize(const Window& w, const NormStats& stats);

// Global scheme fitted independently on each row (the "within one snapshot" reading).
std::pair<RowMatrix, std::vector<NormStats>> normalize_each_row(const RowMatrix& data, double epsilon = 1e-8);

RowMatrix to_matrix(std::span<const Snapshot> snapshots);

// First ceil(0.8 N) snapshots train, the rest test.
std::pair<DaySeries, DaySeries> split_train_test(const DaySeries& series);
std::size_t train_size(std::size_t n);

// Windows starting at 0, step, ... N - T of a contiguous matrix. Empty (with a warning) when N < T.
std::vector<Window> make_windows(const RowMatrix& series, int steps = 100, int stride = 1, WindowOrigin origin = {});

// Windows over each contiguous session block of `series` (never across the lunch break).
// `data` holds the (possibly normalized) rows aligned with series.snapshots.
std::vector<Window> make_session_windows(const DaySeries& series, const RowMatrix& data, Timestamp period,
                                         int steps = 100, int stride = 1, int index_offset = 0);

struct LabelConfig {
    int horizon = 5;
    double delta = 0.001;

    static LabelConfig pipeline_default() { return {5, 0.001}; }
    static LabelConfig prediction_preset() { return {5, 0.0001}; }
    void validate() const;
};

// Trend of the average mid-price over (t, t + horizon] relative to mids[t].
Trend label_trend(std::span<const double> mids, std::size_t t, const LabelConfig& cfg);
Trend label_trend(std::span<const Snapshot> series, std::size_t t, const LabelConfig& cfg);

// Labels each window at its last step from the raw mids of `series`. Windows whose
// lookahead leaves their session block are dropped. Window origins must be offset by
// `index_offset` relative to `series`, as produced by make_session_windows.
std::vector<Window> label_session_windows(std::vector<Window> windows, const DaySeries& series, Timestamp period,
                                          const LabelConfig& cfg, int index_offset = 0);

// Downsamples every class to the minority count. Output keeps input order.
std::vector<Window> balance_classes(const std::vector<Window>& windows, std::uint64_t seed);

// Marks max(1, floor(ratio * T)) distinct rows as masked.
Window mask_for_imputation(const Window& w, double ratio, std::uint64_t seed);
// Model input copy with masked rows zeroed.
RowMatrix masked_input(const Window& w);

}  // namespace lobench
