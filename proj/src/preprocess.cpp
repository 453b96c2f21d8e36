#include "lobench/preprocess.hpp"

#include "lobench/error.hpp"
#include "lobench/text_format.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace lobench {

std::string to_string(NormScheme s) { return s == NormScheme::global ? "global" : "feature-wise"; }

NormScheme parse_norm_scheme(const std::string& s) {
    if (s == "global") return NormScheme::global;
    if (s == "feature-wise" || s == "feature") return NormScheme::feature_wise;
    throw ValidationError("unknown normalization scheme '" + s + "'");
}

std::pair<Vector, Vector> NormStats::column_params() const {
    if (scheme == NormScheme::feature_wise) return {mean, stddev};
    Vector mu(columns()), sd(columns());
    for (int c = 0; c < columns(); ++c) {
        const bool price = layout::is_price(levels, c);
        mu[c] = price ? price_mean : volume_mean;
        sd[c] = price ? price_std : volume_std;
    }
    return {mu, sd};
}

std::string NormStats::to_text() const {
    KeyValueWriter w;
    w.put("scheme", to_string(scheme));
    w.put("scope", scope);
    w.put("levels", levels);
    w.put("epsilon", epsilon);
    if (scheme == NormScheme::feature_wise) {
        w.put("mean", std::span<const double>(mean.data(), mean.size()));
        w.put("std", std::span<const double>(stddev.data(), stddev.size()));
    } else {
        w.put("price_mean", price_mean);
        w.put("price_std", price_std);
        w.put("volume_mean", volume_mean);
        w.put("volume_std", volume_std);
    }
    return w.str();
}

NormStats NormStats::from_text(const std::string& text) {
    const KeyValueReader r(text, "norm stats");
    NormStats s;
    s.scheme = parse_norm_scheme(r.get("scheme"));
    s.scope = r.get("scope");
    s.levels = r.get_int("levels");
    s.epsilon = r.get_double("epsilon");
    if (s.scheme == NormScheme::feature_wise) {
        const auto mu = r.get_doubles("mean");
        const auto sd = r.get_doubles("std");
        if (static_cast<int>(mu.size()) != s.columns() || static_cast<int>(sd.size()) != s.columns())
            throw ValidationError("norm stats: feature vectors must have " + std::to_string(s.columns()) + " entries");
        s.mean = Eigen::Map<const Vector>(mu.data(), mu.size());
        s.stddev = Eigen::Map<const Vector>(sd.data(), sd.size());
    } else {
        s.price_mean = r.get_double("price_mean");
        s.price_std = r.get_double("price_std");
        s.volume_mean = r.get_double("volume_mean");
        s.volume_std = r.get_double("volume_std");
    }
    return s;
}

namespace {

int levels_of(const RowMatrix& data) {
    if (data.cols() == 0 || data.cols() % 4 != 0)
        throw ValidationError("expected a multiple of 4 columns, got " + std::to_string(data.cols()));
    return static_cast<int>(data.cols() / 4);
}

}  // namespace

NormStats fit_feature_stats(const RowMatrix& data, double epsilon, std::string scope) {
    if (data.rows() < 2) throw ValidationError("fit_feature_stats: need at least 2 rows");
    NormStats s;
    s.scheme = NormScheme::feature_wise;
    s.levels = levels_of(data);
    s.epsilon = epsilon;
    s.scope = std::move(scope);
    s.mean = data.colwise().mean().transpose();
    s.stddev.resize(data.cols());
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
        const double var = (data.col(c).array() - s.mean[c]).square().mean();
        s.stddev[c] = std::max(std::sqrt(var), epsilon);
    }
    return s;
}

NormStats fit_group_stats(const RowMatrix& data, double epsilon, std::string scope) {
    if (data.rows() < 1) throw ValidationError("fit_group_stats: empty input");
    NormStats s;
    s.scheme = NormScheme::global;
    s.levels = levels_of(data);
    s.epsilon = epsilon;
    s.scope = std::move(scope);

    std::array<double, 2> sum{}, count{};
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            const int g = layout::is_price(s.levels, static_cast<int>(c)) ? 0 : 1;
            sum[g] += data(r, c);
            count[g] += 1;
        }
    const std::array<double, 2> mu{sum[0] / count[0], sum[1] / count[1]};
    std::array<double, 2> sq{};
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            const int g = layout::is_price(s.levels, static_cast<int>(c)) ? 0 : 1;
            const double d = data(r, c) - mu[g];
            sq[g] += d * d;
        }
    s.price_mean = mu[0];
    s.volume_mean = mu[1];
    s.price_std = std::max(std::sqrt(sq[0] / count[0]), epsilon);
    s.volume_std = std::max(std::sqrt(sq[1] / count[1]), epsilon);
    return s;
}

NormStats fit_stats(const RowMatrix& data, NormScheme scheme, double epsilon, std::string scope) {
    return scheme == NormScheme::global ? fit_group_stats(data, epsilon, std::move(scope))
                                        : fit_feature_stats(data, epsilon, std::move(scope));
}

RowMatrix normalize(const RowMatrix& data, const NormStats& stats) {
    if (data.cols() != stats.columns())
        throw ValidationError("normalize: data has " + std::to_string(data.cols()) + " columns, stats expect " +
                              std::to_string(stats.columns()));
    const auto [mu, sd] = stats.column_params();
    return ((data.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array()).matrix();
}

RowMatrix denormalize(const RowMatrix& data, const NormStats& stats) {
    if (data.cols() != stats.columns())
        throw ValidationError("denormalize: data has " + std::to_string(data.cols()) + " columns, stats expect " +
                              std::to_string(stats.columns()));
    const auto [mu, sd] = stats.column_params();
    return ((data.array().rowwise() * sd.transpose().array()).matrix().rowwise() + mu.transpose());
}

Window normalize(const Window& w, const NormStats& stats) {
    Window out = w;
    out.data = normalize(w.data, stats);
    return out;
}

Window denormalize(const Window& w, const NormStats& stats) {
    Window out = w;
    out.data = denormalize(w.data, stats);
    return out;
}

std::pair<RowMatrix, std::vector<NormStats>> normalize_each_row(const RowMatrix& data, double epsilon) {
    RowMatrix out(data.rows(), data.cols());
    std::vector<NormStats> stats;
    stats.reserve(data.rows());
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        RowMatrix row = data.row(r);
        stats.push_back(fit_group_stats(row, epsilon, "snapshot"));
        out.row(r) = normalize(row, stats.back());
    }
    return {out, stats};
}

RowMatrix to_matrix(std::span<const Snapshot> snapshots) {
    if (snapshots.empty()) return {};
    const int l = snapshots.front().depth();
    RowMatrix m(snapshots.size(), 4 * l);
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        if (snapshots[i].depth() != l) throw ValidationError("to_matrix: snapshots of mixed depth");
        m.row(i) = flatten(snapshots[i]).transpose();
    }
    return m;
}

std::size_t train_size(std::size_t n) { return (4 * n + 4) / 5; }

std::pair<DaySeries, DaySeries> split_train_test(const DaySeries& series) {
    const std::size_t cut = train_size(series.size());
    DaySeries train{series.instrument, series.day, series.levels, {}};
    DaySeries test = train;
    train.snapshots.assign(series.snapshots.begin(), series.snapshots.begin() + cut);
    test.snapshots.assign(series.snapshots.begin() + cut, series.snapshots.end());
    return {train, test};
}

std::vector<Window> make_windows(const RowMatrix& series, int steps, int stride, WindowOrigin origin) {
    if (steps < 1 || stride < 1) throw ValidationError("make_windows: window length and stride must be positive");
    std::vector<Window> out;
    const auto n = series.rows();
    if (n < steps) {
        spdlog::warn("make_windows: series of {} snapshots is shorter than the window length {}", n, steps);
        return out;
    }
    out.reserve((n - steps) / stride + 1);
    for (Eigen::Index s = 0; s + steps <= n; s += stride) {
        Window w;
        w.data = series.middleRows(s, steps);
        w.origin = origin;
        w.origin.start = origin.start + static_cast<int>(s);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Window> make_session_windows(const DaySeries& series, const RowMatrix& data, Timestamp period, int steps,
                                         int stride, int index_offset) {
    if (data.rows() != static_cast<Eigen::Index>(series.size()))
        throw ValidationError("make_session_windows: data rows do not match the series");
    std::vector<Window> out;
    for (const auto& [first, len] : contiguous_blocks(series.snapshots, period)) {
        WindowOrigin origin{series.instrument, series.day, index_offset + static_cast<int>(first)};
        auto block = make_windows(data.middleRows(first, len), steps, stride, origin);
        std::move(block.begin(), block.end(), std::back_inserter(out));
    }
    return out;
}

void LabelConfig::validate() const {
    if (horizon < 1) throw ValidationError("label horizon must be >= 1");
    if (!(delta >= 0)) throw ValidationError("label threshold must be >= 0");
}

Trend label_trend(std::span<const double> mids, std::size_t t, const LabelConfig& cfg) {
    cfg.validate();
    if (t + cfg.horizon >= mids.size())
        throw ValidationError("label_trend: index " + std::to_string(t) + " lacks " + std::to_string(cfg.horizon) +
                              " snapshots of lookahead");
    double sum = 0;
    for (int k = 1; k <= cfg.horizon; ++k) sum += mids[t + k];
    const double avg = sum / cfg.horizon;
    const double m = mids[t];
    // rounding slack, so a mean sitting exactly on a threshold stays steady
    const double slack = 1e-12 * std::fabs(m);
    if (avg - (1.0 + cfg.delta) * m > slack) return Trend::up;
    if ((1.0 - cfg.delta) * m - avg > slack) return Trend::down;
    return Trend::steady;
}

Trend label_trend(std::span<const Snapshot> series, std::size_t t, const LabelConfig& cfg) {
    if (t + cfg.horizon >= series.size())
        throw ValidationError("label_trend: index " + std::to_string(t) + " lacks lookahead");
    std::vector<double> mids;
    mids.reserve(cfg.horizon + 1);
    for (std::size_t i = t; i <= t + cfg.horizon; ++i) mids.push_back(mid_price(series[i]));
    return label_trend(mids, 0, cfg);
}

std::vector<Window> label_session_windows(std::vector<Window> windows, const DaySeries& series, Timestamp period,
                                          const LabelConfig& cfg, int index_offset) {
    cfg.validate();
    std::vector<double> mids(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) mids[i] = mid_price(series.snapshots[i]);
    // end of the contiguous block containing each index
    std::vector<std::size_t> block_end(series.size());
    for (const auto& [first, len] : contiguous_blocks(series.snapshots, period))
        for (std::size_t i = first; i < first + len; ++i) block_end[i] = first + len;

    std::vector<Window> out;
    out.reserve(windows.size());
    for (auto& w : windows) {
        const long local = static_cast<long>(w.origin.start) - index_offset;
        if (local < 0 || local + w.data.rows() > static_cast<long>(series.size()))
            throw ValidationError("label_session_windows: window start " + std::to_string(w.origin.start) +
                                  " lies outside the series");
        const auto t = static_cast<std::size_t>(local + w.data.rows() - 1);
        if (t + cfg.horizon >= block_end[t]) continue;
        w.label = label_trend(mids, t, cfg);
        out.push_back(std::move(w));
    }
    return out;
}

namespace {
const char* class_name(int c) {
    static constexpr const char* names[] = {"down (-1)", "steady (0)", "up (+1)"};
    return names[c];
}
}  // namespace

std::vector<Window> balance_classes(const std::vector<Window>& windows, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 3> by_class;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!windows[i].label) throw ValidationError("balance_classes: window " + std::to_string(i) + " is unlabeled");
        by_class[class_index(*windows[i].label)].push_back(i);
    }
    std::size_t minority = windows.size();
    for (int c = 0; c < 3; ++c) {
        if (by_class[c].empty()) throw ValidationError(std::string("balance_classes: class ") + class_name(c) + " is empty");
        minority = std::min(minority, by_class[c].size());
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> keep;
    keep.reserve(3 * minority);
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
    }
    std::sort(keep.begin(), keep.end());
    std::vector<Window> out;
    out.reserve(keep.size());
    for (auto i : keep) out.push_back(windows[i]);
    return out;
}

Window mask_for_imputation(const Window& w, double ratio, std::uint64_t seed) {
    if (!(ratio > 0 && ratio < 1)) throw ValidationError("mask ratio must lie in (0, 1)");
    const int t = w.steps();
    const int k = std::max(1, static_cast<int>(std::floor(ratio * t)));
    std::vector<int> rows(t);
    std::iota(rows.begin(), rows.end(), 0);
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, t - 1);
        std::swap(rows[i], rows[pick(rng)]);
    }
    Window out = w;
    out.mask.assign(rows.begin(), rows.begin() + k);
    std::sort(out.mask.begin(), out.mask.end());
    return out;
}

RowMatrix masked_input(const Window& w) {
    RowMatrix x = w.data;
    for (int r : w.mask) {
        if (r < 0 || r >= w.steps()) throw ValidationError("mask index " + std::to_string(r) + " out of range");
        x.row(r).setZero();
    }
    return x;
}

}  // namespace lobench
