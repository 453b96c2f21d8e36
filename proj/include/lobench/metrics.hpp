#pragma once

#include "lobench/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lobench {

// Column weights for wMSE, one per column of the 4l layout.
struct WeightProfile {
    Vector weights;

    double total() const { return weights.sum(); }
    void validate(Eigen::Index columns) const;

    // Every field at level i (1-based) weighted 1/i.
    static WeightProfile level_decay(int levels = 10);
    static WeightProfile uniform(int levels = 10);
};

struct LossConfig {
    double alpha = 0.5;
    double lambda = 1.0;
    WeightProfile weights = WeightProfile::level_decay();

    void validate(Eigen::Index columns) const;
};

double mse(const RowMatrix& x, const RowMatrix& xhat);
double mae(const RowMatrix& x, const RowMatrix& xhat);
// (1/W) sum_j w_j sum_i (x_ij - xhat_ij)^2. The time sum is not divided by T.
double wmse(const RowMatrix& x, const RowMatrix& xhat, const WeightProfile& p);

struct PriceVolumeLoss {
    double price = 0;
    double volume = 0;
};
PriceVolumeLoss price_volume_losses(const RowMatrix& x, const RowMatrix& xhat);

// Hinge penalty on adjacent inversions of the 2l prices taken in their expected
// ascending order (b_p[l..1], a_p[1..l]), scaled by 1/(2l - 1) and averaged over rows.
double l_reg(const RowMatrix& xhat);

double l_all(const RowMatrix& x, const RowMatrix& xhat, const LossConfig& cfg);
// d l_all / d xhat. The hinge subgradient at zero is zero.
RowMatrix l_all_gradient(const RowMatrix& x, const RowMatrix& xhat, const LossConfig& cfg);

// Softmax cross-entropy with logits ordered (down, steady, up).
double cross_entropy(const Eigen::Vector3d& logits, Trend label);
Eigen::Vector3d cross_entropy_gradient(const Eigen::Vector3d& logits, Trend label);

// Mean squared error over the masked rows (all columns of each).
double masked_mse(const RowMatrix& x, const RowMatrix& xhat, std::span<const int> mask);
RowMatrix masked_mse_gradient(const RowMatrix& x, const RowMatrix& xhat, std::span<const int> mask);

// Aggregated evaluation record. Absent metrics are omitted from the serialized line.
struct MetricsReport {
    std::size_t samples = 0;
    std::optional<double> mse, mae, wmse, l_price, l_volume, l_reg, l_all, ce, masked_mse, accuracy;
    std::optional<double> l_reg_denorm;  // l_reg of predictions mapped back to currency units
    std::optional<double> macro_precision, macro_recall;
    std::vector<std::pair<std::string, std::string>> context;  // config that produced the numbers

    std::string to_record() const;
    static MetricsReport from_record(const std::string& line);
};

// Per-window means of every reconstruction metric.
MetricsReport reconstruction_report(std::span<const RowMatrix> truth, std::span<const RowMatrix> predicted,
                                    const LossConfig& cfg);

}  // namespace lobench
