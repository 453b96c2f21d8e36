#include "lobench/metrics.hpp"

#include "lobench/error.hpp"
#include "lobench/text_format.hpp"

#include <cmath>

namespace lobench {

namespace {

void require_same_shape(const RowMatrix& x, const RowMatrix& xhat, const char* what) {
    if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
        throw ValidationError(std::string(what) + ": shape mismatch " + std::to_string(x.rows()) + "x" +
                              std::to_string(x.cols()) + " vs " + std::to_string(xhat.rows()) + "x" +
                              std::to_string(xhat.cols()));
}

int levels_of(const RowMatrix& m, const char* what) {
    if (m.cols() == 0 || m.cols() % 4 != 0)
        throw ValidationError(std::string(what) + ": column count must be a positive multiple of 4");
    return static_cast<int>(m.cols() / 4);
}

}  // namespace

void WeightProfile::validate(Eigen::Index columns) const {
    if (weights.size() != columns)
        throw ValidationError("weight profile has " + std::to_string(weights.size()) + " entries, expected " +
                              std::to_string(columns));
    if ((weights.array() < 0).any()) throw ValidationError("weight profile has negative entries");
    if (!(total() > 0)) throw ValidationError("weight profile sums to zero");
}

WeightProfile WeightProfile::level_decay(int levels) {
    WeightProfile p;
    p.weights.resize(4 * levels);
    for (int c = 0; c < 4 * levels; ++c) p.weights[c] = 1.0 / (layout::level_of(levels, c) + 1);
    return p;
}

WeightProfile WeightProfile::uniform(int levels) { return {Vector::Ones(4 * levels)}; }

void LossConfig::validate(Eigen::Index columns) const {
    if (!(alpha >= 0 && alpha <= 1)) throw ValidationError("loss alpha must lie in [0, 1]");
    if (!(lambda >= 0)) throw ValidationError("loss lambda must be >= 0");
    weights.validate(columns);
}

double mse(const RowMatrix& x, const RowMatrix& xhat) {
    require_same_shape(x, xhat, "mse");
    return (x - xhat).squaredNorm() / static_cast<double>(x.size());
}

double mae(const RowMatrix& x, const RowMatrix& xhat) {
    require_same_shape(x, xhat, "mae");
    return (x - xhat).cwiseAbs().sum() / static_cast<double>(x.size());
}

double wmse(const RowMatrix& x, const RowMatrix& xhat, const WeightProfile& p) {
    require_same_shape(x, xhat, "wmse");
    p.validate(x.cols());
    const Vector col_sq = (x - xhat).array().square().colwise().sum().transpose();
    return p.weights.dot(col_sq) / p.total();
}

PriceVolumeLoss price_volume_losses(const RowMatrix& x, const RowMatrix& xhat) {
    require_same_shape(x, xhat, "price_volume_losses");
    const int l = levels_of(x, "price_volume_losses");
    const RowMatrix d = x - xhat;
    const double n = static_cast<double>(x.rows()) * 2 * l;
    PriceVolumeLoss out;
    out.price = (d.middleCols(layout::bid_price(l, 0), l).squaredNorm() +
                 d.middleCols(layout::ask_price(l, 0), l).squaredNorm()) / n;
    out.volume = (d.middleCols(layout::bid_volume(l, 0), l).squaredNorm() +
                  d.middleCols(layout::ask_volume(l, 0), l).squaredNorm()) / n;
    return out;
}

double l_reg(const RowMatrix& xhat) {
    const int l = levels_of(xhat, "l_reg");
    if (xhat.rows() == 0) return 0;
    const auto cols = layout::ascending_price_columns(l);
    const double pairs = static_cast<double>(cols.size() - 1);
    double total = 0;
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
        double row = 0;
        for (std::size_t p = 1; p < cols.size(); ++p) row += std::max(0.0, xhat(r, cols[p - 1]) - xhat(r, cols[p]));
        total += row / pairs;
    }
    return total / static_cast<double>(xhat.rows());
}

double l_all(const RowMatrix& x, const RowMatrix& xhat, const LossConfig& cfg) {
    require_same_shape(x, xhat, "l_all");
    cfg.validate(x.cols());
    return cfg.alpha * mse(x, xhat) + (1 - cfg.alpha) * wmse(x, xhat, cfg.weights) + cfg.lambda * l_reg(xhat);
}

RowMatrix l_all_gradient(const RowMatrix& x, const RowMatrix& xhat, const LossConfig& cfg) {
    require_same_shape(x, xhat, "l_all_gradient");
    cfg.validate(x.cols());
    const int l = levels_of(x, "l_all_gradient");
    const RowMatrix diff = xhat - x;

    // alpha * 2 e / (T C)  +  (1 - alpha) * 2 w_j e / W
    const Eigen::RowVectorXd col_scale =
        (Eigen::RowVectorXd::Constant(x.cols(), 2.0 * cfg.alpha / static_cast<double>(x.size())) +
         (2.0 * (1 - cfg.alpha) / cfg.weights.total()) * cfg.weights.weights.transpose());
    RowMatrix grad = diff.array().rowwise() * col_scale.array();

    if (cfg.lambda != 0 && x.rows() > 0) {
        const auto cols = layout::ascending_price_columns(l);
        const double coef = cfg.lambda / (static_cast<double>(cols.size() - 1) * static_cast<double>(x.rows()));
        for (Eigen::Index r = 0; r < xhat.rows(); ++r)
            for (std::size_t p = 1; p < cols.size(); ++p)
                if (xhat(r, cols[p - 1]) - xhat(r, cols[p]) > 0) {
                    grad(r, cols[p - 1]) += coef;
                    grad(r, cols[p]) -= coef;
                }
    }
    return grad;
}

double cross_entropy(const Eigen::Vector3d& logits, Trend label) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits[class_index(label)];
}

Eigen::Vector3d cross_entropy_gradient(const Eigen::Vector3d& logits, Trend label) {
    const double m = logits.maxCoeff();
    Eigen::Vector3d p = (logits.array() - m).exp();
    p /= p.sum();
    p[class_index(label)] -= 1.0;
    return p;
}

double masked_mse(const RowMatrix& x, const RowMatrix& xhat, std::span<const int> mask) {
    require_same_shape(x, xhat, "masked_mse");
    if (mask.empty()) throw ValidationError("masked_mse: empty mask");
    double total = 0;
    for (int r : mask) {
        if (r < 0 || r >= x.rows()) throw ValidationError("masked_mse: mask index out of range");
        total += (x.row(r) - xhat.row(r)).squaredNorm() / static_cast<double>(x.cols());
    }
    return total / static_cast<double>(mask.size());
}

RowMatrix masked_mse_gradient(const RowMatrix& x, const RowMatrix& xhat, std::span<const int> mask) {
    require_same_shape(x, xhat, "masked_mse_gradient");
    if (mask.empty()) throw ValidationError("masked_mse_gradient: empty mask");
    RowMatrix grad = RowMatrix::Zero(x.rows(), x.cols());
    const double scale = 2.0 / (static_cast<double>(mask.size()) * static_cast<double>(x.cols()));
    for (int r : mask) {
        if (r < 0 || r >= x.rows()) throw ValidationError("masked_mse_gradient: mask index out of range");
        grad.row(r) += scale * (xhat.row(r) - x.row(r));
    }
    return grad;
}

std::string MetricsReport::to_record() const {
    std::vector<std::pair<std::string, std::string>> f;
    f.emplace_back("samples", std::to_string(samples));
    const auto add = [&](const char* key, const std::optional<double>& v) {
        if (v) f.emplace_back(key, format_double(*v));
    };
    add("mse", mse);
    add("mae", mae);
    add("wmse", wmse);
    add("l_price", l_price);
    add("l_volume", l_volume);
    add("l_reg", l_reg);
    add("l_reg_denorm", l_reg_denorm);
    add("l_all", l_all);
    add("ce", ce);
    add("masked_mse", masked_mse);
    add("accuracy", accuracy);
    add("macro_precision", macro_precision);
    add("macro_recall", macro_recall);
    for (const auto& kv : context) f.push_back(kv);
    return format_record(f);
}

MetricsReport MetricsReport::from_record(const std::string& line) {
    MetricsReport r;
    const auto num = [](const std::string& s) { return KeyValueReader("v=" + s, "metrics record").get_double("v"); };
    for (const auto& [k, v] : parse_record(line)) {
        if (k == "samples") r.samples = static_cast<std::size_t>(num(v));
        else if (k == "mse") r.mse = num(v);
        else if (k == "mae") r.mae = num(v);
        else if (k == "wmse") r.wmse = num(v);
        else if (k == "l_price") r.l_price = num(v);
        else if (k == "l_volume") r.l_volume = num(v);
        else if (k == "l_reg") r.l_reg = num(v);
        else if (k == "l_reg_denorm") r.l_reg_denorm = num(v);
        else if (k == "l_all") r.l_all = num(v);
        else if (k == "ce") r.ce = num(v);
        else if (k == "masked_mse") r.masked_mse = num(v);
        else if (k == "accuracy") r.accuracy = num(v);
        else if (k == "macro_precision") r.macro_precision = num(v);
        else if (k == "macro_recall") r.macro_recall = num(v);
        else r.context.emplace_back(k, v);
    }
    return r;
}

MetricsReport reconstruction_report(std::span<const RowMatrix> truth, std::span<const RowMatrix> predicted,
                                    const LossConfig& cfg) {
    if (truth.size() != predicted.size()) throw ValidationError("reconstruction_report: count mismatch");
    if (truth.empty()) throw ValidationError("reconstruction_report: no samples");
    double s_mse = 0, s_mae = 0, s_wmse = 0, s_p = 0, s_v = 0, s_reg = 0, s_all = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& x = truth[i];
        const auto& y = predicted[i];
        const double m = mse(x, y);
        const double w = wmse(x, y, cfg.weights);
        const double reg = l_reg(y);
        const auto pv = price_volume_losses(x, y);
        s_mse += m;
        s_mae += mae(x, y);
        s_wmse += w;
        s_p += pv.price;
        s_v += pv.volume;
        s_reg += reg;
        s_all += cfg.alpha * m + (1 - cfg.alpha) * w + cfg.lambda * reg;
    }
    const double n = static_cast<double>(truth.size());
    MetricsReport r;
    r.samples = truth.size();
    r.mse = s_mse / n;
    r.mae = s_mae / n;
    r.wmse = s_wmse / n;
    r.l_price = s_p / n;
    r.l_volume = s_v / n;
    r.l_reg = s_reg / n;
    r.l_all = s_all / n;
    r.context = {{"alpha", format_double(cfg.alpha)}, {"lambda", format_double(cfg.lambda)}};
    return r;
}

}  // namespace lobench
