#include "rgpd/train/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "rgpd/autodiff/tensor.hpp"

namespace rgpd {

namespace {

void check(std::span<const double> pred, std::span<const double> truth) {
    if (pred.empty()) throw std::invalid_argument("metrics need at least one sample");
    if (pred.size() != truth.size()) throw DimensionError("prediction and target counts differ");
}

}  // namespace

ScoreConvention parse_score_convention(const std::string& name) {
    if (name == "paper") return ScoreConvention::paper;
    if (name == "classic") return ScoreConvention::classic;
    throw std::invalid_argument("unknown score convention '" + name + "'");
}

std::string to_string(ScoreConvention c) { return c == ScoreConvention::paper ? "paper" : "classic"; }

double metric_mae(std::span<const double> pred, std::span<const double> truth) {
    check(pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

double metric_rmse(std::span<const double> pred, std::span<const double> truth) {
    check(pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(s / static_cast<double>(pred.size()));
}

double metric_mape(std::span<const double> pred, std::span<const double> truth) {
    check(pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i] == 0.0) throw std::domain_error("MAPE undefined for a zero target");
        s += std::abs((truth[i] - pred[i]) / truth[i]);
    }
    return 100.0 * s / static_cast<double>(pred.size());
}

double metric_phm_score(std::span<const double> pred, std::span<const double> truth, ScoreConvention convention) {
    check(pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = convention == ScoreConvention::paper ? truth[i] - pred[i] : pred[i] - truth[i];
        s += e < 0 ? std::exp(-e / 13.0) - 1.0 : std::exp(e / 10.0) - 1.0;
    }
    return s;
}

}  // namespace rgpd
