#pragma once

#include <optional>
#include <span>
#include <string>

namespace rgpd {

// paper: e = y - y_hat, e < 0 -> exp(-e/13) - 1, else exp(e/10) - 1.
// classic: d = y_hat - y, d < 0 -> exp(-d/13) - 1, else exp(d/10) - 1 (late predictions cost more).
enum class ScoreConvention { paper, classic };

ScoreConvention parse_score_convention(const std::string& name);
std::string to_string(ScoreConvention c);

double metric_mae(std::span<const double> pred, std::span<const double> truth);
double metric_rmse(std::span<const double> pred, std::span<const double> truth);
// Percent; throws when any target is zero.
double metric_mape(std::span<const double> pred, std::span<const double> truth);
double metric_phm_score(std::span<const double> pred, std::span<const double> truth,
                        ScoreConvention convention = ScoreConvention::paper);

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    double score = 0.0;
    std::optional<double> mape;
};

}  // namespace rgpd
