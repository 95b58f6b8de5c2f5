#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rgpd/data/data.hpp"
#include "rgpd/rl/q_agents.hpp"
#include "rgpd/train/metrics.hpp"
#include "rgpd/train/model.hpp"

namespace rgpd {

enum class DataSource { synthetic, cmapss };

struct DataConfig {
    DataSource source = DataSource::synthetic;
    SynthConfig synth;
    std::filesystem::path cmapss_dir;
    std::string subset = "FD001";
    std::vector<std::string> channels;  // empty: every sensor channel
    std::vector<std::string> drop;
    bool drop_constant = true;
    std::vector<std::size_t> window_sizes{20, 30, 40};
    std::size_t stride = 1;
    std::size_t valid_stride = 5;
    double rul_cap = 125.0;
    double train_fraction = 0.6;  // synthetic: train/valid/test by unit
    double valid_fraction = 0.2;  // cmapss: share of training units held out
    double truncate_low = 0.3;
    double truncate_high = 0.9;
    std::uint64_t split_seed = 7;
};

struct UnitWindows {
    int unit = 0;
    double truth = 0.0;  // label units (cycles or SOH)
    std::vector<SensorWindow> windows;  // the final window of each size
};

struct PreparedData {
    std::vector<SensorWindow> train, valid;
    std::vector<UnitWindows> test;
    Normalizer normalizer;
    std::vector<std::string> channels;
    double t_max = 1.0;
    double label_scale = 1.0;  // model targets are labels / label_scale
    TargetKind target = TargetKind::rul;
    std::vector<std::size_t> window_sizes;
};

UnitSplit load_units(const DataConfig& config, std::ostream* warnings = nullptr);
PreparedData prepare_data(const UnitSplit& split, const DataConfig& config);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::size_t lr_step = 20;
    double lr_decay = 0.5;
    std::size_t accumulate = 1;
    double clip_norm = 0.0;
    bool use_mixup = true;
    double mixup_alpha = 0.2;
    double w_pde = 1.0;
    std::uint64_t seed = 7;
    ScoreConvention score = ScoreConvention::paper;
    QAgentConfig q;
};

struct EpochSummary {
    std::size_t epoch = 0;
    double loss = 0.0;
    double sup_loss = 0.0;
    double pde_loss = 0.0;
    double valid_rmse = 0.0;
    PhysicsState physics{};
    PhysicsWeights weights;
};

struct UnitPrediction {
    int unit;
    double truth;
    double prediction;
};

struct EvalReport {
    TargetKind target = TargetKind::rul;
    ScoreConvention convention = ScoreConvention::paper;
    std::vector<UnitPrediction> predictions;
    Metrics metrics;
    std::vector<WeightRecord> weights;
    std::vector<ActionRecord> actions;
};

struct TrainResult {
    ModelState model;
    AgentBank bank;
    EvalReport report;
    std::vector<EpochSummary> history;
    std::size_t best_epoch = 0;
    bool diverged = false;
    std::string message;
};

using EpochCallback = std::function<void(const EpochSummary&, const ModelState&)>;

// lambda * MSE(pred, y_a) + (1 - lambda) * MSE(pred, y_b).
Tensor mixup_criterion(const Tensor& pred, std::span<const double> y_a, std::span<const double> y_b, double lambda);

ModelState init_model(const ModelConfig& config, const PreparedData& data, std::uint64_t seed);
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const PreparedData& data,
                  const EpochCallback& on_epoch = {});

Metrics compute_metrics(const std::vector<UnitPrediction>& predictions, TargetKind target, ScoreConvention convention);
// One prediction per test unit: the mean over its final windows, deterministic policy.
EvalReport evaluate(const ModelState& model, const PreparedData& data, ScoreConvention convention);
// Mean last-step prediction error (label units) over windows.
double window_rmse(const ModelState& model, const std::vector<SensorWindow>& windows, const PreparedData& data);
// Mean monotonicity penalty of the predicted sequences on the test units' final windows.
double test_monotonicity(const ModelState& model, const PreparedData& data);

void write_predictions_csv(std::ostream& out, const EvalReport& report);
void write_metrics_json(std::ostream& out, const EvalReport& report);
void write_physics_csv(std::ostream& out, const std::vector<EpochSummary>& history);

}  // namespace rgpd
