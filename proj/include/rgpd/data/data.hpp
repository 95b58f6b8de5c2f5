#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rgpd/nn/nn.hpp"

namespace rgpd {

class ParseError : public std::runtime_error {
   public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

   private:
    std::size_t line_;
};

enum class TargetKind { rul, soh };

inline constexpr double kSohFailure = 0.8;

struct UnitTrajectory {
    int unit = 0;
    std::vector<int> cycles;
    std::vector<std::string> channels;
    std::vector<double> values;  // cycles x channels, row major
    bool failed = true;          // run to failure; otherwise truncated
    double end_rul = 0.0;        // RUL at the last recorded cycle
    std::vector<double> soh;     // per-cycle state of health, SOH data only

    std::size_t length() const { return cycles.size(); }
    std::size_t num_channels() const { return channels.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * channels.size() + col]; }
};

// The 26-column layout: unit, cycle, setting1..3, s1..s21.
const std::vector<std::string>& cmapss_channel_names();
std::vector<std::string> cmapss_sensor_names();

std::vector<UnitTrajectory> load_cmapss(const std::filesystem::path& path, std::ostream* warnings = nullptr);
// One RUL per line, in unit order; assigned as end_rul of the matching unit.
void attach_rul_file(std::vector<UnitTrajectory>& units, const std::filesystem::path& path);
void write_cmapss(std::ostream& out, const std::vector<UnitTrajectory>& units);

std::vector<UnitTrajectory> select_channels(const std::vector<UnitTrajectory>& units,
                                            const std::vector<std::string>& keep);
// Channels whose standard deviation over every row of `units` is below tol.
std::vector<std::string> constant_channels(const std::vector<UnitTrajectory>& units, double tol = 1e-8);

std::vector<double> label_rul(const UnitTrajectory& traj, double cap = std::numeric_limits<double>::infinity());

struct SensorWindow {
    std::size_t length = 0;
    std::size_t channels = 0;
    std::vector<double> x;  // length x channels
    std::vector<double> t;  // cycle / T_max
    double y = 0.0;
    bool broken = false;
    bool padded = false;
    int unit = 0;
    int end_cycle = 0;
};

struct WindowOptions {
    std::vector<std::size_t> sizes{20, 30, 40};
    std::size_t stride = 1;
    double t_max = 1.0;
    TargetKind target = TargetKind::rul;
};

bool is_broken(double label, TargetKind kind);

// Sliding windows of every size; a trajectory shorter than a size yields one window
// left-padded with copies of its first row.
std::vector<SensorWindow> make_windows(const UnitTrajectory& traj, const std::vector<double>& labels,
                                       const WindowOptions& options);
// The window of one size ending at the last recorded cycle.
SensorWindow final_window(const UnitTrajectory& traj, const std::vector<double>& labels, std::size_t size,
                          const WindowOptions& options);

// Per-unit windowing fanned out over at most RGPD_THREADS worker threads.
std::vector<SensorWindow> make_windows_all(const std::vector<UnitTrajectory>& units,
                                           const std::vector<std::vector<double>>& labels,
                                           const WindowOptions& options);
std::size_t worker_threads();

class Normalizer {
   public:
    void fit(const std::vector<SensorWindow>& windows);
    void set(std::vector<double> mean, std::vector<double> stddev);
    bool fitted() const { return !mean_.empty(); }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return std_; }

    void apply(SensorWindow& w) const;
    void apply(std::vector<SensorWindow>& ws) const;
    std::vector<double> denormalize(const SensorWindow& w) const;

   private:
    void check(const SensorWindow& w) const;
    std::vector<double> mean_, std_;
};

inline constexpr double kMinStd = 1e-8;

double sample_beta(double alpha, Rng& rng);

struct MixedPair {
    std::vector<double> x;
    double y;
    double lambda;
};

MixedPair mixup(const std::vector<double>& x_i, double y_i, const std::vector<double>& x_j, double y_j, double lambda);
MixedPair mixup(const std::vector<double>& x_i, double y_i, const std::vector<double>& x_j, double y_j, double alpha,
                Rng& rng);

struct SynthConfig {
    std::size_t units = 50;
    std::size_t min_length = 120;
    std::size_t max_length = 220;
    std::size_t channels = 14;
    double noise = 0.05;
    std::uint64_t seed = 7;
    TargetKind target = TargetKind::rul;
};

// Run-to-failure units: health h(t) = 1 before a random knee, then falls to 0 at end
// of life along a random power curve; each channel is an affine map of h plus noise.
std::vector<UnitTrajectory> synth_degradation(const SynthConfig& config);

struct UnitSplit {
    std::vector<UnitTrajectory> train, valid, test;
};

// Shuffles units with `seed` and cuts train/valid/test by the given fractions.
UnitSplit split_units(std::vector<UnitTrajectory> units, double train_fraction, double valid_fraction,
                      std::uint64_t seed);
// Cuts each unit at a uniform fraction of its life in [lo, hi]; the removed tail becomes end_rul.
void truncate_units(std::vector<UnitTrajectory>& units, double lo, double hi, Rng& rng);

void write_windows_csv(std::ostream& out, const std::vector<SensorWindow>& windows);

}  // namespace rgpd
