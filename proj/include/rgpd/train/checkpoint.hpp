#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgpd/train/train.hpp"

namespace rgpd {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// What a model needs to know about the data it was trained on.
struct DataSignature {
    std::vector<std::string> channels;
    std::vector<double> mean, stddev;
    double t_max = 1.0;
    double label_scale = 1.0;
    TargetKind target = TargetKind::rul;
    std::vector<std::size_t> window_sizes;

    static DataSignature of(const PreparedData& data);
    // Empty when equal, else a description of the first difference.
    std::string mismatch(const DataSignature& other) const;
};

struct RecordedMetrics {
    ScoreConvention convention = ScoreConvention::paper;
    std::size_t units = 0;
    Metrics metrics;
};

struct Checkpoint {
    ModelState model;
    AgentBank bank;
    DataSignature data;
    std::optional<RecordedMetrics> metrics;
};

// JSON document; written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws CheckpointError on unreadable, corrupt or version-mismatched files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rgpd
