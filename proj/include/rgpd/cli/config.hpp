#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "rgpd/train/train.hpp"

namespace rgpd {

class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
};

// Flat INI: sections [data] [synth] [model] [sac] [train] [q], one key = value
// per line. Unknown sections or keys and malformed values are ConfigErrors.
RunConfig parse_run_config(std::istream& in, const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
// Every key with its current value; parse_run_config reads it back unchanged.
void write_run_config(std::ostream& out, const RunConfig& config);

// Comma list over {rl, mixup, tau}; each entry switches that component off.
void apply_ablations(RunConfig& config, const std::string& list);

}  // namespace rgpd
