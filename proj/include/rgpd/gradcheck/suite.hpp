#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rgpd/autodiff/op_checks.hpp"

namespace rgpd {

// Probes for the composite layers: GCN, GAT, GCRN step, TAU, MHSA,
// DynamicsNet, physics loss and both SAC losses.
std::vector<GradProbe> layer_probes();
// Every op probe followed by every layer probe.
std::vector<GradProbe> all_probes();

struct GradSuiteOptions {
    std::uint64_t seed = 0;  // first seed; probes run seeds [seed, seed + seeds)
    std::size_t seeds = 100;
    double threshold = 1e-4;
    // Probe whose analytic gradients are deliberately doubled (negative test).
    std::optional<std::string> inject_bug;
};

struct ProbeResult {
    std::string name;
    double max_error = 0.0;
    std::uint64_t worst_seed = 0;
    bool passed = false;
};

// Throws std::invalid_argument when inject_bug names no probe.
std::vector<ProbeResult> run_grad_suite(const GradSuiteOptions& options);
void print_grad_table(std::ostream& out, const std::vector<ProbeResult>& results, double threshold);

}  // namespace rgpd
