#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rgpd {

// A named gradient probe: builds random inputs from `seed` and returns the
// max relative finite-difference error.
struct GradProbe {
    std::string name;
    std::function<double(std::uint64_t seed)> run;
};

// One probe per registered autodiff op.
std::vector<GradProbe> autodiff_op_probes();

}  // namespace rgpd
