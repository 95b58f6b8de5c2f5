#pragma once

#include <random>
#include <string>
#include <vector>

#include "rgpd/autodiff/tensor.hpp"

namespace rgpd {

using Rng = std::mt19937_64;

struct NamedParam {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

std::size_t param_count(const ParamList& params);
std::vector<Tensor> tensors_of(const ParamList& params);
// Copies values from `src` into the leaves of `dst`; names and shapes must agree.
void copy_param_values(const ParamList& src, ParamList& dst);

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

enum class Activation { none, relu, tanh, elu };
Tensor activate(const Tensor& x, Activation act);

struct Linear {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out

    static Linear xavier(std::size_t in, std::size_t out, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// Fully connected stack; `act` between layers, none after the last.
struct Mlp {
    std::vector<Linear> layers;
    Activation act = Activation::tanh;

    static Mlp make(const std::vector<std::size_t>& widths, Activation act, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.0;  // 0 disables global-norm clipping
};

class Adam {
   public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    // Applies one update from the current gradients, scaled by grad_scale.
    void step(double grad_scale = 1.0);
    void zero_grad();
    void set_lr(double lr) { config_.lr = lr; }
    double lr() const { return config_.lr; }

   private:
    std::vector<Tensor> params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace rgpd
