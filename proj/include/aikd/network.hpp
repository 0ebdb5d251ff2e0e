#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "aikd/errors.hpp"

namespace aikd {

// Fully connected embedding backbone plus quality-regression head, operating
// on flattened crops. Hidden layers are rectified, the embedding output is
// linear and the scalar quality output is logistic.
struct ArchitectureSpec {
    int input_width = 32;
    int input_height = 32;
    int input_channels = 1;
    std::vector<int> backbone_widths{256, 128, 64};  // last entry = embedding dim
    std::vector<int> head_widths{32, 1};             // last entry must be 1

    int input_size() const { return input_width * input_height * input_channels; }
    int embedding_dim() const { return backbone_widths.back(); }
    std::size_t layer_count() const { return backbone_widths.size() + head_widths.size(); }

    void validate() const;
    bool operator==(const ArchitectureSpec&) const = default;
};

struct ModelParams {
    ArchitectureSpec arch;
    std::vector<Eigen::MatrixXd> weights;  // backbone layers then head layers
    std::vector<Eigen::VectorXd> biases;
    bool frozen = false;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Per-layer inputs and pre-activations retained by forward() for backward().
struct ForwardTape {
    std::vector<Eigen::VectorXd> inputs;    // inputs[l] = activation entering layer l
    std::vector<Eigen::VectorXd> preacts;   // preacts[l] = W_l * inputs[l] + b_l
    double quality = 0.0;
};

struct ForwardResult {
    Eigen::VectorXd embedding;
    double quality = 0.0;  // logistic output, in (0,1)
    ForwardTape tape;
};

// Weights drawn uniformly on [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
ModelParams init_params(const ArchitectureSpec& spec, std::uint64_t seed);

ForwardResult forward(const ModelParams& model, const Eigen::VectorXd& input);

// Backbone only; what a frozen teacher contributes.
Eigen::VectorXd embed(const ModelParams& model, const Eigen::VectorXd& input);

// Exact gradient of any scalar loss whose partials w.r.t. the embedding and
// the quality output are supplied.
Gradients backward(const ModelParams& model, const ForwardTape& tape,
                   const Eigen::VectorXd& dloss_dembedding, double dloss_dquality);

// Central-difference verification. Returns the maximum over all parameters of
//   |g_analytic - g_fd| / max(1e-8, |g_analytic| + |g_fd|).
double grad_check(const ModelParams& model,
                  const std::function<double(const ModelParams&)>& loss,
                  const Gradients& analytic, double eps = 1e-5);

// True when no rectifier pre-activation sits within `margin` of its kink, so
// a central difference of width ~eps stays on one smooth branch. Draws that
// fail this are not valid grad_check inputs (the loss is not differentiable
// across the probe interval).
bool finite_difference_safe(const ModelParams& model, const ForwardTape& tape,
                            double margin = 1e-3);

void sgd_step(ModelParams& model, const Gradients& grads, double lr);

// Running arithmetic mean of parameter snapshots.
struct SwaState {
    ArchitectureSpec arch;
    std::vector<Eigen::MatrixXd> avg_weights;
    std::vector<Eigen::VectorXd> avg_biases;
    std::size_t count = 0;
};

void swa_update(SwaState& state, const ModelParams& model);
ModelParams swa_finalize(const SwaState& state);

// Zero-initialized gradient buffers matching the model's shapes.
Gradients zero_gradients(const ModelParams& model);
void accumulate(Gradients& into, const Gradients& g, double weight = 1.0);
void scale(Gradients& g, double factor);

}  // namespace aikd
