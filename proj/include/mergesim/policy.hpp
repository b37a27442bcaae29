#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mergesim {
class RngStream;

using Vec = std::vector<double>;

struct Mat {
    int rows = 0, cols = 0;
    Vec w;  // row-major

    static Mat zeros(int r, int c) { return {r, c, Vec(static_cast<std::size_t>(r) * c, 0.0)}; }
    double& at(int r, int c) { return w[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return w[static_cast<std::size_t>(r) * cols + c]; }
};

struct Linear {
    Mat W;
    Vec b;
};

// Dense stack: tanh on every layer except the last, which is linear.
struct Mlp {
    std::vector<Linear> layers;

    int input_dim() const { return layers.front().W.cols; }
    int output_dim() const { return layers.back().W.rows; }
};

// Gaussian-action policy with a value head. When value_share_layers is set
// the critic is a single linear head on the actor's last hidden layer;
// otherwise it is a full separate stack of the same hidden sizes.
struct PolicyParams {
    std::vector<int> layer_sizes;  // actor stack, e.g. [25, 100, 50, 25, 5]
    bool value_share_layers = false;
    Mlp actor;
    Vec log_std;  // per action dimension, state independent
    Mlp critic;

    int input_dim() const { return layer_sizes.front(); }
    int action_dim() const { return layer_sizes.back(); }

    // The paper-shaped network: hiddens [100, 50, 25].
    static PolicyParams standard(int input_dim, int action_dim, bool share_layers,
                                 std::uint64_t seed);
    static PolicyParams init(std::vector<int> layer_sizes, bool share_layers,
                             std::uint64_t seed);
    PolicyParams zeros_like() const;
    std::size_t param_count() const;
};

// Fixed iteration order over all parameters: actor layers (W then b),
// log_std, critic layers. Serialization, SGD and the finite-difference
// checks all rely on this order.
void for_each_param(PolicyParams& p, const std::function<void(double&)>& fn);
void for_each_param_pair(PolicyParams& a, const PolicyParams& b,
                         const std::function<void(double&, double)>& fn);

struct ForwardCache {
    std::vector<Vec> actor_acts;   // [input, h1, ..., hLast]
    std::vector<Vec> critic_acts;  // separate-critic activations; empty if shared
};

// Deterministic forward pass: action mean (unbounded) and state value.
void mlp_forward(const PolicyParams& p, std::span<const double> obs, Vec& action_mean,
                 double& value, ForwardCache* cache = nullptr);

// Accumulates dL/dparams given dL/d(action_mean) and dL/d(value) for the
// observation that produced `cache`. log_std gradients are the caller's
// responsibility (the density terms do not pass through the network).
void policy_backward(const PolicyParams& p, const ForwardCache& cache,
                     std::span<const double> dmean, double dvalue,
                     PolicyParams& grad);

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);

// action ~ Normal(mean, exp(log_std)) componentwise; returns the exact
// log-density of the sample.
void sample_action(const PolicyParams& p, std::span<const double> obs, RngStream& rng,
                   Vec& action, double& log_prob);

// Versioned little-endian blob; round-trips bit-exactly.
std::string save_params(const PolicyParams& p);
PolicyParams load_params(std::span<const char> blob);
void save_params_file(const PolicyParams& p, const std::string& path);
PolicyParams load_params_file(const std::string& path);

}  // namespace mergesim
