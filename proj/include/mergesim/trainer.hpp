#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mergesim/controllers.hpp"
#include "mergesim/parallel.hpp"
#include "mergesim/policy.hpp"
#include "mergesim/rewards.hpp"

namespace mergesim {

struct PpoConfig {
    double lr = 5e-4;
    bool lr_piecewise = false;  // halve at 50% and 80% of training, else constant
    double gamma = 0.99;
    double gae_lambda = 0.97;
    double clip_param = 0.3;
    double vf_clip_param = 1e6;
    double kl_coeff = 0.2;
    double kl_target = 0.01;
    double entropy_coeff = 0.0;
    double value_loss_coeff = 1.0;
    int sgd_minibatch_size = 128;
    int train_batch_size = 40000;
    int num_sgd_iter = 10;
    int rollouts_per_iter = 20;  // informational; collection is batch driven
    int iterations = 500;
    bool value_share_layers = false;

    double lr_at(int iteration) const;
    void validate() const;

    static PpoConfig centralized_paper();
    static PpoConfig distributed_paper();
    static PpoConfig centralized_desk();
    static PpoConfig distributed_desk();
};

enum class ControllerKind { Centralized, DistributedShared };

struct RolloutBatch {
    int obs_dim = 0;
    int act_dim = 0;
    // row i spans obs[i*obs_dim ..) and actions[i*act_dim ..)
    std::vector<double> obs, actions, mu_old;
    std::vector<double> logp_old, value_old, rewards;
    std::vector<double> log_std_old;  // act_dim, policy state at collection
    std::vector<double> advantages, returns;

    struct Traj {
        int begin = 0, end = 0;     // transition index range
        bool done = true;           // false: truncated, bootstrap with value below
        double bootstrap = 0.0;
    };
    std::vector<Traj> trajs;
    std::vector<double> episode_returns;
    int n_episodes = 0;

    int size() const { return static_cast<int>(logp_old.size()); }
    std::span<const double> obs_row(int i) const {
        return {obs.data() + static_cast<std::size_t>(i) * obs_dim,
                static_cast<std::size_t>(obs_dim)};
    }
};

// delta_t = r_t + gamma * V_{t+1} - V_t with V_T = done ? 0 : last_value;
// A_t = sum_k (gamma*lambda)^k delta_{t+k}; returns_t = A_t + V_t.
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 double last_value, bool done, double gamma, double lambda,
                 std::span<double> advantages, std::span<double> returns);

// Per-trajectory GAE plus (optional) whole-batch advantage normalization.
void attach_advantages(RolloutBatch& batch, double gamma, double lambda,
                       bool normalize);

// Whole episodes on parallel workers with distinct derived seeds until at
// least min_transitions are collected. Centralized: one trajectory per
// episode under the global reward. Distributed: one trajectory per agent
// with its own rewards; exits are terminal, horizon survivors bootstrap.
RolloutBatch collect_rollouts(ControllerKind kind, const PolicyParams& params,
                              const ScenarioConfig& scenario,
                              const RewardSpec& reward, const FeatureSet& features,
                              int min_transitions, std::uint64_t seed_base,
                              ExecMode mode);

struct LossEval {
    double policy_loss = 0.0;
    double vf_loss = 0.0;
    double entropy = 0.0;
    double kl = 0.0;
    double mean_ratio = 0.0;
    double explained_var = 0.0;
    double total = 0.0;
};

// Full-batch loss evaluation under the given parameters (no update).
LossEval compute_losses(const PolicyParams& params, const RolloutBatch& batch,
                        const PpoConfig& cfg, double kl_coeff);

// Batch-mean gradient of the PPO objective over transition indices `idx`.
// Used by the update loop and by the finite-difference checks.
void ppo_gradient(const PolicyParams& params, const RolloutBatch& batch,
                  std::span<const int> idx, const PpoConfig& cfg, double kl_coeff,
                  PolicyParams& grad, ExecMode mode);

struct UpdateStats {
    double policy_loss = 0.0;
    double vf_loss = 0.0;
    double entropy = 0.0;
    double kl = 0.0;
    double explained_var = 0.0;
    double kl_coeff_after = 0.0;
};

// num_sgd_iter epochs of minibatch SGD on the clipped-surrogate objective
// with value loss, entropy bonus and adaptive KL penalty. Throws on
// non-finite losses. kl_coeff is adapted in place after the update.
UpdateStats ppo_update(PolicyParams& params, double& kl_coeff,
                       const RolloutBatch& batch, const PpoConfig& cfg, double lr,
                       std::uint64_t shuffle_seed, ExecMode mode);

struct IterationStats {
    int iteration = 0;
    double mean_return = 0.0;
    double kl = 0.0;
    double policy_loss = 0.0;
    double vf_loss = 0.0;
    double entropy = 0.0;
    double lr = 0.0;
    int episodes = 0;
    int transitions = 0;
};

struct TrainResult {
    PolicyParams best_params;
    int best_iteration = -1;  // -1: initial params were never improved on
    double best_return = 0.0;
    std::vector<IterationStats> curve;

    std::string curve_csv() const;
};

TrainResult train(ControllerKind kind, const ScenarioConfig& scenario,
                  const RewardSpec& reward, const FeatureSet& features,
                  const PpoConfig& cfg, std::uint64_t seed, ExecMode mode,
                  std::ostream* progress = nullptr);

}  // namespace mergesim
