#include "mergesim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include "mergesim/rng.hpp"

namespace mergesim {

double PpoConfig::lr_at(int iteration) const {
    if (!lr_piecewise || iterations <= 1) return lr;
    double f = static_cast<double>(iteration) / iterations;
    // breakpoints (0, 1.0) -> (0.5, 0.5) -> (0.8, 0.25) -> (1.0, 0.25)
    double scale;
    if (f < 0.5) scale = 1.0 - f;                       // 1.0 .. 0.5
    else if (f < 0.8) scale = 0.5 - (f - 0.5) / 0.3 * 0.25;  // 0.5 .. 0.25
    else scale = 0.25;
    return lr * scale;
}

void PpoConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma in (0,1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
        throw std::invalid_argument("gae_lambda in [0,1]");
    if (!(clip_param > 0.0)) throw std::invalid_argument("clip_param > 0");
    if (sgd_minibatch_size <= 0 || train_batch_size <= 0)
        throw std::invalid_argument("batch sizes must be positive");
    if (sgd_minibatch_size > train_batch_size)
        throw std::invalid_argument("minibatch exceeds train batch");
    if (num_sgd_iter <= 0) throw std::invalid_argument("num_sgd_iter must be positive");
    if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
}

PpoConfig PpoConfig::centralized_paper() {
    PpoConfig c;
    c.lr = 5e-4;
    c.gamma = 0.99;
    c.gae_lambda = 0.97;
    c.clip_param = 0.3;
    c.vf_clip_param = 1e6;
    c.kl_coeff = 0.2;
    c.kl_target = 0.01;
    c.entropy_coeff = 0.0;
    c.value_loss_coeff = 1.0;
    c.sgd_minibatch_size = 128;
    c.train_batch_size = 40000;
    c.num_sgd_iter = 10;
    c.rollouts_per_iter = 20;
    c.iterations = 500;
    c.value_share_layers = false;
    return c;
}

PpoConfig PpoConfig::distributed_paper() {
    PpoConfig c;
    c.lr = 5e-4;
    c.lr_piecewise = true;
    c.gamma = 0.998;
    c.gae_lambda = 0.95;
    c.clip_param = 0.2;
    c.vf_clip_param = 1e8;
    c.kl_coeff = 0.01;
    c.kl_target = 0.01;
    c.entropy_coeff = 1e-3;
    c.value_loss_coeff = 0.5;
    c.sgd_minibatch_size = 4096;
    c.train_batch_size = 60000;
    c.num_sgd_iter = 10;
    c.rollouts_per_iter = 30;
    c.iterations = 500;
    c.value_share_layers = true;
    return c;
}

PpoConfig PpoConfig::centralized_desk() {
    PpoConfig c = centralized_paper();
    c.train_batch_size = 4000;
    c.sgd_minibatch_size = 128;
    c.iterations = 60;
    c.rollouts_per_iter = 2;
    return c;
}

PpoConfig PpoConfig::distributed_desk() {
    PpoConfig c = distributed_paper();
    c.train_batch_size = 4000;
    c.sgd_minibatch_size = 512;
    c.iterations = 60;
    c.rollouts_per_iter = 1;
    return c;
}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 double last_value, bool done, double gamma, double lambda,
                 std::span<double> advantages, std::span<double> returns) {
    if (rewards.size() != values.size() || advantages.size() != rewards.size() ||
        returns.size() != rewards.size())
        throw std::invalid_argument("compute_gae: length mismatch");
    const int n = static_cast<int>(rewards.size());
    double next_value = done ? 0.0 : last_value;
    double next_adv = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        double delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        advantages[t] = next_adv;
        returns[t] = next_adv + values[t];
        next_value = values[t];
    }
}

void attach_advantages(RolloutBatch& batch, double gamma, double lambda,
                       bool normalize) {
    batch.advantages.assign(batch.size(), 0.0);
    batch.returns.assign(batch.size(), 0.0);
    for (const auto& traj : batch.trajs) {
        int len = traj.end - traj.begin;
        compute_gae({batch.rewards.data() + traj.begin, static_cast<std::size_t>(len)},
                    {batch.value_old.data() + traj.begin, static_cast<std::size_t>(len)},
                    traj.bootstrap, traj.done, gamma, lambda,
                    {batch.advantages.data() + traj.begin, static_cast<std::size_t>(len)},
                    {batch.returns.data() + traj.begin, static_cast<std::size_t>(len)});
    }
    if (normalize && batch.size() > 1) {
        double mean = 0.0;
        for (double a : batch.advantages) mean += a;
        mean /= batch.size();
        double ss = 0.0;
        for (double a : batch.advantages) ss += (a - mean) * (a - mean);
        double stddev = std::sqrt(ss / batch.size());
        double inv = 1.0 / (stddev + 1e-8);
        for (double& a : batch.advantages) a = (a - mean) * inv;
    }
}

namespace {

double centralized_step_reward(const RewardSpec& spec, const WorldState& world,
                               const StepEvents& events, const ScenarioConfig& cfg) {
    switch (spec.kind) {
        case RewardKind::Flow:
            return flow_reward(world, cfg.network, spec.flow);
        case RewardKind::AvgSpeed:
            return avg_speed_reward(world, cfg.speed_limit());
        case RewardKind::Outflow:
            return outflow_reward(events);
        case RewardKind::DistributedMixed:
            throw std::invalid_argument(
                "mixed reward is for the distributed controller");
    }
    return 0.0;
}

struct CentralizedEpisode {
    std::vector<AgentTrace> steps;
    std::vector<double> rewards;
    double episode_return = 0.0;
    int transitions = 0;
};

struct CentralizedRecorder : EpisodeObserver {
    CentralizedController* ctrl;
    const RewardSpec* spec;
    CentralizedEpisode data;

    void on_step(const WorldState& world, const StepEvents& events,
                 const ScenarioConfig& cfg) override {
        data.steps.push_back(ctrl->last_trace);
        data.rewards.push_back(centralized_step_reward(*spec, world, events, cfg));
    }
};

CentralizedEpisode run_centralized_episode(const PolicyParams& params,
                                           const ScenarioConfig& scenario,
                                           const RewardSpec& reward,
                                           std::uint64_t seed) {
    CentralizedController ctrl(params, scenario, /*stochastic=*/true);
    ctrl.recording = true;
    CentralizedRecorder rec;
    rec.ctrl = &ctrl;
    rec.spec = &reward;
    run_episode(ctrl, scenario, seed, &rec);
    CentralizedEpisode ep = std::move(rec.data);
    for (double r : ep.rewards) ep.episode_return += r;
    ep.transitions = static_cast<int>(ep.steps.size());
    return ep;
}

struct AgentTrajData {
    std::vector<double> obs, actions, mus, logps, values, rewards;
    bool done = false;
    double bootstrap = 0.0;
};

struct DistributedEpisode {
    std::vector<std::pair<int, AgentTrajData>> agents;  // id ascending
    double episode_return = 0.0;
    int transitions = 0;
};

struct DistributedRecorder : EpisodeObserver {
    DistributedController* ctrl;
    const DistributedMixedSpec* spec;
    std::map<int, AgentTrajData> agents;

    void on_step(const WorldState& world, const StepEvents& events,
                 const ScenarioConfig& cfg) override {
        for (const AgentTrace& trace : ctrl->last_traces) {
            AgentTrajData& tr = agents[trace.id];
            tr.obs.insert(tr.obs.end(), trace.obs.begin(), trace.obs.end());
            tr.actions.push_back(trace.action[0]);
            tr.mus.push_back(trace.action_mean[0]);
            tr.logps.push_back(trace.log_prob);
            tr.values.push_back(trace.value);
            tr.rewards.push_back(distributed_reward(trace.id, world, events, *spec,
                                                    cfg.speed_limit()));
            if (std::binary_search(events.exited_ids.begin(), events.exited_ids.end(),
                                   trace.id))
                tr.done = true;
        }
        if (world.time == cfg.horizon) {
            // horizon truncation: bootstrap survivors with their current value
            for (auto& [id, tr] : agents) {
                if (tr.done) continue;
                const Vehicle* v = world.find(id);
                if (!v) continue;
                Vec obs = ctrl->observe(*v, world, cfg);
                Vec mean;
                double value;
                mlp_forward(ctrl->params(), obs, mean, value);
                tr.bootstrap = value;
            }
        }
    }
};

DistributedEpisode run_distributed_episode(const PolicyParams& params,
                                           const FeatureSet& features,
                                           const ScenarioConfig& scenario,
                                           const RewardSpec& reward,
                                           std::uint64_t seed) {
    if (reward.kind != RewardKind::DistributedMixed)
        throw std::invalid_argument("distributed training uses the mixed reward");
    DistributedController ctrl(params, features, scenario, /*stochastic=*/true);
    ctrl.recording = true;
    DistributedRecorder rec;
    rec.ctrl = &ctrl;
    rec.spec = &reward.mixed;
    run_episode(ctrl, scenario, seed, &rec);

    DistributedEpisode ep;
    for (auto& [id, tr] : rec.agents) {
        ep.transitions += static_cast<int>(tr.actions.size());
        double ret = 0.0;
        for (double r : tr.rewards) ret += r;
        ep.episode_return += ret;
        ep.agents.emplace_back(id, std::move(tr));
    }
    if (!ep.agents.empty()) ep.episode_return /= static_cast<double>(ep.agents.size());
    return ep;
}

}  // namespace

RolloutBatch collect_rollouts(ControllerKind kind, const PolicyParams& params,
                              const ScenarioConfig& scenario,
                              const RewardSpec& reward, const FeatureSet& features,
                              int min_transitions, std::uint64_t seed_base,
                              ExecMode mode) {
    RolloutBatch batch;
    if (kind == ControllerKind::Centralized) {
        batch.obs_dim = kLocalStateDim * scenario.n_av_max;
        batch.act_dim = scenario.n_av_max;
    } else {
        batch.obs_dim = kLocalStateDim + features.extra_dims();
        batch.act_dim = 1;
    }
    batch.log_std_old = params.log_std;

    std::vector<CentralizedEpisode> cent;
    std::vector<DistributedEpisode> dist;
    const int wave = mode == ExecMode::Parallel ? std::max(1, worker_count()) : 1;
    int total = 0;
    int produced = 0;
    std::exception_ptr error;
    std::mutex error_mutex;
    while (total < min_transitions) {
        int base = produced;
        if (kind == ControllerKind::Centralized) cent.resize(base + wave);
        else dist.resize(base + wave);
        parallel_for(wave, mode, [&](int k) {
            std::uint64_t ep_seed = splitmix64(seed_base ^ (0x9e3779b9ULL * (base + k + 1)));
            try {
                if (kind == ControllerKind::Centralized)
                    cent[base + k] =
                        run_centralized_episode(params, scenario, reward, ep_seed);
                else
                    dist[base + k] = run_distributed_episode(params, features, scenario,
                                                             reward, ep_seed);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
        if (error) std::rethrow_exception(error);
        produced += wave;
        // keep episodes in index order up to the first one crossing the target
        for (int j = base; j < produced && total < min_transitions; ++j) {
            total += kind == ControllerKind::Centralized ? cent[j].transitions
                                                         : dist[j].transitions;
            if (total >= min_transitions) {
                if (kind == ControllerKind::Centralized) cent.resize(j + 1);
                else dist.resize(j + 1);
                produced = j + 1;
            }
        }
        // guard against scenarios that generate no transitions at all
        if (produced >= 4096 && total == 0)
            throw std::runtime_error("rollout collection produced no transitions");
    }

    auto push_row = [&](std::span<const double> obs, std::span<const double> action,
                        std::span<const double> mu, double logp, double value,
                        double rew) {
        batch.obs.insert(batch.obs.end(), obs.begin(), obs.end());
        batch.actions.insert(batch.actions.end(), action.begin(), action.end());
        batch.mu_old.insert(batch.mu_old.end(), mu.begin(), mu.end());
        batch.logp_old.push_back(logp);
        batch.value_old.push_back(value);
        batch.rewards.push_back(rew);
    };

    if (kind == ControllerKind::Centralized) {
        for (const auto& ep : cent) {
            RolloutBatch::Traj traj;
            traj.begin = batch.size();
            for (std::size_t t = 0; t < ep.steps.size(); ++t) {
                const AgentTrace& s = ep.steps[t];
                push_row(s.obs, s.action, s.action_mean, s.log_prob, s.value,
                         ep.rewards[t]);
            }
            traj.end = batch.size();
            traj.done = true;  // fixed-horizon episodic task
            batch.trajs.push_back(traj);
            batch.episode_returns.push_back(ep.episode_return);
        }
        batch.n_episodes = static_cast<int>(cent.size());
    } else {
        for (const auto& ep : dist) {
            for (const auto& [id, tr] : ep.agents) {
                RolloutBatch::Traj traj;
                traj.begin = batch.size();
                int len = static_cast<int>(tr.actions.size());
                for (int t = 0; t < len; ++t) {
                    push_row({tr.obs.data() + static_cast<std::size_t>(t) * batch.obs_dim,
                              static_cast<std::size_t>(batch.obs_dim)},
                             {&tr.actions[t], 1}, {&tr.mus[t], 1}, tr.logps[t],
                             tr.values[t], tr.rewards[t]);
                }
                traj.end = batch.size();
                traj.done = tr.done;
                traj.bootstrap = tr.bootstrap;
                batch.trajs.push_back(traj);
            }
            batch.episode_returns.push_back(ep.episode_return);
        }
        batch.n_episodes = static_cast<int>(dist.size());
    }
    return batch;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct TransitionLoss {
    double policy = 0.0, vf = 0.0, entropy = 0.0, kl = 0.0, ratio = 0.0;
    double value = 0.0;
};

// Loss pieces for transition i; when grad != nullptr the gradients are
// accumulated (unscaled sums).
TransitionLoss transition_eval(const PolicyParams& p, const RolloutBatch& b, int i,
                               const PpoConfig& cfg, double kl_coeff,
                               PolicyParams* grad) {
    TransitionLoss out;
    ForwardCache cache;
    Vec mu;
    double value;
    mlp_forward(p, b.obs_row(i), mu, value, grad ? &cache : nullptr);
    out.value = value;

    const int ad = b.act_dim;
    const double* action = b.actions.data() + static_cast<std::size_t>(i) * ad;
    const double* mu_old = b.mu_old.data() + static_cast<std::size_t>(i) * ad;

    double logp_new = 0.0;
    for (int j = 0; j < ad; ++j) {
        double sigma = std::exp(p.log_std[j]);
        double z = (action[j] - mu[j]) / sigma;
        logp_new += -0.5 * z * z - p.log_std[j] - 0.5 * kLog2Pi;
    }
    double ratio = std::exp(logp_new - b.logp_old[i]);
    out.ratio = ratio;
    double adv = b.advantages[i];
    double unclipped = ratio * adv;
    double clipped =
        std::clamp(ratio, 1.0 - cfg.clip_param, 1.0 + cfg.clip_param) * adv;
    bool use_unclipped = unclipped <= clipped;
    out.policy = -std::min(unclipped, clipped);

    double dv = value - b.returns[i];
    double v_clip = b.value_old[i] +
                    std::clamp(value - b.value_old[i], -cfg.vf_clip_param,
                               cfg.vf_clip_param);
    double vf1 = dv * dv;
    double vf2 = (v_clip - b.returns[i]) * (v_clip - b.returns[i]);
    out.vf = std::max(vf1, vf2);

    for (int j = 0; j < ad; ++j) {
        out.entropy += p.log_std[j] + 0.5 * (1.0 + kLog2Pi);
        double so = std::exp(b.log_std_old[j]);
        double sn = std::exp(p.log_std[j]);
        double dmu = mu_old[j] - mu[j];
        out.kl += p.log_std[j] - b.log_std_old[j] +
                  (so * so + dmu * dmu) / (2.0 * sn * sn) - 0.5;
    }

    if (grad) {
        Vec dmu(ad, 0.0);
        for (int j = 0; j < ad; ++j) {
            double sigma = std::exp(p.log_std[j]);
            double z = (action[j] - mu[j]) / sigma;
            if (use_unclipped) {
                dmu[j] += -adv * ratio * z / sigma;
                grad->log_std[j] += -adv * ratio * (z * z - 1.0);
            }
            grad->log_std[j] += -cfg.entropy_coeff;
            double so = std::exp(b.log_std_old[j]);
            double diff = mu[j] - mu_old[j];
            dmu[j] += kl_coeff * diff / (sigma * sigma);
            grad->log_std[j] +=
                kl_coeff * (1.0 - (so * so + diff * diff) / (sigma * sigma));
        }
        double dvalue;
        if (vf1 >= vf2) {
            dvalue = cfg.value_loss_coeff * 2.0 * dv;
        } else {
            bool inner = std::abs(value - b.value_old[i]) < cfg.vf_clip_param;
            dvalue = inner ? cfg.value_loss_coeff * 2.0 * (v_clip - b.returns[i]) : 0.0;
        }
        policy_backward(p, cache, dmu, dvalue, *grad);
    }
    return out;
}

void add_params(PolicyParams& into, const PolicyParams& from) {
    for_each_param_pair(into, from, [](double& a, double b) { a += b; });
}

}  // namespace

LossEval compute_losses(const PolicyParams& params, const RolloutBatch& batch,
                        const PpoConfig& cfg, double kl_coeff) {
    if (batch.advantages.empty())
        throw std::invalid_argument("batch has no advantages attached");
    LossEval e;
    double ret_mean = 0.0, err_mean = 0.0;
    std::vector<double> errs(batch.size());
    for (int i = 0; i < batch.size(); ++i) {
        TransitionLoss t = transition_eval(params, batch, i, cfg, kl_coeff, nullptr);
        e.policy_loss += t.policy;
        e.vf_loss += t.vf;
        e.entropy += t.entropy;
        e.kl += t.kl;
        e.mean_ratio += t.ratio;
        errs[i] = batch.returns[i] - t.value;
        ret_mean += batch.returns[i];
        err_mean += errs[i];
    }
    double n = batch.size();
    e.policy_loss /= n;
    e.vf_loss /= n;
    e.entropy /= n;
    e.kl /= n;
    e.mean_ratio /= n;
    ret_mean /= n;
    err_mean /= n;
    double ret_var = 0.0, err_var = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
        ret_var += (batch.returns[i] - ret_mean) * (batch.returns[i] - ret_mean);
        err_var += (errs[i] - err_mean) * (errs[i] - err_mean);
    }
    e.explained_var = ret_var > 0.0 ? 1.0 - err_var / ret_var : 0.0;
    e.total = e.policy_loss + cfg.value_loss_coeff * e.vf_loss -
              cfg.entropy_coeff * e.entropy + kl_coeff * e.kl;
    return e;
}

void ppo_gradient(const PolicyParams& params, const RolloutBatch& batch,
                  std::span<const int> idx, const PpoConfig& cfg, double kl_coeff,
                  PolicyParams& grad, ExecMode mode) {
    grad = params.zeros_like();
    constexpr int kChunk = 64;   // fixed accumulation unit: reduction order is
    constexpr int kBlock = 32;   // chunk-indexed, independent of thread count
    const int n = static_cast<int>(idx.size());
    const int n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<PolicyParams> buffers;
    for (int chunk_base = 0; chunk_base < n_chunks; chunk_base += kBlock) {
        int m = std::min(kBlock, n_chunks - chunk_base);
        while (static_cast<int>(buffers.size()) < m)
            buffers.push_back(params.zeros_like());
        for (int b = 0; b < m; ++b)
            for_each_param(buffers[b], [](double& v) { v = 0.0; });
        parallel_for(m, mode, [&](int b) {
            int lo = (chunk_base + b) * kChunk;
            int hi = std::min(lo + kChunk, n);
            for (int k = lo; k < hi; ++k)
                transition_eval(params, batch, idx[k], cfg, kl_coeff, &buffers[b]);
        });
        for (int b = 0; b < m; ++b) add_params(grad, buffers[b]);
    }
    double inv = n > 0 ? 1.0 / n : 0.0;
    for_each_param(grad, [inv](double& v) { v *= inv; });
}

UpdateStats ppo_update(PolicyParams& params, double& kl_coeff,
                       const RolloutBatch& batch, const PpoConfig& cfg, double lr,
                       std::uint64_t shuffle_seed, ExecMode mode) {
    cfg.validate();
    if (batch.size() == 0) throw std::invalid_argument("empty rollout batch");
    if (batch.advantages.empty())
        throw std::invalid_argument("batch has no advantages attached");

    RngStream shuffle_rng = RngStream::derive(shuffle_seed, 0x53484646ULL);
    std::vector<int> order(batch.size());
    for (int i = 0; i < batch.size(); ++i) order[i] = i;

    PolicyParams grad = params.zeros_like();
    for (int epoch = 0; epoch < cfg.num_sgd_iter; ++epoch) {
        for (int i = batch.size() - 1; i > 0; --i) {
            int j = static_cast<int>(shuffle_rng.next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }
        for (int start = 0; start < batch.size(); start += cfg.sgd_minibatch_size) {
            int end = std::min(start + cfg.sgd_minibatch_size, batch.size());
            ppo_gradient(params, batch,
                         {order.data() + start, static_cast<std::size_t>(end - start)},
                         cfg, kl_coeff, grad, mode);
            bool finite = true;
            for_each_param(grad, [&](double& v) {
                if (!std::isfinite(v)) finite = false;
            });
            if (!finite)
                throw std::runtime_error(
                    "non-finite loss gradient in PPO update (epoch " +
                    std::to_string(epoch) + ", minibatch at " + std::to_string(start) +
                    ")");
            for_each_param_pair(params, grad,
                                [lr](double& p, double g) { p -= lr * g; });
        }
    }

    LossEval eval = compute_losses(params, batch, cfg, kl_coeff);
    if (!std::isfinite(eval.total))
        throw std::runtime_error("non-finite loss after PPO update");
    UpdateStats stats;
    stats.policy_loss = eval.policy_loss;
    stats.vf_loss = eval.vf_loss;
    stats.entropy = eval.entropy;
    stats.kl = eval.kl;
    stats.explained_var = eval.explained_var;
    if (eval.kl > 2.0 * cfg.kl_target) kl_coeff = std::min(kl_coeff * 2.0, 1e6);
    else if (eval.kl < cfg.kl_target / 2.0) kl_coeff = std::max(kl_coeff * 0.5, 1e-10);
    stats.kl_coeff_after = kl_coeff;
    return stats;
}

std::string TrainResult::curve_csv() const {
    std::string out =
        "iteration,mean_return,kl,policy_loss,vf_loss,entropy,lr,episodes,"
        "transitions\n";
    char buf[256];
    for (const auto& s : curve) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                      s.iteration, s.mean_return, s.kl, s.policy_loss, s.vf_loss,
                      s.entropy, s.lr, s.episodes, s.transitions);
        out += buf;
    }
    return out;
}

TrainResult train(ControllerKind kind, const ScenarioConfig& scenario,
                  const RewardSpec& reward, const FeatureSet& features,
                  const PpoConfig& cfg, std::uint64_t seed, ExecMode mode,
                  std::ostream* progress) {
    cfg.validate();
    scenario.validate();
    int input_dim, action_dim;
    if (kind == ControllerKind::Centralized) {
        input_dim = kLocalStateDim * scenario.n_av_max;
        action_dim = scenario.n_av_max;
    } else {
        input_dim = kLocalStateDim + features.extra_dims();
        action_dim = 1;
    }
    PolicyParams params = PolicyParams::standard(
        input_dim, action_dim, cfg.value_share_layers, splitmix64(seed ^ 0x696e6974ULL));

    TrainResult res;
    res.best_params = params;
    res.best_return = -std::numeric_limits<double>::infinity();
    double kl_coeff = cfg.kl_coeff;
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        RolloutBatch batch = collect_rollouts(
            kind, params, scenario, reward, features, cfg.train_batch_size,
            splitmix64(seed ^ (0xC011EC7ULL + 0x10001ULL * iter)), mode);
        attach_advantages(batch, cfg.gamma, cfg.gae_lambda, true);
        double mean_return = 0.0;
        for (double r : batch.episode_returns) mean_return += r;
        if (!batch.episode_returns.empty())
            mean_return /= static_cast<double>(batch.episode_returns.size());
        if (mean_return > res.best_return) {
            res.best_return = mean_return;
            res.best_params = params;  // params that produced this return
            res.best_iteration = iter;
        }
        double lr = cfg.lr_at(iter);
        UpdateStats stats =
            ppo_update(params, kl_coeff, batch, cfg, lr,
                       splitmix64(seed ^ (0x5EEDULL + 0x20002ULL * iter)), mode);
        IterationStats row;
        row.iteration = iter;
        row.mean_return = mean_return;
        row.kl = stats.kl;
        row.policy_loss = stats.policy_loss;
        row.vf_loss = stats.vf_loss;
        row.entropy = stats.entropy;
        row.lr = lr;
        row.episodes = batch.n_episodes;
        row.transitions = batch.size();
        res.curve.push_back(row);
        if (progress) {
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "iter %3d  return %10.3f  kl %.4f  pl %8.4f  vf %10.3f  "
                          "lr %.2e  eps %d  n %d\n",
                          iter, mean_return, stats.kl, stats.policy_loss,
                          stats.vf_loss, lr, batch.n_episodes, batch.size());
            (*progress) << buf;
            progress->flush();
        }
    }
    return res;
}

}  // namespace mergesim
