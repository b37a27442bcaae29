#include "mergesim/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mergesim/rng.hpp"

namespace mergesim {

namespace {

EligibilityFn window_filter(const std::optional<Window>& window,
                            const RoadNetwork& net) {
    if (!window) return {};
    Window w = *window;
    const RoadNetwork* n = &net;
    return [w, n](const Vehicle& v, const WorldState&) {
        return window_contains(w, *n, v.edge, v.position);
    };
}

}  // namespace

CentralizedController::CentralizedController(PolicyParams params,
                                             const ScenarioConfig& cfg,
                                             bool stochastic,
                                             std::optional<Window> window)
    : params_(std::move(params)),
      stochastic_(stochastic),
      window_(window),
      roster_(cfg.n_av_max) {
    int expected = kLocalStateDim * cfg.n_av_max;
    if (params_.input_dim() != expected)
        throw std::invalid_argument(
            "centralized controller expects input dim " + std::to_string(expected) +
            ", checkpoint has " + std::to_string(params_.input_dim()));
    if (params_.action_dim() != cfg.n_av_max)
        throw std::invalid_argument(
            "centralized controller expects action dim " +
            std::to_string(cfg.n_av_max) + ", checkpoint has " +
            std::to_string(params_.action_dim()));
}

ActionMap CentralizedController::act(const WorldState& w, const ScenarioConfig& cfg,
                                     RngStream& rng) {
    roster_.update(w, window_filter(window_, cfg.network));
    NormConstants norms = NormConstants::from(cfg);
    Vec obs = centralized_state(w, roster_, cfg.n_av_max, cfg.network, norms);

    Vec mean;
    double value;
    mlp_forward(params_, obs, mean, value);
    Vec action(mean.size());
    if (stochastic_) {
        for (std::size_t j = 0; j < mean.size(); ++j)
            action[j] = mean[j] + std::exp(params_.log_std[j]) * rng.gaussian();
    } else {
        action = mean;
    }

    if (recording) {
        last_trace.obs = obs;
        last_trace.action = action;
        last_trace.action_mean = mean;
        last_trace.log_prob = gaussian_log_prob(mean, params_.log_std, action);
        last_trace.value = value;
        last_slot_ids = roster_.slots();
    }

    ActionMap out;
    const auto& slots = roster_.slots();
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (slots[i] >= 0) out.emplace_back(slots[i], action[i]);
    std::sort(out.begin(), out.end());
    return out;
}

DistributedController::DistributedController(PolicyParams params, FeatureSet features,
                                             const ScenarioConfig& cfg,
                                             bool stochastic,
                                             std::optional<Window> window)
    : params_(std::move(params)),
      features_(features),
      stochastic_(stochastic),
      window_(window) {
    int expected = kLocalStateDim + features_.extra_dims();
    if (params_.input_dim() != expected)
        throw std::invalid_argument(
            "distributed controller expects input dim " + std::to_string(expected) +
            ", checkpoint has " + std::to_string(params_.input_dim()));
    if (params_.action_dim() != 1)
        throw std::invalid_argument("distributed controller expects action dim 1");
}

Vec DistributedController::observe(const Vehicle& v, const WorldState& w,
                                   const ScenarioConfig& cfg) const {
    return distributed_state(v, w, features_, cfg.network, NormConstants::from(cfg));
}

ActionMap DistributedController::act(const WorldState& w, const ScenarioConfig& cfg,
                                     RngStream& rng) {
    EligibilityFn filter = window_filter(window_, cfg.network);
    std::vector<const Vehicle*> agents;
    for (const auto& lane : w.edge_vehicles)
        for (const auto& v : lane)
            if (v.controlled && (!filter || filter(v, w))) agents.push_back(&v);
    std::sort(agents.begin(), agents.end(),
              [](const Vehicle* a, const Vehicle* b) { return a->id < b->id; });

    if (recording) last_traces.clear();
    ActionMap out;
    for (const Vehicle* v : agents) {
        Vec obs = observe(*v, w, cfg);
        Vec mean;
        double value;
        mlp_forward(params_, obs, mean, value);
        Vec action(1);
        action[0] = stochastic_
                        ? mean[0] + std::exp(params_.log_std[0]) * rng.gaussian()
                        : mean[0];
        if (recording) {
            AgentTrace t;
            t.id = v->id;
            t.obs = std::move(obs);
            t.action = action;
            t.action_mean = mean;
            t.log_prob = gaussian_log_prob(mean, params_.log_std, action);
            t.value = value;
            last_traces.push_back(std::move(t));
        }
        out.emplace_back(v->id, action[0]);
    }
    return out;  // already id-ascending
}

ActionMap EntryBlockController::act(const WorldState& w, const ScenarioConfig& cfg,
                                    RngStream&) {
    if (dwell_steps_ <= 0) return {};

    if (blocker_id_ >= 0) {
        const Vehicle* v = w.find(blocker_id_);
        // a released blocker is tracked until it clears the junction
        if (!v || (designated_at_ < 0 && v->edge == EdgeKind::PostMerge)) {
            blocker_id_ = -1;
            designated_at_ = -1;
        }
    }
    if (blocker_id_ < 0) {
        const Vehicle* candidate = nullptr;
        for (const auto& v : w.on_edge(EdgeKind::MainPre)) {
            if (v.cls != VehClass::Av || v.entry_time < min_entry_time_) continue;
            if (!candidate || v.id < candidate->id) candidate = &v;
        }
        if (candidate) {
            blocker_id_ = candidate->id;
            designated_at_ = w.time;
        }
    }
    if (blocker_id_ < 0) return {};

    ActionBounds bounds;
    if (designated_at_ >= 0 && w.time - designated_at_ < dwell_steps_)
        return {{blocker_id_, -bounds.decel_max}};
    if (designated_at_ >= 0) {
        // dwell over: release, and let the next AV to enter start a new cycle
        designated_at_ = -1;
        min_entry_time_ = w.time;
    }
    return {{blocker_id_, bounds.accel_max}};
}

std::unique_ptr<Controller> make_idm_controller() {
    return std::make_unique<IdmOnlyController>();
}

std::unique_ptr<Controller> make_centralized(PolicyParams params,
                                             const ScenarioConfig& cfg,
                                             bool stochastic,
                                             std::optional<Window> window) {
    return std::make_unique<CentralizedController>(std::move(params), cfg, stochastic,
                                                   window);
}

std::unique_ptr<Controller> make_distributed(PolicyParams params, FeatureSet features,
                                             const ScenarioConfig& cfg,
                                             bool stochastic,
                                             std::optional<Window> window) {
    return std::make_unique<DistributedController>(std::move(params), features, cfg,
                                                   stochastic, window);
}

std::unique_ptr<Controller> make_entry_blocker(double dwell_seconds,
                                               const ScenarioConfig& cfg) {
    int steps = static_cast<int>(std::llround(dwell_seconds / cfg.dt));
    return std::make_unique<EntryBlockController>(steps);
}

}  // namespace mergesim
