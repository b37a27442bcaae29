#pragma once

#include <memory>
#include <optional>

#include "mergesim/engine.hpp"
#include "mergesim/observation.hpp"
#include "mergesim/policy.hpp"

namespace mergesim {

class IdmOnlyController : public Controller {
public:
    ActionMap act(const WorldState&, const ScenarioConfig&, RngStream&) override {
        return {};
    }
};

// Per-step record kept while collecting rollouts.
struct AgentTrace {
    int id = -1;          // vehicle id (distributed); unused for centralized
    Vec obs;
    Vec action;
    Vec action_mean;
    double log_prob = 0.0;
    double value = 0.0;
};

// One network over the concatenated states of up to n_av_max rostered AVs;
// output component i drives roster slot i.
class CentralizedController : public Controller {
public:
    CentralizedController(PolicyParams params, const ScenarioConfig& cfg,
                          bool stochastic, std::optional<Window> window = {});

    ActionMap act(const WorldState& w, const ScenarioConfig& cfg,
                  RngStream& rng) override;

    bool recording = false;
    AgentTrace last_trace;                 // valid after act() when recording
    std::vector<int> last_slot_ids;        // roster snapshot used for last act

    const PolicyParams& params() const { return params_; }

private:
    PolicyParams params_;
    bool stochastic_;
    std::optional<Window> window_;
    CentralizedRoster roster_;
};

// One parameter set executed independently per AV on its own observation.
class DistributedController : public Controller {
public:
    DistributedController(PolicyParams params, FeatureSet features,
                          const ScenarioConfig& cfg, bool stochastic,
                          std::optional<Window> window = {});

    ActionMap act(const WorldState& w, const ScenarioConfig& cfg,
                  RngStream& rng) override;

    bool recording = false;
    std::vector<AgentTrace> last_traces;  // one per acting AV, id ascending

    const PolicyParams& params() const { return params_; }
    const FeatureSet& features() const { return features_; }

    // observation for one agent in the current world (used for bootstraps)
    Vec observe(const Vehicle& v, const WorldState& w,
                const ScenarioConfig& cfg) const;

private:
    PolicyParams params_;
    FeatureSet features_;
    bool stochastic_;
    std::optional<Window> window_;
};

// Scripted inflow manipulation: each cycle, the first AV to enter after the
// previous release brakes to a stop near the entrance, dwells, then drives
// off at the speed limit. dwell <= 0 disables the script entirely.
class EntryBlockController : public Controller {
public:
    explicit EntryBlockController(int dwell_steps) : dwell_steps_(dwell_steps) {}

    ActionMap act(const WorldState& w, const ScenarioConfig& cfg,
                  RngStream& rng) override;

private:
    int dwell_steps_;
    int blocker_id_ = -1;
    int designated_at_ = -1;
    int min_entry_time_ = 0;  // only AVs entering from this step qualify
};

std::unique_ptr<Controller> make_idm_controller();
std::unique_ptr<Controller> make_centralized(PolicyParams params,
                                             const ScenarioConfig& cfg,
                                             bool stochastic,
                                             std::optional<Window> window = {});
std::unique_ptr<Controller> make_distributed(PolicyParams params, FeatureSet features,
                                             const ScenarioConfig& cfg,
                                             bool stochastic,
                                             std::optional<Window> window = {});
std::unique_ptr<Controller> make_entry_blocker(double dwell_seconds,
                                               const ScenarioConfig& cfg);

}  // namespace mergesim
