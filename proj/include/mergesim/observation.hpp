#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mergesim/engine.hpp"

namespace mergesim {

struct NormConstants {
    double v_max = 30.0;
    double h_max = 120.0;
    double d_max = 600.0;  // network entry to junction

    static NormConstants from(const ScenarioConfig& cfg) {
        return {cfg.speed_limit(), cfg.h_max,
                cfg.network.edge(EdgeKind::MainPre).length};
    }
};

// Distributed-state augmentation flags. Dist and MergeInfo alone give the
// 8-feature vector; adding Congestion makes it 9.
struct FeatureSet {
    bool dist = false;
    bool merge_info = false;
    bool congestion = false;

    int extra_dims() const {
        return (dist ? 1 : 0) + (merge_info ? 2 : 0) + (congestion ? 1 : 0);
    }
    static FeatureSet full() { return {true, true, true}; }
    static FeatureSet none() { return {}; }
    // "full", "none", or comma list of dist|merge|congestion
    static FeatureSet parse(const std::string& text);
    std::string to_string() const;
    bool operator==(const FeatureSet&) const = default;
};

inline constexpr int kLocalStateDim = 5;

using EligibilityFn = std::function<bool(const Vehicle&, const WorldState&)>;

// FIFO assignment of AVs to the centralized policy's fixed slots. A freed
// slot is refilled on the next update by the oldest unassigned eligible AV;
// occupied slots never move.
class CentralizedRoster {
public:
    explicit CentralizedRoster(int n_slots) : slots_(n_slots, -1) {}

    void update(const WorldState& w, const EligibilityFn& eligible = {});
    const std::vector<int>& slots() const { return slots_; }
    int slot_of(int vehicle_id) const;

private:
    std::vector<int> slots_;  // vehicle id or -1
};

// [v, v_leader, h_leader, v_follower, h_follower], speeds over v_max and
// headways capped at h_max before normalization. Missing neighbors saturate
// to 1 (fast, far away).
void local_state_5(const Vehicle& v, const WorldState& w, const RoadNetwork& net,
                   const NormConstants& norms, double* out);

// Concatenated local states of the rostered AVs, zero-padded to 5*n_av.
std::vector<double> centralized_state(const WorldState& w,
                                      const CentralizedRoster& roster, int n_av,
                                      const RoadNetwork& net,
                                      const NormConstants& norms);

// Local 5-state plus the enabled augmentation features, in the order
// Dist, MergeInfo(speed, dist), Congestion.
std::vector<double> distributed_state(const Vehicle& v, const WorldState& w,
                                      const FeatureSet& features,
                                      const RoadNetwork& net,
                                      const NormConstants& norms);

}  // namespace mergesim
