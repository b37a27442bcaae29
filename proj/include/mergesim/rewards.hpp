#pragma once

#include <span>
#include <string>

#include "mergesim/engine.hpp"

namespace mergesim {

struct FlowRewardSpec {
    double v_desired = 25.0;  // m/s
    double alpha = 0.1;
    double h_expected = 10.0;  // m
};

struct DistributedMixedSpec {
    double eta1 = 0.9;  // per-step time penalty weight
    double eta2 = 0.1;  // global average-speed weight
    double bonus = 20.0;

    void validate() const;  // eta1 + eta2 = 1, both nonnegative
};

enum class RewardKind { Flow, AvgSpeed, Outflow, DistributedMixed };

struct RewardSpec {
    RewardKind kind = RewardKind::Outflow;
    FlowRewardSpec flow;
    DistributedMixedSpec mixed;

    // "outflow" | "avgspeed" | "flow[:Vd=..,alpha=..,hexp=..]"
    //           | "mixed[:eta1=..,eta2=..,bonus=..]"
    static RewardSpec parse(const std::string& text);
    std::string to_string() const;
};

// Eq.-style episode metrics, computed from the log alone. Steps with an
// empty network contribute zero to the time average.
double metric_avg_speed(const EpisodeLog& log);
double metric_outflow_vph(const EpisodeLog& log);
double metric_inflow_vph(const EpisodeLog& log);

// Per-step rewards.
double flow_reward(const WorldState& w, const RoadNetwork& net,
                   const FlowRewardSpec& spec);
double avg_speed_reward(const WorldState& w, double v_max);
double outflow_reward(const StepEvents& events);
// Exit bonus at the leaving step, otherwise mixed time penalty / global speed.
double distributed_reward(int agent_id, const WorldState& w, const StepEvents& events,
                          const DistributedMixedSpec& spec, double v_max);

struct CiStat {
    double mean = 0.0;
    double ci95 = 0.0;  // halfwidth
};

CiStat aggregate_ci(std::span<const double> values);  // needs >= 2 values

struct MetricsReport {
    CiStat outflow;    // veh/h
    CiStat inflow;     // veh/h
    CiStat avg_speed;  // m/s
    int n_episodes = 0;
};

MetricsReport metrics_over(std::span<const EpisodeLog> logs);

}  // namespace mergesim
