#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mergesim/dynamics.hpp"
#include "mergesim/network.hpp"
#include "mergesim/rng.hpp"

namespace mergesim {
class RngStream;

struct Arrival {
    int scheduled_step = 0;
    RouteId route = RouteId::Main;
    VehClass cls = VehClass::Human;
    int id = -1;
};

// Episode arrival plan. AVs appear on the main route only, every
// floor(1/av_fraction)-th slot; headways carry a seeded uniform jitter.
struct InflowSchedule {
    std::vector<Arrival> arrivals;  // nondecreasing scheduled_step
    std::uint64_t rng_seed = 0;
};

InflowSchedule schedule_inflows(const ScenarioConfig& cfg, std::uint64_t seed);

struct StepEvents {
    int entries = 0;
    int exits = 0;
    std::vector<int> entered_ids;
    std::vector<int> exited_ids;
};

// Action commands keyed by vehicle id, sorted ascending by id.
using ActionMap = std::vector<std::pair<int, double>>;

const double* find_action(const ActionMap& m, int id);

struct Neighbor {
    const Vehicle* vehicle = nullptr;
    double gap = 0.0;  // net bumper gap, m
};

struct WorldState {
    int time = 0;
    // Vehicles per edge, sorted by position descending (front of edge first).
    std::array<std::vector<Vehicle>, kNumEdges> edge_vehicles;
    std::array<std::deque<Arrival>, kNumRoutes> entry_queues;
    std::size_t next_arrival = 0;
    long long cumulative_entered = 0;
    long long cumulative_exited = 0;

    int vehicle_count() const;
    double speed_sum() const;
    const Vehicle* find(int id) const;
    const std::vector<Vehicle>& on_edge(EdgeKind k) const {
        return edge_vehicles[static_cast<int>(k)];
    }

    // Nearest vehicle ahead/behind along the vehicle's own route; the search
    // continues across the junction. Gaps are net of vehicle length.
    std::optional<Neighbor> leader_of(const Vehicle& v, const RoadNetwork& net) const;
    std::optional<Neighbor> follower_of(const Vehicle& v, const RoadNetwork& net) const;
    // Leader seen from a route position (used for insertions at position 0).
    std::optional<Neighbor> leader_from(RouteId route, EdgeKind edge, double position,
                                        const RoadNetwork& net) const;
};

// Head-of-queue insertion attempt. The vehicle enters at position 0 of the
// route's first edge at min(speed_limit, safe speed) provided the gap admits
// the IDM equilibrium spacing for that speed; otherwise it stays queued.
bool try_insert(WorldState& w, RouteId route, const ScenarioConfig& cfg,
                const IdmParams& idm, const ActionBounds& bounds);

// One world step: queue release + insertion, IDM/commanded accelerations
// through the clamp chain, junction arbitration, integration, exit
// accounting. Throws if an action references an unknown or uncontrolled id.
StepEvents step(WorldState& w, const InflowSchedule& sched, const ActionMap& actions,
                const ScenarioConfig& cfg, const IdmParams& idm,
                const ActionBounds& bounds);

struct VehicleRecord {
    int id = -1;
    VehClass cls = VehClass::Human;
    RouteId route = RouteId::Main;
    int entry_time = 0;
    std::optional<int> exit_time;
};

struct EpisodeLog {
    int horizon = 0;
    double dt = 0.0;
    double v_max = 0.0;
    std::vector<int> n;           // vehicles in network after each step
    std::vector<double> sum_speed;
    std::vector<int> entries;
    std::vector<int> exits;
    std::vector<VehicleRecord> vehicles;  // entered vehicles, by id
    long long total_entered = 0;
    long long total_exited = 0;
    long long scheduled_arrivals = 0;

    int steps() const { return static_cast<int>(n.size()); }
    std::string to_csv() const;
    bool operator==(const EpisodeLog& other) const;
};

class Controller {
public:
    virtual ~Controller() = default;
    // Acceleration commands for controlled AVs; vehicles without a command
    // fall back to IDM.
    virtual ActionMap act(const WorldState& w, const ScenarioConfig& cfg,
                          RngStream& rng) = 0;
};

struct EpisodeObserver {
    virtual ~EpisodeObserver() = default;
    virtual void on_step(const WorldState& after, const StepEvents& events,
                         const ScenarioConfig& cfg) = 0;
};

EpisodeLog run_episode(Controller& controller, const ScenarioConfig& cfg,
                       std::uint64_t seed, EpisodeObserver* observer = nullptr);

}  // namespace mergesim
