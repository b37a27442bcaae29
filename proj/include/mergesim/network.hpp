#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mergesim {

enum class EdgeKind { MainPre = 0, Ramp = 1, PostMerge = 2 };
enum class RouteId { Main = 0, Ramp = 1 };

inline constexpr int kNumEdges = 3;
inline constexpr int kNumRoutes = 2;

const char* edge_kind_name(EdgeKind k);
const char* route_name(RouteId r);

struct Edge {
    std::string id;
    EdgeKind kind = EdgeKind::MainPre;
    double length = 0.0;       // m
    double speed_limit = 0.0;  // m/s
};

// Single-lane merge: main_pre_merge and ramp join into post_merge at a
// priority junction located at position 0 of post_merge.
struct RoadNetwork {
    std::array<Edge, kNumEdges> edges;  // indexed by EdgeKind

    const Edge& edge(EdgeKind k) const { return edges[static_cast<int>(k)]; }
    const Edge& edge_by_id(const std::string& id) const;  // throws on unknown id

    // Route edge sequences. Both routes end on post_merge.
    static const std::array<std::vector<EdgeKind>, kNumRoutes>& routes();
    static const std::vector<EdgeKind>& route_edges(RouteId r);

    double route_length(RouteId r) const;
    void validate() const;
};

// Remaining distance along the route to the merge junction; 0 once past it.
double distance_to_junction(const RoadNetwork& net, EdgeKind edge, double position);
double distance_to_junction(const RoadNetwork& net, const std::string& edge_id,
                            double position);

RoadNetwork build_simple_merge(double speed_limit = 30.0);
RoadNetwork build_i696_merge(double speed_limit = 30.0);
RoadNetwork build_custom_merge(double main_len, double ramp_len, double post_len,
                               double speed_limit);

// Control window around the junction, in route meters. A vehicle is inside
// when strictly less than start_offset before the junction or strictly less
// than end_offset past it, so {0, 0} is an empty window.
struct Window {
    double start_offset = 0.0;  // m before junction
    double end_offset = 0.0;    // m after junction
    bool operator==(const Window&) const = default;
};

struct ScenarioConfig {
    std::string name = "custom";
    RoadNetwork network;
    double main_inflow = 2000.0;  // veh/h
    double ramp_inflow = 200.0;   // veh/h
    double av_fraction = 0.1;
    int horizon = 2000;           // steps
    double dt = 0.5;              // s
    int n_av_max = 5;
    double h_max = 120.0;         // observation headway cap, m
    std::optional<Window> window;
    std::vector<std::uint64_t> seeds;  // optional evaluation seed list

    double speed_limit() const { return network.edge(EdgeKind::MainPre).speed_limit; }
    void validate() const;  // throws std::invalid_argument naming the violated invariant
};

bool window_contains(const Window& w, const RoadNetwork& net, EdgeKind edge,
                     double position);

// Key/value scenario file, one `key = value` pair per line, '#' comments.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin);
std::string serialize_scenario(const ScenarioConfig& cfg);

bool scenario_equal(const ScenarioConfig& a, const ScenarioConfig& b);

// "0..99" or "3,7,19" -> explicit list
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace mergesim
