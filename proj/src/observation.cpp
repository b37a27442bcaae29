#include "mergesim/observation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mergesim {

FeatureSet FeatureSet::parse(const std::string& text) {
    if (text == "full") return full();
    if (text == "none" || text.empty()) return none();
    FeatureSet fs;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(',', start);
        std::string tok = text.substr(
            start, end == std::string::npos ? std::string::npos : end - start);
        if (tok == "dist") fs.dist = true;
        else if (tok == "merge") fs.merge_info = true;
        else if (tok == "congestion") fs.congestion = true;
        else if (!tok.empty())
            throw std::invalid_argument("unknown feature: " + tok);
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return fs;
}

std::string FeatureSet::to_string() const {
    if (dist && merge_info && congestion) return "full";
    if (!dist && !merge_info && !congestion) return "none";
    std::string s;
    auto add = [&](const char* name) {
        if (!s.empty()) s += ',';
        s += name;
    };
    if (dist) add("dist");
    if (merge_info) add("merge");
    if (congestion) add("congestion");
    return s;
}

void CentralizedRoster::update(const WorldState& w, const EligibilityFn& eligible) {
    auto is_eligible = [&](const Vehicle& v) {
        if (!v.controlled) return false;
        return !eligible || eligible(v, w);
    };
    // drop ids that left the network or the eligibility set
    for (int& slot : slots_) {
        if (slot < 0) continue;
        const Vehicle* v = w.find(slot);
        if (!v || !is_eligible(*v)) slot = -1;
    }
    // oldest unassigned eligible AVs fill free slots, lowest slot first
    std::vector<const Vehicle*> candidates;
    for (const auto& lane : w.edge_vehicles)
        for (const auto& v : lane)
            if (is_eligible(v) && slot_of(v.id) < 0) candidates.push_back(&v);
    std::sort(candidates.begin(), candidates.end(),
              [](const Vehicle* a, const Vehicle* b) {
                  if (a->entry_time != b->entry_time)
                      return a->entry_time < b->entry_time;
                  return a->id < b->id;
              });
    std::size_t next = 0;
    for (int& slot : slots_) {
        if (slot >= 0 || next >= candidates.size()) continue;
        slot = candidates[next++]->id;
    }
}

int CentralizedRoster::slot_of(int vehicle_id) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i] == vehicle_id) return static_cast<int>(i);
    return -1;
}

void local_state_5(const Vehicle& v, const WorldState& w, const RoadNetwork& net,
                   const NormConstants& norms, double* out) {
    auto norm_speed = [&](double s) { return std::clamp(s / norms.v_max, 0.0, 1.0); };
    auto norm_gap = [&](double g) {
        return std::clamp(g, 0.0, norms.h_max) / norms.h_max;
    };
    out[0] = norm_speed(v.speed);
    auto leader = w.leader_of(v, net);
    out[1] = leader ? norm_speed(leader->vehicle->speed) : 1.0;
    out[2] = leader ? norm_gap(leader->gap) : 1.0;
    auto follower = w.follower_of(v, net);
    out[3] = follower ? norm_speed(follower->vehicle->speed) : 1.0;
    out[4] = follower ? norm_gap(follower->gap) : 1.0;
}

std::vector<double> centralized_state(const WorldState& w,
                                      const CentralizedRoster& roster, int n_av,
                                      const RoadNetwork& net,
                                      const NormConstants& norms) {
    std::vector<double> state(static_cast<std::size_t>(kLocalStateDim) * n_av, 0.0);
    const auto& slots = roster.slots();
    for (int i = 0; i < n_av && i < static_cast<int>(slots.size()); ++i) {
        if (slots[i] < 0) continue;
        const Vehicle* v = w.find(slots[i]);
        if (!v) continue;
        local_state_5(*v, w, net, norms, state.data() + i * kLocalStateDim);
    }
    return state;
}

std::vector<double> distributed_state(const Vehicle& v, const WorldState& w,
                                      const FeatureSet& features,
                                      const RoadNetwork& net,
                                      const NormConstants& norms) {
    std::vector<double> state(kLocalStateDim + features.extra_dims());
    local_state_5(v, w, net, norms, state.data());
    std::size_t k = kLocalStateDim;
    double d_next = distance_to_junction(net, v.edge, v.position);
    if (features.dist) state[k++] = std::clamp(d_next / norms.d_max, 0.0, 1.0);
    if (features.merge_info) {
        const auto& ramp = w.on_edge(EdgeKind::Ramp);
        if (!ramp.empty()) {
            const Vehicle& m = ramp.front();  // nearest to the junction
            state[k++] = std::clamp(m.speed / norms.v_max, 0.0, 1.0);
            double dm = distance_to_junction(net, m.edge, m.position);
            state[k++] = std::clamp(dm / norms.d_max, 0.0, 1.0);
        } else {
            state[k++] = 1.0;
            state[k++] = 1.0;
        }
    }
    if (features.congestion) {
        // mean speed of vehicles strictly between the AV and the junction on
        // its own approach; the AV itself is excluded
        double sum = 0.0;
        int count = 0;
        if (v.edge != EdgeKind::PostMerge) {
            for (const auto& u : w.on_edge(v.edge)) {
                if (u.position > v.position) {
                    sum += u.speed;
                    ++count;
                }
            }
        }
        state[k++] =
            count == 0 ? 1.0 : std::clamp(sum / count / norms.v_max, 0.0, 1.0);
    }
    return state;
}

}  // namespace mergesim
