#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mergesim/rewards.hpp"

namespace mergesim {

std::uint64_t fnv1a64(const std::string& data);
std::string hash_hex(const std::string& data);
std::string hash_file_hex(const std::string& path);  // empty string if missing

// write-to-temp + rename
void atomic_write_file(const std::string& path, const std::string& content);

std::string format_ci(const CiStat& s);

struct ResultRow {
    std::string label;
    MetricsReport metrics;
};

// Text table mirroring the reward-comparison layout: label, outflow, inflow,
// average speed, each mean +/- CI halfwidth.
std::string render_table(const std::vector<ResultRow>& rows);
std::string render_csv(const std::vector<ResultRow>& rows);

}  // namespace mergesim
