#pragma once

#include <cstdint>
#include <vector>

namespace soc {

struct Coord {
    int row = 0;
    int col = 0;
    friend bool operator==(const Coord&, const Coord&) = default;
};

/// One toppling or slip inside a relaxation sweep.
struct Slip {
    Coord site;
    double amount = 0.0;  // grains shed (piles) or force released (blocks)
    friend bool operator==(const Slip&, const Slip&) = default;
};

using Step = std::vector<Slip>;

/// One avalanche or quake, from a single drive increment to full stability.
///
/// `steps` holds one entry per parallel sweep; each entry lists its slips in
/// row-major order. `moment` is the total released force and is only
/// meaningful for the spring-block model (zero for the piles).
struct CascadeEvent {
    std::uint64_t event_id = 0;
    Coord trigger_site;
    std::vector<Step> steps;
    std::uint64_t size = 0;
    std::uint64_t area = 0;
    std::uint64_t duration = 0;
    double boundary_loss = 0.0;
    double magnitude = 0.0;
    double moment = 0.0;

    friend bool operator==(const CascadeEvent&, const CascadeEvent&) = default;
};

/// log10(max(size, 1)).
double pile_magnitude(std::uint64_t size);

/// (2/3) log10(moment / moment0); zero for an empty quake.
double quake_magnitude(double moment, double moment0);

}  // namespace soc
