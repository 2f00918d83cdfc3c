// Bak-Tang-Wiesenfeld sandpile on an open-boundary square lattice, and the
// Oslo rice-pile (random critical slopes) driven from its left end.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "socsim/cascade.hpp"
#include "socsim/grid.hpp"
#include "socsim/kernels/relax.hpp"
#include "socsim/rng.hpp"

namespace soc {

/// Toppling rule of the BTW pile: shed z_c grains, one to each neighbour.
struct BtwRule {
    using value_type = std::int32_t;
    std::int32_t threshold = 4;

    bool unstable(std::int32_t z) const { return z >= threshold; }
    std::int32_t shed(std::int32_t) const { return threshold; }
    std::int32_t residual(std::int32_t z, Rng&) const { return z - threshold; }
    std::int32_t share(std::int32_t) const { return 1; }
};

class Sandpile {
public:
    /// Throws ConfigError unless width, height and z_c are all positive.
    Sandpile(int width, int height, int z_c = 4, std::uint64_t seed = 0);

    /// Adopts an explicit configuration; throws ConfigError if any site is unstable
    /// or negative.
    static Sandpile from_grid(Grid<std::int32_t> z, int z_c, std::uint64_t seed = 0);

    int width() const { return z_.cols(); }
    int height() const { return z_.rows(); }
    int threshold() const { return rule_.threshold; }
    std::int64_t total_grains() const { return total_; }
    const Grid<std::int32_t>& grid() const { return z_; }
    const Rng& rng() const { return rng_; }

    /// Drops one grain at `site` and relaxes. Throws DomainError off-grid.
    CascadeEvent add_grain(Coord site);

    /// Drops `n` grains at uniformly drawn sites.
    std::vector<CascadeEvent> drive(std::uint64_t n);

    /// Same as add_grain but relaxes with the dense reference kernel.
    CascadeEvent add_grain_reference(Coord site);

    Coord random_site();
    double mean_height() const;

    kernels::RelaxLimits& limits() { return limits_; }
    std::uint64_t events_emitted() const { return next_id_; }

    friend bool operator==(const Sandpile& a, const Sandpile& b) {
        return a.z_ == b.z_ && a.rule_.threshold == b.rule_.threshold && a.total_ == b.total_ &&
               a.rng_ == b.rng_;
    }

private:
    CascadeEvent start_event(Coord site);
    void finish_event(CascadeEvent& ev);

    Grid<std::int32_t> z_;
    BtwRule rule_;
    std::int64_t total_ = 0;
    Rng rng_;
    std::uint64_t next_id_ = 0;
    kernels::RelaxLimits limits_;
    kernels::RelaxWorkspace<std::int32_t> ws_;
};

/// Oslo model. Column heights h[0..L), h[L] = 0 beyond the open right edge.
/// Column i topples when h[i] - h[i+1] > s_c[i], passing one grain to i+1 and
/// redrawing s_c[i] from {1, 2}.
class OsloPile {
public:
    explicit OsloPile(int length, std::uint64_t seed = 0);
    static OsloPile from_state(std::vector<std::int32_t> heights,
                               std::vector<std::int32_t> critical_slopes, std::uint64_t seed = 0);

    int length() const { return static_cast<int>(h_.size()); }
    const std::vector<std::int32_t>& heights() const { return h_; }
    const std::vector<std::int32_t>& critical_slopes() const { return sc_; }
    std::int64_t total_grains() const;
    std::int32_t slope(int i) const;

    /// Adds a grain at column 0 and relaxes in parallel sweeps.
    CascadeEvent add_grain();
    std::vector<CascadeEvent> drive(std::uint64_t n);

    std::uint64_t& sweep_cap() { return sweep_cap_; }

    friend bool operator==(const OsloPile&, const OsloPile&) = default;

private:
    OsloPile() = default;
    std::int32_t draw_slope() { return 1 + static_cast<std::int32_t>(rng_.below(2)); }

    std::vector<std::int32_t> h_;
    std::vector<std::int32_t> sc_;
    Rng rng_;
    std::uint64_t next_id_ = 0;
    std::uint64_t sweep_cap_ = 10'000'000;
    std::vector<int> topplers_;
    std::vector<std::uint32_t> visited_;
};

/// Text snapshot: `sandpile <width> <height> <z_c>` then one line per row.
void write_snapshot(std::ostream& out, const Sandpile& pile);
Sandpile read_sandpile_snapshot(std::istream& in, std::uint64_t seed = 0);

/// Text snapshot: `oslo <length>`, then heights, then critical slopes.
void write_snapshot(std::ostream& out, const OsloPile& pile);

}  // namespace soc
