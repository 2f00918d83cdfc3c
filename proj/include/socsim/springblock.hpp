// Quasi-static spring-block lattice (Olami-Feder-Christensen cellular automaton).
//
// Forces are in units of the failure threshold. The plate pulls every block
// uniformly; a block with F >= F_th slips, passes alpha * F to each of its
// four neighbours and drops to zero (or to a small random residual when
// `residual_noise` > 0). Shares leaving the lattice are dissipated.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>

#include "socsim/cascade.hpp"
#include "socsim/grid.hpp"
#include "socsim/kernels/relax.hpp"
#include "socsim/rng.hpp"

namespace soc {

struct OfcRule {
    using value_type = double;
    double threshold = 1.0;
    double alpha = 0.25;
    double residual_noise = 0.0;

    bool unstable(double f) const { return f >= threshold; }
    double shed(double f) const { return f; }
    double residual(double, Rng& rng) const {
        return residual_noise > 0.0 ? residual_noise * rng.uniform() : 0.0;
    }
    double share(double released) const { return alpha * released; }
};

struct SpringBlockParams {
    int size = 5;
    double alpha = 0.25;
    double residual_noise = 0.0;
    double rate_scale = 0.01;  // plate rate per unit of drive-vector norm
};

class SpringBlock {
public:
    static constexpr double kThreshold = 1.0;

    /// Throws ConfigError for L < 2, alpha outside (0, 0.25] or a negative noise level.
    SpringBlock(const SpringBlockParams& params, std::uint64_t seed);
    SpringBlock(int L, double alpha, std::uint64_t seed)
        : SpringBlock(SpringBlockParams{L, alpha}, seed) {}

    /// Adopts explicit forces; each must lie in [0, F_th).
    static SpringBlock from_forces(Grid<double> forces, const SpringBlockParams& params,
                                   std::uint64_t seed = 0);

    int size() const { return f_.rows(); }
    double alpha() const { return rule_.alpha; }
    double threshold() const { return kThreshold; }
    double plate_rate() const { return plate_rate_; }
    double rate_scale() const { return rate_scale_; }
    const std::array<double, 2>& drive_vector() const { return drive_; }
    const Grid<double>& forces() const { return f_; }
    const Rng& rng() const { return rng_; }
    double total_force() const;
    double max_force() const;

    /// Raises every force by dF >= 0, then relaxes. Throws DomainError for negative or
    /// non-finite dF.
    CascadeEvent load_step(double dF);

    /// Loads exactly until the most loaded block fails.
    CascadeEvent drive_extremal();

    /// plate_rate := rate_scale * |v|. Returns the new rate.
    double set_plate_rate(double vx, double vy);

    /// One session tick: load_step(plate_rate).
    CascadeEvent tick() { return load_step(plate_rate_); }

    /// load_step relaxed by the dense serial reference kernel.
    CascadeEvent load_step_reference(double dF);

    kernels::RelaxLimits& limits() { return limits_; }

    friend bool operator==(const SpringBlock& a, const SpringBlock& b) {
        return a.f_ == b.f_ && a.rng_ == b.rng_ && a.plate_rate_ == b.plate_rate_;
    }

private:
    std::vector<std::size_t> load(double dF, bool pin_maximum, double maximum);
    void finish(CascadeEvent& ev) const;

    Grid<double> f_;
    OfcRule rule_;
    double plate_rate_ = 0.0;
    double rate_scale_ = 0.01;
    std::array<double, 2> drive_{0.0, 0.0};
    Rng rng_;
    std::uint64_t next_id_ = 0;
    kernels::RelaxLimits limits_;
    kernels::RelaxWorkspace<double> ws_;
};

/// Text snapshot: `springblock <L> <alpha>` then one line of forces per row.
void write_snapshot(std::ostream& out, const SpringBlock& model);
SpringBlock read_springblock_snapshot(std::istream& in, std::uint64_t seed = 0);

namespace kernels {
/// Largest value; OpenMP max-reduction on large lattices.
double max_value(std::span<const double> values, std::size_t parallel_threshold = 1 << 14);
double max_value_reference(std::span<const double> values);
}  // namespace kernels

}  // namespace soc
