#include "socsim/springblock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "socsim/errors.hpp"

namespace soc {

namespace {

void validate(const SpringBlockParams& p) {
    if (p.size < 2) throw ConfigError("spring-block lattice side L must be >= 2");
    if (!(p.alpha > 0.0 && p.alpha <= 0.25))
        throw ConfigError("alpha must lie in (0, 0.25], got " + std::to_string(p.alpha));
    if (!(p.residual_noise >= 0.0 && p.residual_noise < 1.0))
        throw ConfigError("residual_noise must lie in [0, 1)");
    if (!(p.rate_scale >= 0.0) || !std::isfinite(p.rate_scale))
        throw ConfigError("rate_scale must be finite and non-negative");
}

}  // namespace

SpringBlock::SpringBlock(const SpringBlockParams& params, std::uint64_t seed) : rng_(seed) {
    validate(params);
    rule_ = {kThreshold, params.alpha, params.residual_noise};
    rate_scale_ = params.rate_scale;
    f_ = Grid<double>(params.size, params.size);
    for (double& f : f_.values()) f = kThreshold * rng_.uniform();
}

SpringBlock SpringBlock::from_forces(Grid<double> forces, const SpringBlockParams& params,
                                     std::uint64_t seed) {
    if (forces.rows() != forces.cols()) throw ConfigError("spring-block lattice must be square");
    SpringBlockParams p = params;
    p.size = forces.rows();
    SpringBlock model(p, seed);
    for (double f : forces.values())
        if (!(f >= 0.0 && f < kThreshold)) throw ConfigError("forces must lie in [0, F_th)");
    model.f_ = std::move(forces);
    return model;
}

double SpringBlock::total_force() const {
    double sum = 0.0;
    for (double f : f_.values()) sum += f;
    return sum;
}

double SpringBlock::max_force() const { return kernels::max_value(f_.values()); }

std::vector<std::size_t> SpringBlock::load(double dF, bool pin_maximum, double maximum) {
    std::vector<std::size_t> candidates;
    double* f = f_.values().data();
    const std::size_t n = f_.size();
    if (pin_maximum) {
        // Rounding must not leave the extremal block a hair under threshold.
        for (std::size_t i = 0; i < n; ++i) f[i] = (f[i] == maximum) ? kThreshold : f[i] + dF;
    } else {
        for (std::size_t i = 0; i < n; ++i) f[i] += dF;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (f[i] >= kThreshold) candidates.push_back(i);
    return candidates;
}

void SpringBlock::finish(CascadeEvent& ev) const {
    ev.moment = 0.0;
    for (const auto& step : ev.steps)
        for (const auto& s : step) ev.moment += s.amount;
    ev.magnitude = quake_magnitude(ev.moment, kThreshold);
}

CascadeEvent SpringBlock::load_step(double dF) {
    if (!(dF >= 0.0) || !std::isfinite(dF))
        throw DomainError("plate increment must be finite and non-negative");
    CascadeEvent ev;
    ev.event_id = next_id_++;
    auto candidates = load(dF, false, 0.0);
    if (!candidates.empty()) ev.trigger_site = f_.coord(candidates.front());
    kernels::relax(f_, rule_, rng_, std::move(candidates), ws_, limits_, ev);
    finish(ev);
    return ev;
}

CascadeEvent SpringBlock::load_step_reference(double dF) {
    if (!(dF >= 0.0) || !std::isfinite(dF))
        throw DomainError("plate increment must be finite and non-negative");
    CascadeEvent ev;
    ev.event_id = next_id_++;
    auto candidates = load(dF, false, 0.0);
    if (!candidates.empty()) ev.trigger_site = f_.coord(candidates.front());
    kernels::relax_reference(f_, rule_, rng_, limits_, ev);
    finish(ev);
    return ev;
}

CascadeEvent SpringBlock::drive_extremal() {
    const double top = max_force();
    CascadeEvent ev;
    ev.event_id = next_id_++;
    auto candidates = load(kThreshold - top, true, top);
    ev.trigger_site = f_.coord(candidates.front());
    kernels::relax(f_, rule_, rng_, std::move(candidates), ws_, limits_, ev);
    finish(ev);
    return ev;
}

double SpringBlock::set_plate_rate(double vx, double vy) {
    if (!std::isfinite(vx) || !std::isfinite(vy))
        throw DomainError("drive vector components must be finite");
    // sqrt is correctly rounded everywhere; hypot is not, and the rate feeds replay.
    const double rate = rate_scale_ * std::sqrt(vx * vx + vy * vy);
    if (!std::isfinite(rate)) throw DomainError("drive magnitude overflows");
    drive_ = {vx, vy};
    plate_rate_ = rate;
    return plate_rate_;
}

// ---------------------------------------------------------------------------

void write_snapshot(std::ostream& out, const SpringBlock& model) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", model.alpha());
    out << "springblock " << model.size() << ' ' << buf << '\n';
    const auto& f = model.forces();
    for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", f.at({r, c}));
            out << (c ? " " : "") << buf;
        }
        out << '\n';
    }
}

SpringBlock read_springblock_snapshot(std::istream& in, std::uint64_t seed) {
    std::string tag;
    int L = 0;
    double alpha = 0.0;
    if (!(in >> tag >> L >> alpha) || tag != "springblock")
        throw ParseError("expected header 'springblock <L> <alpha>'", 0);
    if (L < 2) throw ConfigError("snapshot lattice side must be >= 2");
    Grid<double> f(L, L);
    for (std::size_t i = 0; i < f.size(); ++i)
        if (!(in >> f[i])) throw ParseError("snapshot truncated", 0);
    SpringBlockParams p;
    p.alpha = alpha;
    return SpringBlock::from_forces(std::move(f), p, seed);
}

namespace kernels {

namespace {

// Four independent lanes break the compare dependency chain.
double max_serial(const double* v, std::size_t n) {
    const double lowest = -std::numeric_limits<double>::infinity();
    double m[4] = {lowest, lowest, lowest, lowest};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (int l = 0; l < 4; ++l) m[l] = v[i + l] > m[l] ? v[i + l] : m[l];
    for (; i < n; ++i) m[0] = v[i] > m[0] ? v[i] : m[0];
    return std::max(std::max(m[0], m[1]), std::max(m[2], m[3]));
}

}  // namespace

double max_value(std::span<const double> values, std::size_t parallel_threshold) {
    if (values.size() < parallel_threshold) return max_serial(values.data(), values.size());
    double best = -std::numeric_limits<double>::infinity();
    const double* v = values.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for reduction(max : best) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) best = v[i] > best ? v[i] : best;
    return best;
}

double max_value_reference(std::span<const double> values) {
    return *std::max_element(values.begin(), values.end());
}

}  // namespace kernels

}  // namespace soc
