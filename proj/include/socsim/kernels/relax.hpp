// Parallel-sweep relaxation of threshold lattices (sandpile and spring-block).
//
// One sweep: every currently unstable site topples at once. A toppling site
// keeps `residual(v)` and each of its four von Neumann neighbours receives
// `share(shed(v))`; shares crossing the open edge are lost. New values are
// computed by gathering from the old configuration, so a sweep is independent
// of traversal order and the per-site arithmetic is identical in every
// implementation below. That is what makes the parallel and reference
// kernels bitwise interchangeable, including for floating-point forces.
//
// `relax` is the production kernel: it tracks the active frontier and spreads
// the gather over OpenMP threads once the frontier is large. `relax_reference`
// rescans the whole lattice every sweep and is kept for tests and benchmarks.

#pragma once

#include <algorithm>
#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "socsim/cascade.hpp"
#include "socsim/errors.hpp"
#include "socsim/grid.hpp"
#include "socsim/rng.hpp"

namespace soc::kernels {

template <typename R>
concept ToppleRule = requires(const R rule, typename R::value_type v, Rng& rng) {
    { rule.unstable(v) } -> std::convertible_to<bool>;
    { rule.shed(v) } -> std::convertible_to<typename R::value_type>;
    { rule.residual(v, rng) } -> std::convertible_to<typename R::value_type>;
    { rule.share(v) } -> std::convertible_to<typename R::value_type>;
};

struct RelaxLimits {
    std::uint64_t sweep_cap = 10'000'000;
    /// Frontier size from which the gather runs on the OpenMP team.
    std::size_t parallel_threshold = 4096;
};

/// Accumulates the observables of one cascade while sweeps are applied.
class EventBuilder {
public:
    explicit EventBuilder(CascadeEvent& event) : event_(event) {}

    void begin_step(std::size_t expected) { event_.steps.emplace_back().reserve(expected); }
    void slip(Coord site, double amount, double lost, bool first_visit) {
        event_.steps.back().push_back({site, amount});
        ++event_.size;
        if (first_visit) ++event_.area;
        event_.boundary_loss += lost;
    }
    void end_step() { event_.duration = event_.steps.size(); }

private:
    CascadeEvent& event_;
};

namespace detail {

enum : std::uint8_t { kNorth = 1, kSouth = 2, kWest = 4, kEast = 8 };

// Bitmask of the in-lattice neighbours of every site.
inline std::vector<std::uint8_t> neighbour_masks(int rows, int cols) {
    std::vector<std::uint8_t> masks(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            masks[static_cast<std::size_t>(r) * cols + c] = static_cast<std::uint8_t>(
                (r > 0 ? kNorth : 0) | (r < rows - 1 ? kSouth : 0) | (c > 0 ? kWest : 0) |
                (c < cols - 1 ? kEast : 0));
    return masks;
}

inline int missing_neighbours(std::uint8_t mask) { return 4 - std::popcount(mask); }

// `share` is zero at every site that is not toppling, so the neighbour terms
// need no branch on the toppling flag. Adding +0.0 leaves a value unchanged.
template <typename T>
inline T gather(std::size_t i, std::uint8_t mask, int cols, const T* values,
                const std::uint8_t* toppling, const T* residual, const T* share) {
    T v = toppling[i] ? residual[i] : values[i];
    if (mask & kNorth) v += share[i - cols];
    if (mask & kSouth) v += share[i + cols];
    if (mask & kWest) v += share[i - 1];
    if (mask & kEast) v += share[i + 1];
    return v;
}

inline void bump_epoch(std::vector<std::uint32_t>& stamps, std::uint32_t& epoch) {
    if (++epoch == 0) {
        std::fill(stamps.begin(), stamps.end(), 0u);
        epoch = 1;
    }
}

[[noreturn]] inline void diverged(std::uint64_t cap) {
    throw DivergenceError("relaxation exceeded the sweep cap of " + std::to_string(cap) +
                          " sweeps");
}

}  // namespace detail

/// Scratch storage reused across cascades on one lattice.
template <typename T>
struct RelaxWorkspace {
    std::vector<std::uint8_t> toppling;
    std::vector<T> residual;
    std::vector<T> share;
    std::vector<T> fresh;
    std::vector<std::uint32_t> visited;
    std::uint32_t visited_epoch = 0;
    std::vector<std::uint8_t> masks;
    std::vector<Coord> coords;
    std::vector<std::size_t> topplers;
    std::vector<std::size_t> affected;

    int rows = -1;
    int cols = -1;

    void ensure(int r, int c) {
        if (r == rows && c == cols) return;
        rows = r;
        cols = c;
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        masks = detail::neighbour_masks(rows, cols);
        coords.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            coords[i] = {static_cast<int>(i / cols), static_cast<int>(i % cols)};
        toppling.assign(n, 0);
        residual.assign(n, T{});
        share.assign(n, T{});
        visited.assign(n, 0);
        visited_epoch = 0;
    }
};

/// Relaxes `grid` to stability starting from the unstable sites among
/// `candidates`, which must be row-major sorted and free of duplicates.
/// Sites outside `candidates` are assumed stable.
template <ToppleRule Rule>
void relax(Grid<typename Rule::value_type>& grid, const Rule& rule, Rng& rng,
           std::vector<std::size_t> candidates, RelaxWorkspace<typename Rule::value_type>& ws,
           const RelaxLimits& limits, CascadeEvent& event) {
    using T = typename Rule::value_type;
    const int rows = grid.rows();
    const int cols = grid.cols();
    ws.ensure(rows, cols);
    EventBuilder builder(event);
    detail::bump_epoch(ws.visited, ws.visited_epoch);

    auto& topplers = ws.topplers;
    topplers.clear();
    for (std::size_t i : candidates)
        if (rule.unstable(grid[i])) topplers.push_back(i);

    std::uint64_t sweeps = 0;
    while (!topplers.empty()) {
        if (sweeps++ >= limits.sweep_cap) detail::diverged(limits.sweep_cap);

        // Serial pass in row-major order: residual draws consume the generator.
        builder.begin_step(topplers.size());
        auto& affected = ws.affected;
        affected.clear();
        for (std::size_t i : topplers) {
            const T v = grid[i];
            const T shed = rule.shed(v);
            ws.toppling[i] = 1;
            ws.residual[i] = rule.residual(v, rng);
            ws.share[i] = rule.share(shed);
            const std::uint8_t mask = ws.masks[i];
            const bool first = ws.visited[i] != ws.visited_epoch;
            ws.visited[i] = ws.visited_epoch;
            builder.slip(ws.coords[i], static_cast<double>(shed),
                         static_cast<double>(ws.share[i]) * detail::missing_neighbours(mask),
                         first);
            // Duplicates are harmless: the gather reads only the old configuration.
            affected.push_back(i);
            if (mask & detail::kNorth) affected.push_back(i - cols);
            if (mask & detail::kSouth) affected.push_back(i + cols);
            if (mask & detail::kWest) affected.push_back(i - 1);
            if (mask & detail::kEast) affected.push_back(i + 1);
        }
        builder.end_step();

        ws.fresh.resize(affected.size());
        const std::size_t* aff = affected.data();
        const std::uint8_t* masks = ws.masks.data();
        T* fresh = ws.fresh.data();
        const T* values = grid.values().data();
        const std::uint8_t* flags = ws.toppling.data();
        const T* residual = ws.residual.data();
        const T* share = ws.share.data();
        const std::ptrdiff_t n_aff = static_cast<std::ptrdiff_t>(affected.size());
        if (affected.size() >= limits.parallel_threshold) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t k = 0; k < n_aff; ++k)
                fresh[k] = detail::gather(aff[k], masks[aff[k]], cols, values, flags, residual, share);
        } else {
            for (std::ptrdiff_t k = 0; k < n_aff; ++k)
                fresh[k] = detail::gather(aff[k], masks[aff[k]], cols, values, flags, residual, share);
        }

        for (std::size_t i : topplers) {
            ws.toppling[i] = 0;
            ws.share[i] = T{};
        }
        topplers.clear();
        for (std::size_t k = 0; k < affected.size(); ++k) {
            grid[affected[k]] = fresh[k];
            if (rule.unstable(fresh[k])) topplers.push_back(affected[k]);
        }
        std::sort(topplers.begin(), topplers.end());
        topplers.erase(std::unique(topplers.begin(), topplers.end()), topplers.end());
    }
}

/// Dense serial reference: rescans the full lattice each sweep.
template <ToppleRule Rule>
void relax_reference(Grid<typename Rule::value_type>& grid, const Rule& rule, Rng& rng,
                     const RelaxLimits& limits, CascadeEvent& event) {
    using T = typename Rule::value_type;
    const int rows = grid.rows();
    const int cols = grid.cols();
    const std::size_t n = grid.size();
    std::vector<std::uint8_t> toppling(n);
    std::vector<T> residual(n), share(n), next(n);  // share stays zero off toppling sites
    std::vector<std::uint8_t> visited(n, 0);
    const auto masks = detail::neighbour_masks(rows, cols);
    EventBuilder builder(event);

    for (std::uint64_t sweeps = 0;; ++sweeps) {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            toppling[i] = rule.unstable(grid[i]) ? 1 : 0;
            any = any || toppling[i];
        }
        if (!any) return;
        if (sweeps >= limits.sweep_cap) detail::diverged(limits.sweep_cap);

        builder.begin_step(0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!toppling[i]) continue;
            const T shed = rule.shed(grid[i]);
            residual[i] = rule.residual(grid[i], rng);
            share[i] = rule.share(shed);
            const Coord c = grid.coord(i);
            builder.slip(c, static_cast<double>(shed),
                         static_cast<double>(share[i]) * detail::missing_neighbours(masks[i]),
                         !visited[i]);
            visited[i] = 1;
        }
        builder.end_step();

        for (std::size_t i = 0; i < n; ++i)
            next[i] = detail::gather(i, masks[i], cols, grid.values().data(), toppling.data(),
                                     residual.data(), share.data());
        for (std::size_t i = 0; i < n; ++i) {
            grid[i] = next[i];
            share[i] = T{};
        }
    }
}

}  // namespace soc::kernels
