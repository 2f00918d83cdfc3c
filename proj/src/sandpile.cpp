#include "socsim/sandpile.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "socsim/errors.hpp"

namespace soc {

Sandpile::Sandpile(int width, int height, int z_c, std::uint64_t seed) : rng_(seed) {
    if (width < 1 || height < 1)
        throw ConfigError("sandpile dimensions must be positive, got " + std::to_string(width) +
                          "x" + std::to_string(height));
    if (z_c < 1) throw ConfigError("toppling threshold z_c must be >= 1");
    z_ = Grid<std::int32_t>(height, width, 0);
    rule_.threshold = z_c;
}

Sandpile Sandpile::from_grid(Grid<std::int32_t> z, int z_c, std::uint64_t seed) {
    Sandpile pile(z.cols(), z.rows(), z_c, seed);
    for (std::int32_t v : z.values()) {
        if (v < 0 || v >= z_c) throw ConfigError("sandpile configuration is not stable");
        pile.total_ += v;
    }
    pile.z_ = std::move(z);
    return pile;
}

Coord Sandpile::random_site() {
    const auto i = rng_.below(z_.size());
    return z_.coord(static_cast<std::size_t>(i));
}

double Sandpile::mean_height() const {
    return static_cast<double>(total_) / static_cast<double>(z_.size());
}

CascadeEvent Sandpile::start_event(Coord site) {
    if (!z_.contains(site))
        throw DomainError("site (" + std::to_string(site.row) + ", " + std::to_string(site.col) +
                          ") is outside the " + std::to_string(height()) + "x" +
                          std::to_string(width()) + " grid");
    CascadeEvent ev;
    ev.event_id = next_id_++;
    ev.trigger_site = site;
    z_.at(site) += 1;
    total_ += 1;
    return ev;
}

void Sandpile::finish_event(CascadeEvent& ev) {
    // Grains toppled inside the lattice beyond the four shares (z_c > 4) are
    // removed as well; only off-grid shares count toward boundary_loss.
    const auto excess = static_cast<std::int64_t>(rule_.threshold - 4);
    total_ -= static_cast<std::int64_t>(ev.boundary_loss) + excess * static_cast<std::int64_t>(ev.size);
    ev.magnitude = pile_magnitude(ev.size);
}

CascadeEvent Sandpile::add_grain(Coord site) {
    CascadeEvent ev = start_event(site);
    kernels::relax(z_, rule_, rng_, {z_.index(site)}, ws_, limits_, ev);
    finish_event(ev);
    return ev;
}

CascadeEvent Sandpile::add_grain_reference(Coord site) {
    CascadeEvent ev = start_event(site);
    kernels::relax_reference(z_, rule_, rng_, limits_, ev);
    finish_event(ev);
    return ev;
}

std::vector<CascadeEvent> Sandpile::drive(std::uint64_t n) {
    std::vector<CascadeEvent> events;
    events.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) events.push_back(add_grain(random_site()));
    return events;
}

// ---------------------------------------------------------------------------

OsloPile::OsloPile(int length, std::uint64_t seed) : rng_(seed) {
    if (length < 1) throw ConfigError("Oslo pile length must be >= 1");
    h_.assign(length, 0);
    sc_.resize(length);
    for (auto& s : sc_) s = draw_slope();
}

OsloPile OsloPile::from_state(std::vector<std::int32_t> heights,
                              std::vector<std::int32_t> critical_slopes, std::uint64_t seed) {
    if (heights.empty() || heights.size() != critical_slopes.size())
        throw ConfigError("Oslo pile needs equally sized, non-empty height and slope arrays");
    OsloPile pile;
    pile.rng_.reseed(seed);
    pile.h_ = std::move(heights);
    pile.sc_ = std::move(critical_slopes);
    for (int i = 0; i < pile.length(); ++i) {
        if (pile.h_[i] < 0) throw ConfigError("Oslo heights must be non-negative");
        if (pile.sc_[i] != 1 && pile.sc_[i] != 2)
            throw ConfigError("Oslo critical slopes must be 1 or 2");
        if (pile.slope(i) > pile.sc_[i]) throw ConfigError("Oslo configuration is not stable");
    }
    return pile;
}

std::int64_t OsloPile::total_grains() const {
    return std::accumulate(h_.begin(), h_.end(), std::int64_t{0});
}

std::int32_t OsloPile::slope(int i) const {
    const std::int32_t right = (i + 1 < length()) ? h_[i + 1] : 0;
    return h_[i] - right;
}

CascadeEvent OsloPile::add_grain() {
    CascadeEvent ev;
    ev.event_id = next_id_++;
    ev.trigger_site = {0, 0};
    h_[0] += 1;

    const int n = length();
    visited_.assign(n, 0);
    kernels::EventBuilder builder(ev);
    // Only columns 0 and their neighbours can change, so scan a moving window.
    int lo = 0;
    int hi = std::min(n - 1, 1);
    std::uint64_t sweeps = 0;
    for (;;) {
        topplers_.clear();
        for (int i = std::max(0, lo - 1); i <= std::min(n - 1, hi + 1); ++i)
            if (slope(i) > sc_[i]) topplers_.push_back(i);
        if (topplers_.empty()) break;
        if (sweeps++ >= sweep_cap_) kernels::detail::diverged(sweep_cap_);

        builder.begin_step(topplers_.size());
        for (int i : topplers_) {
            const bool exits = (i == n - 1);
            builder.slip({0, i}, 1.0, exits ? 1.0 : 0.0, !visited_[i]);
            visited_[i] = 1;
        }
        builder.end_step();
        // Moves are simultaneous: slopes were evaluated on the old heights above.
        for (int i : topplers_) {
            h_[i] -= 1;
            if (i + 1 < n) h_[i + 1] += 1;
        }
        for (int i : topplers_) sc_[i] = draw_slope();
        lo = topplers_.front();
        hi = topplers_.back() + 1;
    }
    ev.magnitude = pile_magnitude(ev.size);
    return ev;
}

std::vector<CascadeEvent> OsloPile::drive(std::uint64_t n) {
    std::vector<CascadeEvent> events;
    events.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) events.push_back(add_grain());
    return events;
}

// ---------------------------------------------------------------------------

void write_snapshot(std::ostream& out, const Sandpile& pile) {
    const auto& z = pile.grid();
    out << "sandpile " << pile.width() << ' ' << pile.height() << ' ' << pile.threshold() << '\n';
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) out << (c ? " " : "") << z.at({r, c});
        out << '\n';
    }
}

Sandpile read_sandpile_snapshot(std::istream& in, std::uint64_t seed) {
    std::string tag;
    int width = 0, height = 0, z_c = 0;
    if (!(in >> tag >> width >> height >> z_c) || tag != "sandpile")
        throw ParseError("expected header 'sandpile <width> <height> <z_c>'",
                         static_cast<std::size_t>(std::max<std::streamoff>(0, in.tellg())));
    if (width < 1 || height < 1) throw ConfigError("snapshot dimensions must be positive");
    Grid<std::int32_t> z(height, width);
    for (std::size_t i = 0; i < z.size(); ++i)
        if (!(in >> z[i])) throw ParseError("snapshot truncated", 0);
    return Sandpile::from_grid(std::move(z), z_c, seed);
}

void write_snapshot(std::ostream& out, const OsloPile& pile) {
    out << "oslo " << pile.length() << '\n';
    for (int i = 0; i < pile.length(); ++i) out << (i ? " " : "") << pile.heights()[i];
    out << '\n';
    for (int i = 0; i < pile.length(); ++i) out << (i ? " " : "") << pile.critical_slopes()[i];
    out << '\n';
}

}  // namespace soc
