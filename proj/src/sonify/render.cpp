#include "socsim/sonify/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "socsim/errors.hpp"

namespace soc::sonify {

namespace {

constexpr std::size_t kBlock = 4096;

// One scheduled grain, placed on the output timeline.
struct Placement {
    std::size_t start = 0;  // first output sample
    std::size_t count = 0;  // output samples covered
    std::size_t skip = 0;   // grain samples before time zero
    double step = 1.0;      // source samples per output sample
    double amplitude = 1.0;
    const float* source = nullptr;
    std::size_t length = 0;
};

std::size_t output_length(double seconds, int sample_rate) {
    const double x = seconds * sample_rate;
    const double r = std::nearbyint(x);
    if (std::abs(x - r) < 1e-6) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(x));
}

std::vector<double> hann(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n));
    return w;
}

struct Plan {
    std::size_t length = 0;
    std::vector<Placement> placements;
    std::vector<std::vector<double>> windows;  // keyed by grain length, see window_for
    std::vector<std::size_t> window_lengths;

    const std::vector<double>& window_for(std::size_t n) const {
        const auto it = std::find(window_lengths.begin(), window_lengths.end(), n);
        return windows[static_cast<std::size_t>(it - window_lengths.begin())];
    }
};

Plan make_plan(const GrainSchedule& schedule, const GrainCorpus& corpus, int sample_rate) {
    if (sample_rate <= 0) throw DomainError("render sample rate must be positive");
    if (!(schedule.total_duration >= 0.0) || !std::isfinite(schedule.total_duration))
        throw DomainError("schedule duration must be finite and >= 0");
    Plan plan;
    plan.length = output_length(schedule.total_duration, sample_rate);
    plan.placements.reserve(schedule.entries.size());
    for (const GrainEntry& e : schedule.entries) {
        if (e.grain_index >= corpus.grains.size()) throw DomainError("grain index outside the corpus");
        if (!(e.pitch_ratio > 0.0) || !std::isfinite(e.pitch_ratio)) throw DomainError("pitch_ratio must be > 0");
        if (!std::isfinite(e.amplitude) || !std::isfinite(e.onset)) throw DomainError("non-finite schedule entry");
        const Grain& g = corpus.grains[e.grain_index];
        Placement p;
        p.step = e.pitch_ratio * double(corpus.sample_rate) / double(sample_rate);
        p.amplitude = e.amplitude;
        p.source = corpus.samples.data() + g.offset;
        p.length = g.length;
        const double last = double(g.length - 1);
        std::size_t count = static_cast<std::size_t>(std::floor(last / p.step)) + 1;
        while (count > 1 && double(count - 1) * p.step > last) --count;
        const long long start = std::llround(e.onset * sample_rate);
        if (start < 0) {
            // Only the part after time zero is heard.
            const auto skip = static_cast<std::size_t>(-start);
            if (skip >= count) continue;
            p.skip = skip;
            p.count = count - skip;
        } else {
            p.start = static_cast<std::size_t>(start);
            p.count = count;
        }
        plan.placements.push_back(p);
        if (std::find(plan.window_lengths.begin(), plan.window_lengths.end(), g.length) ==
            plan.window_lengths.end()) {
            plan.window_lengths.push_back(g.length);
            plan.windows.push_back(hann(g.length));
        }
    }
    return plan;
}

inline double grain_sample(const Placement& p, const std::vector<double>& w, std::size_t m) {
    const double pos = double(m + p.skip) * p.step;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - double(i);
    const double a = w[i] * double(p.source[i]);
    if (frac == 0.0) return p.amplitude * a;
    const double b = w[i + 1] * double(p.source[i + 1]);
    return p.amplitude * (a + frac * (b - a));
}

std::vector<float> finish(const std::vector<double>& mix, double knee) {
    std::vector<float> out(mix.size());
    for (std::size_t n = 0; n < mix.size(); ++n) out[n] = static_cast<float>(soft_limit(mix[n], knee));
    return out;
}

}  // namespace

double soft_limit(double x, double knee) {
    const double a = std::abs(x);
    if (a <= knee) return x;
    const double y = knee + (1.0 - knee) * std::tanh((a - knee) / (1.0 - knee));
    return std::copysign(std::min(y, 1.0), x);
}

std::vector<float> render(const GrainSchedule& schedule, const GrainCorpus& corpus, int sample_rate,
                          double knee) {
    const Plan plan = make_plan(schedule, corpus, sample_rate);
    std::vector<double> mix(plan.length, 0.0);
    const std::size_t blocks = (plan.length + kBlock - 1) / kBlock;

    // Bucket placements by the blocks they touch, keeping schedule order so
    // every output sample sums its contributions in the same order as the
    // serial reference.
    std::vector<std::vector<std::size_t>> touching(blocks);
    for (std::size_t k = 0; k < plan.placements.size(); ++k) {
        const Placement& p = plan.placements[k];
        if (p.start >= plan.length) continue;
        const std::size_t end = std::min(plan.length, p.start + p.count);
        for (std::size_t b = p.start / kBlock; b * kBlock < end; ++b) touching[b].push_back(k);
    }

    const auto nblocks = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < nblocks; ++b) {
        const std::size_t lo = std::size_t(b) * kBlock;
        const std::size_t hi = std::min(plan.length, lo + kBlock);
        for (std::size_t k : touching[std::size_t(b)]) {
            const Placement& p = plan.placements[k];
            const auto& w = plan.window_for(p.length);
            const std::size_t from = std::max(lo, p.start);
            const std::size_t to = std::min(hi, p.start + p.count);
            for (std::size_t n = from; n < to; ++n) mix[n] += grain_sample(p, w, n - p.start);
        }
    }
    return finish(mix, knee);
}

std::vector<float> render_reference(const GrainSchedule& schedule, const GrainCorpus& corpus,
                                    int sample_rate, double knee) {
    const Plan plan = make_plan(schedule, corpus, sample_rate);
    std::vector<double> mix(plan.length, 0.0);
    for (const Placement& p : plan.placements) {
        const auto& w = plan.window_for(p.length);
        for (std::size_t m = 0; m < p.count && p.start + m < plan.length; ++m)
            mix[p.start + m] += grain_sample(p, w, m);
    }
    return finish(mix, knee);
}

}  // namespace soc::sonify
