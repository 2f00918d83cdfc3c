#include "socsim/sonify/corpus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "socsim/errors.hpp"
#include "socsim/rng.hpp"

namespace soc::sonify {

namespace {

// FFTW's planner is not re-entrant; execution with new arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

class Analyzer {
public:
    Analyzer(std::size_t length, int sample_rate) : n_(length), sample_rate_(sample_rate) {
        window_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i)
            window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n_));
        auto in = buffer<double>(n_);
        auto out = buffer<fftw_complex>(n_ / 2 + 1);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), in.get(), out.get(), FFTW_ESTIMATE);
    }
    ~Analyzer() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    Analyzer(const Analyzer&) = delete;
    Analyzer& operator=(const Analyzer&) = delete;

    template <typename T>
    static std::unique_ptr<T[], FftwFree> buffer(std::size_t n) {
        return std::unique_ptr<T[], FftwFree>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
    }

    // `in` and `out` must come from buffer() so their alignment matches the plan.
    Descriptor run(const float* x, double* in, fftw_complex* out) const {
        Descriptor d;
        double energy = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            energy += double(x[i]) * double(x[i]);
            in[i] = window_[i] * double(x[i]);
        }
        d.rms = std::sqrt(energy / double(n_));
        fftw_execute_dft_r2c(plan_, in, out);

        const std::size_t bins = n_ / 2 + 1;
        const double df = double(sample_rate_) / double(n_);
        double mag_sum = 0.0, weighted = 0.0, log_sum = 0.0;
        bool has_zero = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double m = std::hypot(out[k][0], out[k][1]);
            mag_sum += m;
            weighted += m * double(k) * df;
            if (m > 0.0)
                log_sum += std::log(m);
            else
                has_zero = true;
        }
        if (mag_sum > 0.0) {
            d.centroid = weighted / mag_sum;
            const double mean = mag_sum / double(bins);
            d.flatness = has_zero ? 0.0 : std::min(1.0, std::exp(log_sum / double(bins)) / mean);
        }
        return d;
    }

private:
    std::size_t n_;
    int sample_rate_;
    std::vector<double> window_;
    fftw_plan plan_ = nullptr;
};

void check_offsets(std::span<const float> samples, std::span<const std::size_t> offsets,
                   std::size_t length) {
    if (length < 2) throw DomainError("grain length must be at least 2 samples");
    for (std::size_t off : offsets)
        if (off > samples.size() || samples.size() - off < length)
            throw DomainError("grain window outside the signal");
}

}  // namespace

namespace kernels {

std::vector<Descriptor> analyze_grains(std::span<const float> samples,
                                       std::span<const std::size_t> offsets, std::size_t length,
                                       int sample_rate) {
    check_offsets(samples, offsets, length);
    std::vector<Descriptor> out(offsets.size());
    const Analyzer analyzer(length, sample_rate);
    const auto count = static_cast<std::ptrdiff_t>(offsets.size());
#pragma omp parallel
    {
        auto in = Analyzer::buffer<double>(length);
        auto spectrum = Analyzer::buffer<fftw_complex>(length / 2 + 1);
#pragma omp for schedule(static)
        for (std::ptrdiff_t g = 0; g < count; ++g)
            out[g] = analyzer.run(samples.data() + offsets[g], in.get(), spectrum.get());
    }
    return out;
}

std::vector<Descriptor> analyze_grains_reference(std::span<const float> samples,
                                                 std::span<const std::size_t> offsets,
                                                 std::size_t length, int sample_rate) {
    check_offsets(samples, offsets, length);
    std::vector<Descriptor> out;
    out.reserve(offsets.size());
    const Analyzer analyzer(length, sample_rate);
    auto in = Analyzer::buffer<double>(length);
    auto spectrum = Analyzer::buffer<fftw_complex>(length / 2 + 1);
    for (std::size_t off : offsets) out.push_back(analyzer.run(samples.data() + off, in.get(), spectrum.get()));
    return out;
}

}  // namespace kernels

GrainCorpus ingest_corpus(Audio audio, double grain_ms, double hop_ms) {
    if (!(grain_ms >= 5.0) || !std::isfinite(grain_ms)) throw ConfigError("grain_ms must be >= 5");
    if (!(hop_ms > 0.0) || !std::isfinite(hop_ms)) throw ConfigError("hop_ms must be > 0");
    if (audio.sample_rate <= 0) throw IngestionError("sample rate must be positive");

    const auto length = static_cast<std::size_t>(std::llround(grain_ms * audio.sample_rate / 1000.0));
    const auto hop = std::max<std::size_t>(1, std::llround(hop_ms * audio.sample_rate / 1000.0));
    if (length < 2 || audio.samples.size() < length)
        throw IngestionError("signal of " + std::to_string(audio.samples.size()) +
                             " samples is shorter than one grain (" + std::to_string(length) + ")");
    for (float& x : audio.samples) {
        if (!std::isfinite(x)) throw IngestionError("signal contains non-finite samples");
        x = std::clamp(x, -1.0f, 1.0f);
    }

    std::vector<std::size_t> offsets;
    for (std::size_t off = 0; off + length <= audio.samples.size(); off += hop) offsets.push_back(off);
    const auto descriptors = kernels::analyze_grains(audio.samples, offsets, length, audio.sample_rate);

    GrainCorpus corpus;
    corpus.sample_rate = audio.sample_rate;
    corpus.grains.reserve(offsets.size());
    for (std::size_t g = 0; g < offsets.size(); ++g)
        corpus.grains.push_back({offsets[g], length, descriptors[g].rms, descriptors[g].centroid,
                                 descriptors[g].flatness});

    const double n = double(corpus.grains.size());
    std::array<double, 3> sum{}, sq{};
    corpus.min_rms = corpus.max_rms = corpus.grains.front().rms;
    for (const Grain& g : corpus.grains) {
        const double v[3] = {g.rms, g.centroid, g.flatness};
        for (int j = 0; j < 3; ++j) sum[j] += v[j];
        corpus.min_rms = std::min(corpus.min_rms, g.rms);
        corpus.max_rms = std::max(corpus.max_rms, g.rms);
    }
    for (int j = 0; j < 3; ++j) corpus.mean[j] = sum[j] / n;
    for (const Grain& g : corpus.grains) {
        const double v[3] = {g.rms, g.centroid, g.flatness};
        for (int j = 0; j < 3; ++j) sq[j] += (v[j] - corpus.mean[j]) * (v[j] - corpus.mean[j]);
    }
    for (int j = 0; j < 3; ++j) {
        const double sd = std::sqrt(sq[j] / n);
        corpus.spread[j] = sd > 0.0 ? sd : 1.0;
    }
    corpus.samples = std::move(audio.samples);
    return corpus;
}

std::size_t select_grain(const GrainCorpus& corpus, const Descriptor& target,
                         const DescriptorWeights& weights) {
    if (corpus.empty()) throw ConfigError("grain selection from an empty corpus");
    const double w[3] = {weights.rms, weights.centroid, weights.flatness};
    const double t[3] = {target.rms, target.centroid, target.flatness};
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t i = 0; i < corpus.grains.size(); ++i) {
        const Grain& g = corpus.grains[i];
        const double v[3] = {g.rms, g.centroid, g.flatness};
        double d = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double z = (t[j] - v[j]) / corpus.spread[j];
            d += w[j] * z * z;
        }
        if (i == 0 || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

Audio make_crackle(double seconds, int sample_rate, std::uint64_t seed) {
    if (!(seconds > 0.0) || sample_rate <= 0) throw DomainError("crackle needs a positive duration and rate");
    Rng rng(seed);
    Audio audio;
    audio.sample_rate = sample_rate;
    const auto n = static_cast<std::size_t>(std::ceil(seconds * sample_rate));
    audio.samples.assign(n, 0.0f);

    // Rumble: one-pole low-passed noise around 0.05 rms.
    const double a = std::exp(-2.0 * std::numbers::pi * 80.0 / sample_rate);
    double lp = 0.0;
    std::vector<double> mix(n);
    for (std::size_t i = 0; i < n; ++i) {
        lp = a * lp + (1.0 - a) * rng.uniform(-1.0, 1.0);
        mix[i] = 1.5 * lp;
    }

    // Cracks: Poisson onsets, exponentially decaying high-passed noise.
    const double rate = 25.0;
    double t = -std::log(1.0 - rng.uniform()) / rate;
    while (t < seconds) {
        const double amp = rng.uniform(0.05, 0.7);
        const double tau = rng.uniform(0.002, 0.025) * sample_rate;
        const auto start = static_cast<std::size_t>(t * sample_rate);
        const auto len = std::min<std::size_t>(n - start, static_cast<std::size_t>(6.0 * tau));
        double prev = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double w = rng.uniform(-1.0, 1.0);
            mix[start + k] += amp * std::exp(-double(k) / tau) * 0.5 * (w - prev);
            prev = w;
        }
        t += -std::log(1.0 - rng.uniform()) / rate;
    }
    for (std::size_t i = 0; i < n; ++i) audio.samples[i] = static_cast<float>(std::clamp(mix[i], -1.0, 1.0));
    return audio;
}

}  // namespace soc::sonify
