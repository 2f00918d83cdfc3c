// Grain corpus for concatenative synthesis: a source recording cut into
// overlapping windows, each tagged with loudness and spectral descriptors.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "socsim/sonify/wav.hpp"

namespace soc::sonify {

struct Grain {
    std::size_t offset = 0;
    std::size_t length = 0;
    double rms = 0.0;       // unwindowed
    double centroid = 0.0;  // Hz, of the Hann-windowed magnitude spectrum
    double flatness = 0.0;  // geometric / arithmetic mean of that spectrum
    friend bool operator==(const Grain&, const Grain&) = default;
};

struct Descriptor {
    double rms = 0.0;
    double centroid = 0.0;
    double flatness = 0.0;
};

struct DescriptorWeights {
    double rms = 1.0;
    double centroid = 1.0;
    double flatness = 1.0;
};

struct GrainCorpus {
    int sample_rate = 48000;
    std::vector<Grain> grains;
    std::vector<float> samples;
    /// Population mean and standard deviation of each descriptor (rms, centroid,
    /// flatness), used for z-score matching. A zero spread is stored as 1.
    std::array<double, 3> mean{};
    std::array<double, 3> spread{1.0, 1.0, 1.0};
    double min_rms = 0.0;
    double max_rms = 0.0;

    bool empty() const { return grains.empty(); }
    std::span<const float> grain_samples(std::size_t i) const {
        return std::span<const float>(samples).subspan(grains[i].offset, grains[i].length);
    }
};

/// Sliding-window segmentation. Throws ConfigError for grain_ms < 5 or
/// hop_ms <= 0, IngestionError when the signal is shorter than one grain.
GrainCorpus ingest_corpus(Audio audio, double grain_ms = 80.0, double hop_ms = 20.0);

/// Index minimising the weighted squared distance in z-scored descriptor
/// space; ties go to the lowest index. Throws ConfigError on an empty corpus.
std::size_t select_grain(const GrainCorpus& corpus, const Descriptor& target,
                         const DescriptorWeights& weights = {});

/// Synthetic ice-crackle texture (decaying noise bursts over a low rumble)
/// for tests and demos when no recording is supplied.
Audio make_crackle(double seconds, int sample_rate, std::uint64_t seed);

namespace kernels {

/// Per-grain descriptors, grains spread over the OpenMP team.
std::vector<Descriptor> analyze_grains(std::span<const float> samples,
                                       std::span<const std::size_t> offsets, std::size_t length,
                                       int sample_rate);
/// Same computation, one grain after another.
std::vector<Descriptor> analyze_grains_reference(std::span<const float> samples,
                                                 std::span<const std::size_t> offsets,
                                                 std::size_t length, int sample_rate);

}  // namespace kernels

}  // namespace soc::sonify
