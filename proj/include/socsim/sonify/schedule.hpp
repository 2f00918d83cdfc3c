// Mapping from cascade events to a grain schedule.
//
// Each relaxation step of an event becomes a burst of grains: the slip count
// sets how many (capped) and how loud (logarithmic law), and the target
// spectral centroid slides from centroid_hi toward centroid_lo as the
// cascade goes on, so long cascades end in a low rumble.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "socsim/cascade.hpp"
#include "socsim/rng.hpp"
#include "socsim/sonify/corpus.hpp"

namespace soc::sonify {

struct MappingConfig {
    double tick_seconds = 0.05;  // spacing of consecutive events
    double step_seconds = 0.01;  // time slot of one relaxation step
    std::size_t density_cap = 8;
    double gain = 0.5;
    double centroid_hi = 2500.0;
    double centroid_lo = 300.0;
    double sweep_steps = 8.0;  // e-folding length of the centroid slide, in steps
    double flatness_target = 0.6;
    DescriptorWeights weights;
    double pitch_jitter = 0.03;
    std::uint64_t seed = 0;
    double limiter_knee = 0.8;
    double grain_ms = 80.0;
    double hop_ms = 20.0;
    int sample_rate = 48000;
    double min_duration = 0.0;  // floor on the schedule length, seconds

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    /// Overrides fields from `key = value` pairs; unknown keys are a ConfigError.
    static MappingConfig from_pairs(const std::map<std::string, std::string>& kv,
                                    MappingConfig base);
    static MappingConfig from_pairs(const std::map<std::string, std::string>& kv);
};

struct GrainEntry {
    double onset = 0.0;  // seconds
    std::size_t grain_index = 0;
    double amplitude = 1.0;
    double pitch_ratio = 1.0;
    friend bool operator==(const GrainEntry&, const GrainEntry&) = default;
};

struct GrainSchedule {
    std::vector<GrainEntry> entries;
    double total_duration = 0.0;
};

/// Incremental form used by the session loop: one event at a time, with an
/// explicit start time, drawing jitter from its own generator.
class ScheduleBuilder {
public:
    ScheduleBuilder(const GrainCorpus& corpus, const MappingConfig& config);

    /// Appends the entries of `event` starting at `start_time`, sorted by onset.
    void add_event(const CascadeEvent& event, double start_time, std::vector<GrainEntry>& out);
    void reset() { rng_.reseed(config_.seed); }

    /// End time of the longest grain of `entry`.
    double entry_end(const GrainEntry& entry) const;

private:
    const GrainCorpus& corpus_;
    MappingConfig config_;
    Rng rng_;
};

/// Events are placed one tick apart by event_id, relative to the first event.
GrainSchedule events_to_schedule(std::span<const CascadeEvent> events, const GrainCorpus& corpus,
                                 const MappingConfig& config);

/// One JSON object per entry: {"onset":..,"grain":..,"amp":..,"pitch":..}.
std::string schedule_to_jsonl(const GrainSchedule& schedule);

}  // namespace soc::sonify
