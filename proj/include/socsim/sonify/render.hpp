#pragma once

#include <span>
#include <vector>

#include "socsim/sonify/corpus.hpp"
#include "socsim/sonify/schedule.hpp"

namespace soc::sonify {

/// Identity below `knee`, tanh-compressed above it; |output| < 1 always.
double soft_limit(double x, double knee);

/// Overlap-adds Hann-windowed, amplitude-scaled, linearly resampled grains at
/// their onsets, then applies the soft limiter. Output length is
/// ceil(total_duration * sample_rate). Blocks of output run on the OpenMP team.
std::vector<float> render(const GrainSchedule& schedule, const GrainCorpus& corpus,
                          int sample_rate, double knee = 0.8);

/// Serial scatter-form reference; bitwise equal to render().
std::vector<float> render_reference(const GrainSchedule& schedule, const GrainCorpus& corpus,
                                    int sample_rate, double knee = 0.8);

}  // namespace soc::sonify
