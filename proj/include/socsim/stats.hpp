// Ensemble statistics for avalanche and quake sizes.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "socsim/cascade.hpp"

namespace soc {

/// One geometric bin. Sizes are integers, so a bin covers the integers
/// lo..hi inside [10^(k/B), 10^((k+1)/B)); its width is the number of those
/// integers and its centre their geometric midpoint sqrt(lo * hi).
struct HistogramBin {
    double center = 0.0;
    double density = 0.0;
    std::uint64_t count = 0;
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    double width = 0.0;
};

/// Log-binned size density, normalised so that sum(density * width) = 1.
/// Empty bins are omitted. Throws DomainError on empty input, a zero size, or
/// bins_per_decade < 1.
std::vector<HistogramBin> log_binned_histogram(std::span<const std::uint64_t> sizes,
                                               int bins_per_decade);

struct PowerLawFit {
    double tau_hat = 0.0;
    std::uint64_t s_min = 1;
    std::uint64_t n_tail = 0;
    double std_error = 0.0;  // (tau_hat - 1) / sqrt(n_tail)
};

inline constexpr std::uint64_t kMinTailSamples = 50;

/// Discrete maximum-likelihood exponent (continuous approximation with the
/// half-integer shift): tau = 1 + n / sum ln(s_i / (s_min - 1/2)) over s_i >= s_min.
/// Throws EstimationError when fewer than 50 samples reach s_min or when the
/// tail has no spread.
PowerLawFit fit_power_law(std::span<const std::uint64_t> sizes, std::uint64_t s_min);

struct EventEnsemble {
    std::vector<std::uint64_t> sizes;
    std::vector<std::uint64_t> durations;
    std::optional<std::vector<double>> moments;
    std::string source;

    /// Appends the event if it has size >= 1; size-0 drives carry no avalanche.
    void add(const CascadeEvent& ev, bool with_moment = false);
    std::size_t count() const { return sizes.size(); }
};

inline constexpr std::size_t kMinReportEvents = 10'000;

struct CriticalityReport {
    std::string source;
    std::size_t n_events = 0;
    std::uint64_t min_size = 0;
    std::uint64_t max_size = 0;
    double mean_size = 0.0;
    double decades = 0.0;
    PowerLawFit fit;
    std::vector<HistogramBin> histogram;
    bool strictly_decreasing = false;
    double loglog_slope = 0.0;

    nlohmann::ordered_json to_json() const;
};

/// Throws EstimationError below 10^4 events.
CriticalityReport criticality_report(const EventEnsemble& ensemble, std::uint64_t s_min,
                                     int bins_per_decade = 5);

/// CSV with header `bin_center,density`.
std::string histogram_csv(const std::vector<HistogramBin>& bins);

/// Least-squares slope of log10(density) against log10(center).
double loglog_slope(const std::vector<HistogramBin>& bins);

bool strictly_decreasing(const std::vector<HistogramBin>& bins);

}  // namespace soc
