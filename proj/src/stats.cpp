#include "socsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "socsim/errors.hpp"

namespace soc {

namespace {

double edge(long k, int per_decade) {
    return std::pow(10.0, static_cast<double>(k) / per_decade);
}

long bin_of(std::uint64_t s, int per_decade) {
    const double x = static_cast<double>(s);
    long k = static_cast<long>(std::floor(per_decade * std::log10(x)));
    while (x < edge(k, per_decade)) --k;
    while (x >= edge(k + 1, per_decade)) ++k;
    return k;
}

}  // namespace

std::vector<HistogramBin> log_binned_histogram(std::span<const std::uint64_t> sizes,
                                               int bins_per_decade) {
    if (sizes.empty()) throw DomainError("histogram of an empty sample");
    if (bins_per_decade < 1) throw DomainError("bins_per_decade must be >= 1");

    std::map<long, std::uint64_t> counts;
    for (std::uint64_t s : sizes) {
        if (s == 0) throw DomainError("log-binned histogram needs sizes >= 1");
        ++counts[bin_of(s, bins_per_decade)];
    }
    const double n = static_cast<double>(sizes.size());
    std::vector<HistogramBin> bins;
    bins.reserve(counts.size());
    for (auto [k, count] : counts) {
        HistogramBin b;
        b.lo = static_cast<std::uint64_t>(std::ceil(edge(k, bins_per_decade)));
        b.hi = static_cast<std::uint64_t>(std::ceil(edge(k + 1, bins_per_decade))) - 1;
        b.count = count;
        b.width = static_cast<double>(b.hi - b.lo + 1);
        b.center = std::sqrt(static_cast<double>(b.lo) * static_cast<double>(b.hi));
        b.density = static_cast<double>(count) / (n * b.width);
        bins.push_back(b);
    }
    return bins;
}

PowerLawFit fit_power_law(std::span<const std::uint64_t> sizes, std::uint64_t s_min) {
    if (s_min < 1) throw EstimationError("s_min must be >= 1");
    // Sorting makes the log-sum independent of input order, bit for bit.
    std::vector<std::uint64_t> tail;
    for (std::uint64_t s : sizes)
        if (s >= s_min) tail.push_back(s);
    if (tail.size() < kMinTailSamples)
        throw EstimationError("only " + std::to_string(tail.size()) + " samples >= s_min = " +
                              std::to_string(s_min) + "; need at least " +
                              std::to_string(kMinTailSamples));
    std::sort(tail.begin(), tail.end());
    if (tail.front() == tail.back())
        throw EstimationError("degenerate tail: every sample equals " + std::to_string(tail.front()));

    const double shift = static_cast<double>(s_min) - 0.5;
    double log_sum = 0.0;
    for (std::size_t i = 0; i < tail.size();) {
        std::size_t j = i;
        while (j < tail.size() && tail[j] == tail[i]) ++j;
        log_sum += static_cast<double>(j - i) * std::log(static_cast<double>(tail[i]) / shift);
        i = j;
    }
    PowerLawFit fit;
    fit.s_min = s_min;
    fit.n_tail = tail.size();
    fit.tau_hat = 1.0 + static_cast<double>(fit.n_tail) / log_sum;
    fit.std_error = (fit.tau_hat - 1.0) / std::sqrt(static_cast<double>(fit.n_tail));
    return fit;
}

void EventEnsemble::add(const CascadeEvent& ev, bool with_moment) {
    if (ev.size == 0) return;
    sizes.push_back(ev.size);
    durations.push_back(ev.duration);
    if (with_moment) {
        if (!moments) moments.emplace();
        moments->push_back(ev.moment);
    }
}

double loglog_slope(const std::vector<HistogramBin>& bins) {
    const double n = static_cast<double>(bins.size());
    if (bins.size() < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& b : bins) {
        const double x = std::log10(b.center), y = std::log10(b.density);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

bool strictly_decreasing(const std::vector<HistogramBin>& bins) {
    for (std::size_t i = 1; i < bins.size(); ++i)
        if (!(bins[i].density < bins[i - 1].density)) return false;
    return bins.size() >= 2;
}

CriticalityReport criticality_report(const EventEnsemble& ensemble, std::uint64_t s_min,
                                     int bins_per_decade) {
    if (ensemble.count() < kMinReportEvents)
        throw EstimationError("criticality report needs at least " +
                              std::to_string(kMinReportEvents) + " events, got " +
                              std::to_string(ensemble.count()));
    CriticalityReport r;
    r.source = ensemble.source;
    r.n_events = ensemble.count();
    const auto [lo, hi] = std::minmax_element(ensemble.sizes.begin(), ensemble.sizes.end());
    r.min_size = *lo;
    r.max_size = *hi;
    std::vector<std::uint64_t> sorted = ensemble.sizes;
    std::sort(sorted.begin(), sorted.end());
    r.mean_size = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(r.n_events);
    r.decades = std::log10(static_cast<double>(r.max_size) / static_cast<double>(r.min_size));
    r.fit = fit_power_law(ensemble.sizes, s_min);
    r.histogram = log_binned_histogram(ensemble.sizes, bins_per_decade);
    r.strictly_decreasing = strictly_decreasing(r.histogram);
    r.loglog_slope = loglog_slope(r.histogram);
    return r;
}

nlohmann::ordered_json CriticalityReport::to_json() const {
    nlohmann::ordered_json j;
    j["source"] = source;
    j["n_events"] = n_events;
    j["min_size"] = min_size;
    j["max_size"] = max_size;
    j["mean_size"] = mean_size;
    j["decades"] = decades;
    j["fit"] = {{"tau_hat", fit.tau_hat},
                {"std_error", fit.std_error},
                {"s_min", fit.s_min},
                {"n_tail", fit.n_tail}};
    j["strictly_decreasing"] = strictly_decreasing;
    j["loglog_slope"] = loglog_slope;
    auto& h = j["histogram"] = nlohmann::ordered_json::array();
    for (const auto& b : histogram)
        h.push_back({{"bin_center", b.center}, {"density", b.density}, {"count", b.count},
                     {"lo", b.lo}, {"hi", b.hi}});
    return j;
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
    std::string out = "bin_center,density\n";
    char line[96];
    for (const auto& b : bins) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", b.center, b.density);
        out += line;
    }
    return out;
}

}  // namespace soc
