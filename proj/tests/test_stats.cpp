#include "doctest.h"
#include "oracles.hpp"
#include "socsim/errors.hpp"
#include "socsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using soc::fit_power_law;
using soc::log_binned_histogram;

TEST_CASE("degenerate sample fills a single bin") {
    std::vector<std::uint64_t> s{1, 1, 1, 1};
    const auto h = log_binned_histogram(s, 5);
    REQUIRE(h.size() == 1);
    CHECK(h[0].count == 4);
    CHECK(h[0].density * h[0].width == doctest::Approx(1.0));
}

TEST_CASE("decade-aligned bins") {
    std::vector<std::uint64_t> s{1, 10, 100};
    const auto h = log_binned_histogram(s, 1);
    REQUIRE(h.size() == 3);
    for (const auto& b : h) CHECK(b.count == 1);
    CHECK(h[0].lo == 1);
    CHECK(h[0].hi == 9);
    CHECK(h[1].lo == 10);
    CHECK(h[1].hi == 99);
    CHECK(h[2].lo == 100);
    CHECK_THROWS_AS(log_binned_histogram(std::vector<std::uint64_t>{}, 1), soc::DomainError);
    CHECK_THROWS_AS(log_binned_histogram(s, 0), soc::DomainError);
}

TEST_CASE("histogram mass is one and bins are order independent") {
    const auto s = oracle::power_law_samples(1.7, 1, 20000, 3);
    for (int b : {1, 3, 5, 10}) {
        const auto h = log_binned_histogram(s, b);
        double mass = 0;
        for (const auto& bin : h) mass += bin.density * bin.width;
        CHECK(std::abs(mass - 1.0) <= 1e-9);
    }
    auto shuffled = s;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 777, shuffled.end());
    const auto a = log_binned_histogram(s, 5), b = log_binned_histogram(shuffled, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].density == b[i].density);
    CHECK(fit_power_law(s, 3).tau_hat == fit_power_law(shuffled, 3).tau_hat);
}

TEST_CASE("histogram slope recovers the sampling exponent") {
    const auto s = oracle::power_law_samples(1.5, 1, 200000, 8);
    auto h = log_binned_histogram(s, 5);
    // Keep bins with enough counts for a stable log-density.
    std::erase_if(h, [](const soc::HistogramBin& b) { return b.count < 20; });
    CHECK(soc::loglog_slope(h) == doctest::Approx(-1.5).epsilon(0.1 / 1.5));
}

TEST_CASE("MLE exponent on synthetic samples") {
    const auto a = fit_power_law(oracle::power_law_samples(1.5, 1, 100000, 1), 1);
    CHECK(a.tau_hat >= 1.45);
    CHECK(a.tau_hat <= 1.55);
    CHECK(a.std_error == doctest::Approx((a.tau_hat - 1) / std::sqrt(100000.0)));
    const auto b = fit_power_law(oracle::power_law_samples(2.0, 4, 100000, 2), 4);
    CHECK(b.tau_hat >= 1.93);
    CHECK(b.tau_hat <= 2.07);
}

TEST_CASE("estimator error shrinks with sample size") {
    auto mean_error = [](std::size_t n) {
        double e = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            e += std::abs(fit_power_law(oracle::power_law_samples(2.0, 4, n, 100 + seed), 4).tau_hat - 2.0);
        return e / 20;
    };
    CHECK(mean_error(100000) < mean_error(1000));
}

TEST_CASE("estimator preconditions") {
    std::vector<std::uint64_t> flat(500, 7);
    CHECK_THROWS_AS(fit_power_law(flat, 7), soc::EstimationError);
    std::vector<std::uint64_t> small(49, 9);
    small.push_back(10);
    CHECK_THROWS_AS(fit_power_law(small, 10), soc::EstimationError);
    CHECK_NOTHROW(fit_power_law(small, 9));
}

TEST_CASE("criticality report") {
    soc::EventEnsemble tiny;
    for (std::uint64_t i = 1; i <= 10; ++i) {
        soc::CascadeEvent ev;
        ev.size = i;
        ev.duration = 1;
        tiny.add(ev);
    }
    CHECK_THROWS_AS(soc::criticality_report(tiny, 1), soc::EstimationError);

    soc::EventEnsemble e;
    e.source = "synthetic";
    for (auto s : oracle::power_law_samples(1.6, 1, 30000, 4)) {
        soc::CascadeEvent ev;
        ev.size = s;
        ev.duration = 1;
        e.add(ev);
    }
    soc::CascadeEvent quiet;
    e.add(quiet);
    CHECK(e.count() == 30000);
    const auto r = soc::criticality_report(e, 1);
    CHECK(r.decades >= 2.0);
    CHECK(r.fit.tau_hat > 1.0);
    const auto j = r.to_json();
    CHECK(j["fit"]["n_tail"] == 30000);
    CHECK(j["histogram"].size() == r.histogram.size());
    const auto csv = soc::histogram_csv(r.histogram);
    CHECK(csv.rfind("bin_center,density\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.histogram.size() + 1));
}
