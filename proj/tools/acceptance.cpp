// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
//
//   acceptance [--only N[,N...]] [--data DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "socsim/errors.hpp"
#include "socsim/rng.hpp"
#include "socsim/sandpile.hpp"
#include "socsim/session/session.hpp"
#include "socsim/sonify/corpus.hpp"
#include "socsim/sonify/render.hpp"
#include "socsim/sonify/schedule.hpp"
#include "socsim/sonify/wav.hpp"
#include "socsim/springblock.hpp"
#include "socsim/stats.hpp"

using namespace soc;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Abelian property on 3x3.
Verdict abelian() {
    Rng rng(1);
    std::uint64_t pairs = 0, mismatches = 0;
    for (int sample = 0; sample < 1000; ++sample) {
        Grid<std::int32_t> z(3, 3);
        for (auto& v : z.values()) v = static_cast<std::int32_t>(rng.below(4));
        for (int a = 0; a < 9; ++a)
            for (int b = a + 1; b < 9; ++b) {
                const Coord ca{a / 3, a % 3}, cb{b / 3, b % 3};
                Sandpile x = Sandpile::from_grid(z, 4);
                Sandpile y = Sandpile::from_grid(z, 4);
                x.add_grain(ca);
                x.add_grain(cb);
                y.add_grain(cb);
                y.add_grain(ca);
                ++pairs;
                mismatches += !(x.grid() == y.grid());
            }
    }
    return {mismatches == 0, fmt("%llu pair swaps over 1000 states, %llu mismatches",
                                 (unsigned long long)pairs, (unsigned long long)mismatches)};
}

// 2. Conservation: exact grain balance, and force balance on interior-only quakes.
Verdict conservation() {
    Sandpile pile(32, 32, 4, 2);
    std::uint64_t bad_grains = 0;
    for (int i = 0; i < 100000; ++i) {
        const std::int64_t before = pile.total_grains();
        const CascadeEvent ev = pile.add_grain(pile.random_site());
        const auto lost = static_cast<std::int64_t>(ev.boundary_loss);
        if (static_cast<double>(lost) != ev.boundary_loss || pile.total_grains() != before + 1 - lost) ++bad_grains;
    }

    SpringBlock ofc(32, 0.25, 3);
    for (int i = 0; i < 20000; ++i) ofc.drive_extremal();
    const double n = 32.0 * 32.0;
    std::uint64_t interior = 0;
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double before = ofc.total_force();
        const double top = ofc.max_force();
        const CascadeEvent ev = ofc.drive_extremal();
        if (ev.boundary_loss != 0.0) continue;
        ++interior;
        const double after = ofc.total_force();
        worst = std::max(worst, std::abs(after - (before + n * (1.0 - top))) / after);
    }
    const bool ok = bad_grains == 0 && interior > 0 && worst <= 1e-9;
    return {ok, fmt("grain balance failures %llu/100000; %llu interior-only quakes, worst relative force drift %.2e",
                    (unsigned long long)bad_grains, (unsigned long long)interior, worst)};
}

struct BtwRun {
    CriticalityReport report;
    double mean_height = 0.0;
    double seconds = 0.0;
};

const BtwRun& btw_run() {
    static const BtwRun run = [] {
        const auto t0 = std::chrono::steady_clock::now();
        Sandpile pile(64, 64, 4, 7);
        for (int i = 0; i < 100000; ++i) pile.add_grain(pile.random_site());
        EventEnsemble ensemble;
        ensemble.source = "btw 64x64";
        double height_sum = 0.0;
        for (int i = 0; i < 200000; ++i) {
            ensemble.add(pile.add_grain(pile.random_site()));
            height_sum += pile.mean_height();
        }
        BtwRun r;
        r.report = criticality_report(ensemble, 5);
        r.mean_height = height_sum / 200000.0;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return run;
}

// 3. BTW criticality.
Verdict btw_criticality() {
    const BtwRun& r = btw_run();
    const double tau = r.report.fit.tau_hat;
    const bool ok = r.report.decades >= 2.0 && tau >= 1.0 && tau <= 1.4 && r.seconds <= 300.0;
    return {ok, fmt("%zu avalanches over %.2f decades, tau_hat %.4f +- %.4f (s_min 5), %.1f s", r.report.n_events,
                    r.report.decades, tau, r.report.fit.std_error, r.seconds)};
}

// 4. OFC criticality under extremal drive.
Verdict ofc_criticality() {
    const auto t0 = std::chrono::steady_clock::now();
    SpringBlock ofc(64, 0.25, 11);
    for (int i = 0; i < 100000; ++i) ofc.drive_extremal();
    EventEnsemble ensemble;
    ensemble.source = "ofc L=64";
    for (int i = 0; i < 1000000; ++i) ensemble.add(ofc.drive_extremal());
    const CriticalityReport r = criticality_report(ensemble, 5);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = r.decades >= 2.0 && r.strictly_decreasing && secs <= 600.0;
    return {ok, fmt("%zu quakes over %.2f decades, %zu bins, strictly decreasing: %s, %.1f s", r.n_events, r.decades,
                    r.histogram.size(), r.strictly_decreasing ? "yes" : "no", secs)};
}

// 5. Estimator against inverse-transform samples.
Verdict estimator() {
    const double a = fit_power_law(oracle::power_law_samples(1.5, 1, 100000, 1), 1).tau_hat;
    const double b = fit_power_law(oracle::power_law_samples(2.0, 4, 100000, 2), 4).tau_hat;
    const bool ok = std::abs(a - 1.5) <= 0.05 && std::abs(b - 2.0) <= 0.07;
    return {ok, fmt("tau 1.5 -> %.4f, tau 2.0 -> %.4f (n = 10^5 each)", a, b)};
}

// 6. Mean stable height of the BTW pile.
Verdict mean_height() {
    const double h = btw_run().mean_height;
    return {h >= 2.0 && h <= 2.2, fmt("time-averaged mean height %.4f over 2x10^5 drives", h)};
}

// 7. Sonification contracts.
Verdict sonify_contracts() {
    using namespace sonify;
    std::vector<std::string> failures;

    // Determinism: events -> schedule -> signal, twice, and against the serial reference.
    const GrainCorpus corpus = ingest_corpus(make_crackle(3.0, 48000, 4));
    SpringBlock ofc(16, 0.25, 5);
    for (int i = 0; i < 5000; ++i) ofc.drive_extremal();
    std::vector<CascadeEvent> events;
    for (int i = 0; i < 60; ++i) events.push_back(ofc.drive_extremal());
    MappingConfig mapping;
    mapping.seed = 9;
    const auto s1 = events_to_schedule(events, corpus, mapping);
    const auto s2 = events_to_schedule(events, corpus, mapping);
    const auto x1 = render(s1, corpus, 48000);
    const auto x2 = render(s2, corpus, 48000);
    if (!(x1 == x2 && x1 == render_reference(s1, corpus, 48000) && !s1.entries.empty()))
        failures.push_back("render not bitwise deterministic");

    // Limiter over 100 dense random schedules.
    float peak = 0.0f;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        GrainSchedule s;
        s.total_duration = 0.25;
        for (int i = 0; i < 400; ++i)
            s.entries.push_back({rng.uniform(0.0, 0.25), std::size_t(rng.below(corpus.grains.size())),
                                 rng.uniform(0.01, 1.0), rng.uniform(0.5, 2.0)});
        std::sort(s.entries.begin(), s.entries.end(), [](auto& a, auto& b) { return a.onset < b.onset; });
        for (float v : render(s, corpus, 48000)) peak = std::max(peak, std::abs(v));
    }
    if (!(peak <= 1.0f)) failures.push_back("limiter exceeded full scale");

    // 440 Hz centroid.
    Audio sine;
    sine.sample_rate = 48000;
    sine.samples.resize(48000);
    for (std::size_t i = 0; i < sine.samples.size(); ++i)
        sine.samples[i] = float(0.5 * std::sin(2 * std::numbers::pi * 440.0 * double(i) / 48000.0));
    double worst_centroid = 0.0;
    for (const auto& g : ingest_corpus(sine, 100.0, 25.0).grains)
        worst_centroid = std::max(worst_centroid, std::abs(g.centroid - 440.0));
    if (!(worst_centroid <= 5.0)) failures.push_back("440 Hz centroid off");

    // WAV round trip.
    const Audio back = decode_wav([&] {
        const std::string bytes = encode_wav(sine.samples, 48000);
        return std::vector<std::uint8_t>(bytes.begin(), bytes.end());
    }());
    double worst_wav = 0.0;
    for (std::size_t i = 0; i < sine.samples.size(); ++i)
        worst_wav = std::max(worst_wav, std::abs(double(back.samples[i]) - double(sine.samples[i])));
    if (!(back.samples.size() == sine.samples.size() && worst_wav <= 1.0 / 32768.0))
        failures.push_back("WAV round trip");

    std::string detail = fmt("%zu entries rendered identically; peak %.6f over 100 dense schedules; "
                             "centroid error %.3f Hz; WAV error %.3g (bound %.3g)",
                             s1.entries.size(), peak, worst_centroid, worst_wav, 1.0 / 32768.0);
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

// 8. Golden replay.
Verdict golden_replay(const std::string& data) {
    std::ifstream log_in(data + "/golden.slog", std::ios::binary);
    std::ifstream golden_in(data + "/golden.events.jsonl", std::ios::binary);
    if (!log_in || !golden_in) return {false, "golden files not found under " + data};
    std::ostringstream golden;
    golden << golden_in.rdbuf();
    const session::SessionLog log = session::SessionLog::read(log_in);
    std::ostringstream replayed;
    session::replay_events(log, replayed);
    const bool same = replayed.str() == golden.str();
    return {same, fmt("%zu bytes, %s on this platform only; second platform not run here", golden.str().size(),
                      same ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-8"};
    std::vector<int> only;
    std::string data = SOCSIM_TEST_DATA;
    app.add_option("--only", only, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, 8));
    app.add_option("--data", data, "Directory holding golden.slog and golden.events.jsonl");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"abelian property (3x3, 1000 states, all pairs)", abelian},
        {"conservation (grains exact, interior quakes 1e-9)", conservation},
        {"BTW criticality (64x64, tau in [1.0, 1.4], >= 2 decades)", btw_criticality},
        {"OFC criticality (L=64, alpha 0.25, >= 2 decades, decreasing)", ofc_criticality},
        {"estimator oracle (+-0.05 at 1.5, +-0.07 at 2.0)", estimator},
        {"BTW mean height in [2.0, 2.2]", mean_height},
        {"sonification contracts", sonify_contracts},
        {"golden replay byte-identical", [&] { return golden_replay(data); }},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
