// Production kernels against the serial references: results must be bitwise equal.
#include "doctest.h"
#include "socsim/sandpile.hpp"
#include "socsim/springblock.hpp"
#include "threads.hpp"

TEST_CASE("sandpile: frontier kernel equals dense reference") {
    ThreadScope threads;
    for (std::size_t threshold : {std::size_t{1}, std::size_t{4096}}) {
        soc::Sandpile a(24, 20, 4, 17), b(24, 20, 4, 17);
        a.limits().parallel_threshold = threshold;
        for (int k = 0; k < 4000; ++k) {
            const auto site = a.random_site();
            b.random_site();
            const auto ea = a.add_grain(site);
            const auto eb = b.add_grain_reference(site);
            REQUIRE(ea == eb);
        }
        CHECK(a == b);
    }
}

TEST_CASE("springblock: frontier kernel equals dense reference, with and without noise") {
    ThreadScope threads;
    for (double noise : {0.0, 0.05}) {
        soc::SpringBlockParams p{20, 0.22, noise};
        soc::SpringBlock a(p, 5), b(p, 5);
        a.limits().parallel_threshold = 1;
        for (int k = 0; k < 1500; ++k) {
            const double dF = 1.0 - a.max_force() + 1e-3;
            const auto ea = a.load_step(dF);
            const auto eb = b.load_step_reference(dF);
            REQUIRE(ea == eb);
        }
        CHECK(a.forces() == b.forces());
        CHECK(a.rng() == b.rng());
    }
}

TEST_CASE("parallel max reduction equals the serial maximum") {
    ThreadScope threads;
    soc::Rng rng(1);
    std::vector<double> v(100000);
    for (double& x : v) x = rng.uniform();
    CHECK(soc::kernels::max_value(v, 1) == soc::kernels::max_value_reference(v));
    CHECK(soc::kernels::max_value(v) == soc::kernels::max_value_reference(v));
}
