#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "rose/rng.hpp"

using namespace rose::rng;

TEST_CASE("stream draws are the splitmix64 sequence of its key") {
    const std::uint64_t key = 0xDEADBEEFCAFEBABEull;
    Stream s(key);
    CHECK(s.next_u64() == mix64(key + kGolden));
    CHECK(s.next_u64() == mix64(key + 2 * kGolden));

    Stream a(key), b(key);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform01 covers [0,1) at 53-bit resolution") {
    CHECK(uniform01(0) == 0.0);
    CHECK(uniform01(~0ull) == doctest::Approx(1.0 - 0x1.0p-53));
    CHECK(uniform01(~0ull) < 1.0);
    Stream s(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = s.next_uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("gaussian stays finite at the extremes of its inputs") {
    CHECK(std::isfinite(gaussian(0, 0)));
    CHECK(std::isfinite(gaussian(~0ull, 0)));
    CHECK(std::isfinite(gaussian(0, ~0ull)));
    CHECK(std::isfinite(gaussian(~0ull, ~0ull)));
}

TEST_CASE("gaussian moments are near standard normal") {
    Stream s(42);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = s.next_gaussian();
        sum += g;
        sumsq += g * g;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("domain keys decorrelate uses of one seed") {
    const std::uint64_t seed = 11;
    std::set<std::uint64_t> keys;
    for (Domain d : {Domain::init, Domain::dropout, Domain::data, Domain::direction,
                     Domain::shuffle, Domain::perturb}) {
        keys.insert(domain_key(seed, d));
    }
    CHECK(keys.size() == 6);
    CHECK(domain_key(11, Domain::init) != domain_key(12, Domain::init));
}

TEST_CASE("dropout element draws respond to every key component") {
    const DropoutKey base{3, 17, 0};
    const std::uint64_t ref = base.element_bits(2, 5);
    CHECK(base.element_bits(2, 5) == ref);  // pure function of the tuple
    CHECK(DropoutKey{4, 17, 0}.element_bits(2, 5) != ref);
    CHECK(DropoutKey{3, 18, 0}.element_bits(2, 5) != ref);
    CHECK(DropoutKey{3, 17, 1}.element_bits(2, 5) != ref);
    CHECK(base.element_bits(3, 5) != ref);
    CHECK(base.element_bits(2, 6) != ref);
}

TEST_CASE("element draws look uniform across a site") {
    const DropoutKey key{99, 1, 0};
    const int n = 20000;
    int below = 0;
    for (int e = 0; e < n; ++e) {
        if (uniform01(key.element_bits(0, static_cast<std::uint64_t>(e))) < 0.25) ++below;
    }
    // 3-sigma band around 0.25 for n=20000.
    CHECK(below > n / 4 - 3 * 61);
    CHECK(below < n / 4 + 3 * 61);
}
