#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace veritas;
using testsup::make_space;
using testsup::oracle_combine;
using testsup::oracle_contradiction;
using testsup::random_bpa;
using testsup::random_probability;
using testsup::to_dense;

TEST_CASE("BPA axioms enforced on construction") {
    const LabelSpace space = make_space(3);
    CHECK_THROWS_AS(Bpa(space, {{SubsetMask::empty_set(), 0.5}, {space.full_set(), 0.5}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(Bpa(space, {{space.full_set(), 0.9}}), std::invalid_argument);
    CHECK_THROWS_AS(Bpa(space, {{space.full_set(), 1.5}, {SubsetMask::singleton(0), -0.5}}),
                    std::invalid_argument);
    const Bpa ok(space, {{SubsetMask::singleton(0), 0.25}, {space.full_set(), 0.75}});
    CHECK(ok.mass(space.full_set()) == 0.75);
}

TEST_CASE("from_probability puts mass on singletons only") {
    const LabelSpace s2 = make_space(2);
    const Bpa onehot = Bpa::from_probability(ClassProbability(s2, {1.0, 0.0}));
    CHECK(onehot.mass(SubsetMask::singleton(0)) == 1.0);
    CHECK(onehot.focal().size() == 1);

    const Bpa m = Bpa::from_probability(ClassProbability(s2, {0.3, 0.7}));
    CHECK(m.mass(SubsetMask::singleton(0)) == 0.3);
    CHECK(m.mass(SubsetMask::singleton(1)) == 0.7);

    const LabelSpace s3 = make_space(3);
    const Bpa u = Bpa::from_probability(ClassProbability(s3, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
    for (int c = 0; c < 3; ++c)
        CHECK(u.mass(SubsetMask::singleton(c)) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("contradiction mass: forced cases") {
    const LabelSpace space = make_space(2);
    const Bpa vac = Bpa::vacuous(space);
    CHECK(contradiction_mass(vac, vac) == 0.0);

    const Bpa a(space, {{SubsetMask::singleton(0), 1.0}});
    const Bpa b(space, {{SubsetMask::singleton(1), 1.0}});
    CHECK(contradiction_mass(a, b) == 1.0);
    CHECK_THROWS_AS(combine(a, b), std::domain_error);
}

TEST_CASE("contradiction mass matches the exhaustive double sum") {
    const LabelSpace space = make_space(3);
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const Bpa m1 = random_bpa(space, rng, 3);
        const Bpa m2 = random_bpa(space, rng, 4);
        const double fast = contradiction_mass(m1, m2);
        const double brute = oracle_contradiction(to_dense(m1), to_dense(m2));
        CHECK(fast == doctest::Approx(brute).epsilon(1e-12));
        CHECK(fast >= 0.0);
        CHECK(fast <= 1.0 + 1e-12);
    }
}

TEST_CASE("Zadeh pair amplifies the shared hypothesis to certainty") {
    const LabelSpace space = make_space(3); // {a, b, c}
    const SubsetMask a = SubsetMask::singleton(0), b = SubsetMask::singleton(1),
                     c = SubsetMask::singleton(2);
    for (double eps : {0.1, 0.01, 1e-6, 0.5, 1.0}) {
        const Bpa m1(space, {{a, 1.0 - eps}, {b, eps}});
        const Bpa m2(space, {{b, eps}, {c, 1.0 - eps}});
        const Bpa fused = combine(m1, m2);
        CHECK(fused.mass(b) == 1.0); // exactly
        CHECK(fused.focal().size() == 1);
    }
    // Asymmetric epsilons amplify just the same.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(1e-5, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double e1 = unit(rng), e2 = unit(rng);
        const Bpa m1(space, {{a, 1.0 - e1}, {b, e1}});
        const Bpa m2(space, {{b, e2}, {c, 1.0 - e2}});
        CHECK(combine(m1, m2).mass(b) == 1.0);
    }
}

TEST_CASE("sparse storage above the dense limit behaves identically") {
    const LabelSpace space = make_space(14); // sparse path (dense tops out at 12)
    const SubsetMask s1 = SubsetMask::singleton(0).with(5).with(13);
    const SubsetMask s2 = SubsetMask::singleton(5).with(9);
    const Bpa m(space, {{s1, 0.25}, {s2, 0.35}, {space.full_set(), 0.4}});
    CHECK(m.focal().size() == 3);
    CHECK(m.mass(s2) == 0.35);

    const Bpa same = combine(Bpa::vacuous(space), m);
    for (const auto& [subset, value] : m.focal())
        CHECK(same.mass(subset) == doctest::Approx(value).epsilon(1e-14));

    // Hand-checked combination: focal supports are tiny even though 2^14
    // subsets exist.
    const Bpa other(space, {{SubsetMask::singleton(5), 0.5}, {space.full_set(), 0.5}});
    const Bpa fused = combine(m, other);
    // Intersections: s1&{5}={5}, s2&{5}={5}, C&{5}={5}, s1&C=s1, s2&C=s2, C&C=C.
    const double m5 = 0.25 * 0.5 + 0.35 * 0.5 + 0.4 * 0.5;
    CHECK(fused.mass(SubsetMask::singleton(5)) == doctest::Approx(m5).epsilon(1e-14));
    CHECK(fused.mass(s1) == doctest::Approx(0.25 * 0.5).epsilon(1e-14));
    CHECK(fused.mass(space.full_set()) == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("BPA JSON round trip with |-joined subset names") {
    const auto dir = std::filesystem::path(VERITAS_TEST_TMPDIR);
    std::filesystem::create_directories(dir);
    const auto path = dir / "bpa.json";

    const LabelSpace space({"bg", "wm", "csf"});
    const Bpa m(space, {{space.parse_subset("bg|csf"), 0.4},
                        {space.parse_subset("wm"), 0.1},
                        {space.full_set(), 0.5}});
    write_bpa_json(m, path);
    const Bpa back = read_bpa_json(path);
    CHECK(back.space() == space);
    for (const auto& [subset, value] : m.focal())
        CHECK(back.mass(subset) == doctest::Approx(value).epsilon(1e-15));

    std::ofstream bad(dir / "bpa_bad.json");
    bad << R"({"classes": ["a","b"], "masses": {"a": 0.5}})"; // sums to 0.5
    bad.close();
    CHECK_THROWS_AS(read_bpa_json(dir / "bpa_bad.json"), std::invalid_argument);
}

TEST_CASE("vacuous BPA is the neutral element") {
    const LabelSpace space = make_space(4);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Bpa m = random_bpa(space, rng, 4);
        const Bpa fused = combine(Bpa::vacuous(space), m);
        for (const auto& [subset, value] : m.focal())
            CHECK(fused.mass(subset) == doctest::Approx(value).epsilon(1e-14));
    }
}

TEST_CASE("combine matches the exhaustive oracle on random K=4 pairs") {
    const LabelSpace space = make_space(4);
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const Bpa m1 = random_bpa(space, rng, 4);
        const Bpa m2 = random_bpa(space, rng, 5);
        try {
            const auto fast = to_dense(combine(m1, m2));
            const auto brute = oracle_combine(to_dense(m1), to_dense(m2));
            for (std::size_t s = 0; s < brute.size(); ++s)
                CHECK(fast[s] == doctest::Approx(brute[s]).epsilon(1e-11));
        } catch (const std::domain_error&) {
            // A refusal is only legitimate at (near-)complete contradiction.
            CHECK(oracle_contradiction(to_dense(m1), to_dense(m2)) >= 1.0 - 1e-12);
        }
    }
}

TEST_CASE("combine is commutative and associative on random triples") {
    const LabelSpace space = make_space(3);
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const Bpa m1 = random_bpa(space, rng, 3, true);
        const Bpa m2 = random_bpa(space, rng, 3, true);
        const Bpa m3 = random_bpa(space, rng, 3, true);
        const auto ab = to_dense(combine(m1, m2));
        const auto ba = to_dense(combine(m2, m1));
        const auto ab_c = to_dense(combine(combine(m1, m2), m3));
        const auto a_bc = to_dense(combine(m1, combine(m2, m3)));
        for (std::size_t s = 0; s < ab.size(); ++s) {
            CHECK(std::abs(ab[s] - ba[s]) < 1e-10);
            CHECK(std::abs(ab_c[s] - a_bc[s]) < 1e-10);
        }
    }
}

TEST_CASE("combine_many: fold identity and order independence") {
    const LabelSpace space = make_space(3);
    std::mt19937_64 rng(12);

    const Bpa empty_fold = combine_many(space, {});
    CHECK(empty_fold.mass(space.full_set()) == 1.0);

    const Bpa m = random_bpa(space, rng, 3);
    const Bpa padded = combine_many(space, {Bpa::vacuous(space), Bpa::vacuous(space), m});
    for (const auto& [subset, value] : m.focal())
        CHECK(padded.mass(subset) == doctest::Approx(value).epsilon(1e-14));

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Bpa> ms{random_bpa(space, rng, 3, true), random_bpa(space, rng, 3, true),
                            random_bpa(space, rng, 3, true)};
        const auto in_order = to_dense(combine_many(space, ms));
        std::vector<Bpa> shuffled{ms[2], ms[0], ms[1]};
        const auto permuted = to_dense(combine_many(space, shuffled));
        for (std::size_t s = 0; s < in_order.size(); ++s)
            CHECK(std::abs(in_order[s] - permuted[s]) < 1e-10);
    }
}

TEST_CASE("combine_prob: vacuous leaves the probability unchanged") {
    const LabelSpace space = make_space(4);
    std::mt19937_64 rng(9);
    const ClassProbability p = random_probability(space, rng);
    const ClassProbability out = combine_prob(p, Bpa::vacuous(space));
    for (int c = 0; c < 4; ++c) CHECK(out[c] == doctest::Approx(p[c]).epsilon(1e-15));
}

TEST_CASE("combine_prob: traffic-light contract zeroes the forbidden pair") {
    // Classes stand for joint light states; the contract excludes
    // (green, green) while the blend keeps some mass on it.
    const LabelSpace space({"green_green", "green_red", "red_green", "flash_flash"});
    const ClassProbability blend(space, {0.90, 0.04, 0.03, 0.03});
    const SubsetMask allowed = space.full_set().without(0);
    const Bpa contract(space, {{allowed, 1.0}});
    const ClassProbability out = combine_prob(blend, contract);
    CHECK(out[0] == 0.0);
    CHECK(out[3] == doctest::Approx(0.03 / 0.10).epsilon(1e-12));

    // Complete contradiction: all probability on the excluded pair.
    const ClassProbability all_green(space, {1.0, 0.0, 0.0, 0.0});
    CHECK_THROWS_AS(combine_prob(all_green, contract), std::domain_error);
}

TEST_CASE("combine_prob equals the generic rule read off singletons") {
    const LabelSpace space = make_space(3);
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const ClassProbability p = random_probability(space, rng);
        const Bpa m = random_bpa(space, rng, 4);
        const ClassProbability fast = combine_prob(p, m);
        const Bpa generic = combine(Bpa::from_probability(p), m);
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(fast[c] - generic.mass(SubsetMask::singleton(c))) < 1e-12);
    }
}

TEST_CASE("probability-vs-BPA contradiction matches the simplified form") {
    const LabelSpace space = make_space(3);
    std::mt19937_64 rng(88);
    for (int trial = 0; trial < 200; ++trial) {
        const ClassProbability p = random_probability(space, rng);
        const Bpa m = random_bpa(space, rng, 4);
        const double simplified = contradiction_mass(p, m);
        const double generic = oracle_contradiction(to_dense(Bpa::from_probability(p)), to_dense(m));
        CHECK(simplified == doctest::Approx(generic).epsilon(1e-12));
    }
}

TEST_CASE("outputs always satisfy the BPA/probability invariants") {
    const LabelSpace space = make_space(4);
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const Bpa fused = combine(random_bpa(space, rng, 4, true), random_bpa(space, rng, 4));
        double sum = 0.0;
        for (const auto& [subset, value] : fused.focal()) {
            CHECK(value >= 0.0);
            CHECK(!subset.empty());
            sum += value;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        const ClassProbability out = combine_prob(random_probability(space, rng),
                                                  random_bpa(space, rng, 4));
        double psum = 0.0;
        for (int c = 0; c < 4; ++c) {
            CHECK(out[c] >= 0.0);
            psum += out[c];
        }
        CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
    }
}
