#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "veritas/metrics.hpp"

#include <random>

using namespace veritas;

namespace {

MaskVolume box(const GridMeta& meta, std::array<int, 3> lo, std::array<int, 3> hi) {
    MaskVolume m;
    m.meta = meta;
    m.data.assign(meta.voxel_count(), 0);
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) m.data[meta.index(x, y, z)] = 1;
    return m;
}

} // namespace

TEST_CASE("percentile: linear interpolation between closest ranks") {
    CHECK(percentile({5.0}, 95.0) == 5.0);
    CHECK(percentile({1.0, 2.0}, 50.0) == doctest::Approx(1.5));
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(i);
    CHECK(percentile(v, 95.0) == doctest::Approx(19.05).epsilon(1e-12));
    CHECK_THROWS_AS(percentile({}, 95.0), std::invalid_argument);
}

TEST_CASE("dice: examples and properties") {
    GridMeta meta;
    meta.dims = {4, 4, 1};
    const MaskVolume a = box(meta, {0, 0, 0}, {1, 1, 0}); // 4 voxels
    const MaskVolume b = box(meta, {1, 0, 0}, {2, 1, 0}); // 4 voxels, overlap 2
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, b) == doctest::Approx(0.5));
    CHECK(dice(a, b) == dice(b, a));

    const MaskVolume c = box(meta, {2, 2, 0}, {3, 3, 0});
    CHECK(dice(a, c) == 0.0); // disjoint

    MaskVolume empty1, empty2;
    empty1.meta = empty2.meta = meta;
    empty1.data.assign(meta.voxel_count(), 0);
    empty2.data.assign(meta.voxel_count(), 0);
    CHECK(dice(empty1, empty2) == 1.0); // documented convention

    GridMeta other;
    other.dims = {3, 3, 1};
    MaskVolume wrong;
    wrong.meta = other;
    wrong.data.assign(other.voxel_count(), 1);
    CHECK_THROWS_AS(dice(a, wrong), std::invalid_argument);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const MaskVolume r1 = testsup::random_mask(meta, 0.4, rng);
        const MaskVolume r2 = testsup::random_mask(meta, 0.4, rng);
        const double d = dice(r1, r2);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(d == dice(r2, r1));
    }
}

TEST_CASE("hd95: identical and forced geometries") {
    GridMeta meta;
    meta.dims = {8, 3, 3};
    const MaskVolume a = box(meta, {1, 1, 1}, {1, 1, 1});
    const MaskVolume b = box(meta, {4, 1, 1}, {4, 1, 1});
    CHECK(hd95(a, a) == 0.0);
    CHECK(hd95(a, b) == doctest::Approx(3.0)); // 3 voxels apart at 1 mm

    MaskVolume empty;
    empty.meta = meta;
    empty.data.assign(meta.voxel_count(), 0);
    CHECK_THROWS_AS(hd95(a, empty), std::invalid_argument);
}

TEST_CASE("hd95 scales linearly with spacing") {
    GridMeta meta;
    meta.dims = {10, 6, 4};
    std::mt19937_64 rng(17);
    const MaskVolume a = testsup::random_mask(meta, 0.3, rng);
    const MaskVolume b = testsup::random_mask(meta, 0.3, rng);
    const double base = hd95(a, b);

    GridMeta scaled = meta;
    scaled.spacing = {2.0, 2.0, 2.0};
    MaskVolume a2 = a, b2 = b;
    a2.meta = b2.meta = scaled;
    CHECK(hd95(a2, b2) == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("hd95 equals the all-pairs brute force on random small masks") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        GridMeta meta;
        meta.dims = {int(3 + rng() % 10), int(3 + rng() % 10), int(3 + rng() % 6)};
        // f32-exact spacings keep both computation routes bit-identical
        const double spacings[] = {0.5, 1.0, 2.0, 0.25};
        meta.spacing = {spacings[rng() % 4], spacings[rng() % 4], spacings[rng() % 4]};
        const MaskVolume a = testsup::random_mask(meta, 0.35, rng);
        const MaskVolume b = testsup::random_mask(meta, 0.35, rng);
        CHECK(hd95(a, b) == testsup::oracle_hd95(a, b));
        CHECK(hd95(a, b) == hd95(b, a));
    }
}

TEST_CASE("two overlapping boxes against the exhaustive oracle") {
    GridMeta meta;
    meta.dims = {12, 12, 5};
    meta.spacing = {1.0, 0.5, 2.0};
    const MaskVolume a = box(meta, {1, 1, 1}, {6, 7, 3});
    const MaskVolume b = box(meta, {4, 3, 1}, {10, 10, 3});
    CHECK(hd95(a, b) == testsup::oracle_hd95(a, b));
}

TEST_CASE("hd95_fn: zero when the prediction covers the truth") {
    GridMeta meta;
    meta.dims = {8, 8, 3};
    const MaskVolume pred = box(meta, {1, 1, 0}, {6, 6, 2});
    const MaskVolume inside = box(meta, {2, 2, 1}, {5, 5, 1});
    CHECK(hd95_fn(pred, inside) == 0.0); // pred covers gt
    CHECK(hd95_fn(pred, pred) == 0.0);

    MaskVolume empty;
    empty.meta = meta;
    empty.data.assign(meta.voxel_count(), 0);
    CHECK_THROWS_AS(hd95_fn(empty, pred), std::invalid_argument);
    CHECK(hd95_fn(pred, empty) == 0.0); // empty truth adds nothing
}

TEST_CASE("hd95_fn: one-layer extension on most of a face gives 1 mm") {
    GridMeta meta;
    meta.dims = {10, 10, 6};
    const MaskVolume pred = box(meta, {2, 2, 1}, {7, 7, 4});
    // Truth extends the prediction by one voxel along +x over the whole face:
    // well above 5% of the union surface moves 1 mm away.
    MaskVolume gt = pred;
    for (int z = 1; z <= 4; ++z)
        for (int y = 2; y <= 7; ++y) gt.data[meta.index(8, y, z)] = 1;
    CHECK(hd95_fn(pred, gt) == doctest::Approx(1.0));
    // And against the brute force.
    MaskVolume un = pred;
    for (std::size_t i = 0; i < un.data.size(); ++i)
        un.data[i] = (pred.data[i] || gt.data[i]) ? 1 : 0;
    CHECK(hd95_fn(pred, gt) == testsup::oracle_hd95(pred, un));
}

TEST_CASE("hd95_fn is monotone as the truth grows outside the prediction") {
    GridMeta meta;
    meta.dims = {12, 5, 5};
    const MaskVolume pred = box(meta, {1, 1, 1}, {3, 3, 3});
    double previous = 0.0;
    for (int extent = 4; extent <= 10; ++extent) {
        const MaskVolume gt = box(meta, {1, 1, 1}, {extent, 3, 3});
        const double v = hd95_fn(pred, gt);
        CHECK(v >= previous);
        previous = v;
    }
}

TEST_CASE("tune_margin equals the sort-and-interpolate oracle") {
    GridMeta meta;
    meta.dims = {10, 4, 4};

    // Pairs whose hd95_fn values are exactly 1..20 mm: a single-voxel
    // prediction and two truth voxels k millimetres away on either side.
    std::vector<std::pair<MaskVolume, MaskVolume>> pairs;
    std::vector<double> values;
    GridMeta wide;
    wide.dims = {45, 1, 1};
    const int center = 22;
    for (int k = 1; k <= 20; ++k) {
        const MaskVolume pred = box(wide, {center, 0, 0}, {center, 0, 0});
        MaskVolume gt;
        gt.meta = wide;
        gt.data.assign(wide.voxel_count(), 0);
        gt.data[wide.index(center - k, 0, 0)] = 1;
        gt.data[wide.index(center + k, 0, 0)] = 1;
        pairs.emplace_back(pred, gt);
        values.push_back(hd95_fn(pred, gt));
    }
    // The construction really does produce the 1..20 ladder.
    for (int k = 1; k <= 20; ++k) CHECK(values[k - 1] == doctest::Approx(double(k)));
    CHECK(tune_margin(pairs) == doctest::Approx(19.05).epsilon(1e-12));
    CHECK(tune_margin(pairs) == testsup::oracle_percentile(values, 95.0));

    // Covered predictions everywhere -> 0; a single pair -> its own value.
    std::vector<std::pair<MaskVolume, MaskVolume>> covered;
    for (int i = 0; i < 5; ++i)
        covered.emplace_back(box(meta, {0, 0, 0}, {5, 3, 3}), box(meta, {1, 1, 1}, {4, 2, 2}));
    CHECK(tune_margin(covered) == 0.0);
    CHECK(tune_margin({pairs[6]}) == values[6]);
    CHECK_THROWS_AS(tune_margin({}), std::invalid_argument);
}

TEST_CASE("margin table and the other-pathologies rule") {
    MarginTable table;
    table.set("wm", Condition::neurotypical, 2.0);
    table.set("wm", Condition::spina_bifida, 3.5);
    CHECK(margin_for_other_pathologies(table, "wm") == 3.5);

    table.set("csf", Condition::neurotypical, 0.0);
    table.set("csf", Condition::spina_bifida, 0.0);
    CHECK(margin_for_other_pathologies(table, "csf") == 0.0);

    table.set("cgm", Condition::neurotypical, 4.1);
    table.set("cgm", Condition::spina_bifida, 4.1);
    CHECK(margin_for_other_pathologies(table, "cgm") == 4.1);

    table.set("dgm", Condition::neurotypical, 1.0);
    CHECK_THROWS_AS(margin_for_other_pathologies(table, "dgm"), std::invalid_argument);
    CHECK_THROWS_AS(table.set("wm", Condition::neurotypical, -1.0), std::invalid_argument);
}
