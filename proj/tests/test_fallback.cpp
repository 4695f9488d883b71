#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "veritas/fallback.hpp"

#include <random>

using namespace veritas;

namespace {

ScalarVolume constant_volume(const GridMeta& meta, double value) {
    ScalarVolume v;
    v.meta = meta;
    v.data.assign(meta.voxel_count(), value);
    return v;
}

DisplacementField zero_field(const GridMeta& meta) {
    DisplacementField f;
    f.x = constant_volume(meta, 0.0);
    f.y = constant_volume(meta, 0.0);
    f.z = constant_volume(meta, 0.0);
    return f;
}

ScalarVolume random_volume(const GridMeta& meta, std::mt19937_64& rng, double lo = 0.0,
                           double hi = 100.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    ScalarVolume v;
    v.meta = meta;
    v.data.resize(meta.voxel_count());
    for (auto& d : v.data) d = dist(rng);
    return v;
}

ProbabilityVolume random_probs(const GridMeta& meta, int k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    ProbabilityVolume p;
    p.meta = meta;
    p.channels = k;
    p.data.resize(meta.voxel_count() * k);
    for (std::size_t v = 0; v < meta.voxel_count(); ++v) {
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            p.at(v, c) = unit(rng);
            sum += p.at(v, c);
        }
        for (int c = 0; c < k; ++c) p.at(v, c) /= sum;
    }
    return p;
}

// Reflecting index fold, reimplemented for the oracle.
int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Full 3D direct convolution with an outer-product kernel (no separability).
ScalarVolume oracle_convolve(const ScalarVolume& in, const std::vector<double>& tx,
                             const std::vector<double>& ty, const std::vector<double>& tz) {
    const auto& meta = in.meta;
    const int rx = static_cast<int>(tx.size() / 2);
    const int ry = static_cast<int>(ty.size() / 2);
    const int rz = static_cast<int>(tz.size() / 2);
    ScalarVolume out;
    out.meta = meta;
    out.data.assign(meta.voxel_count(), 0.0);
    for (int z = 0; z < meta.dims[2]; ++z)
        for (int y = 0; y < meta.dims[1]; ++y)
            for (int x = 0; x < meta.dims[0]; ++x) {
                double acc = 0.0;
                for (int dz = -rz; dz <= rz; ++dz)
                    for (int dy = -ry; dy <= ry; ++dy)
                        for (int dx = -rx; dx <= rx; ++dx) {
                            const int sx = reflect(x + dx, meta.dims[0]);
                            const int sy = reflect(y + dy, meta.dims[1]);
                            const int sz = reflect(z + dz, meta.dims[2]);
                            acc += tx[dx + rx] * ty[dy + ry] * tz[dz + rz] * in.at(sx, sy, sz);
                        }
                out.data[meta.index(x, y, z)] = acc;
            }
    return out;
}

std::vector<double> gauss_taps(double sigma, double spacing) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma / spacing)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double u = t * spacing / sigma;
        taps[t + radius] = std::exp(-0.5 * u * u);
        sum += taps[t + radius];
    }
    for (double& v : taps) v /= sum;
    return taps;
}

AtlasEntry make_entry(const std::string& id, int ga_days, Condition cond,
                      const ScalarVolume& image, const ProbabilityVolume& probs) {
    AtlasEntry e;
    e.id = id;
    e.ga_days = ga_days;
    e.condition = cond;
    e.image = image;
    e.probs = probs;
    e.displacement = zero_field(image.meta);
    return e;
}

} // namespace

TEST_CASE("gestational-age rounding and window selection") {
    CHECK(ga_weeks_from_days(175) == 25);
    CHECK(ga_weeks_from_days(178) == 25); // 25.43 -> 25
    CHECK(ga_weeks_from_days(179) == 26); // 25.57 -> 26 (half-up)

    GridMeta meta;
    meta.dims = {2, 2, 2};
    std::mt19937_64 rng(3);
    const auto img = random_volume(meta, rng);
    const auto probs = random_probs(meta, 2, rng);

    std::vector<AtlasEntry> entries;
    entries.push_back(make_entry("a24", 24 * 7, Condition::neurotypical, img, probs));
    entries.push_back(make_entry("a25", 25 * 7, Condition::neurotypical, img, probs));
    entries.push_back(make_entry("a26", 26 * 7, Condition::neurotypical, img, probs));
    entries.push_back(make_entry("sb29", 29 * 7, Condition::spina_bifida, img, probs));

    AtlasFusionParams params;
    // GA 25, neurotypical: the 24..26 atlases are all kept.
    const auto picked = select_atlases(entries, 25, Condition::neurotypical, params);
    CHECK(picked.size() == 3);

    // GA 25, spina bifida: the week-29 atlas is outside |29-25| > 3.
    CHECK_THROWS_AS(select_atlases(entries, 25, Condition::spina_bifida, params),
                    std::invalid_argument);
    const auto sb = select_atlases(entries, 26, Condition::spina_bifida, params);
    CHECK(sb.size() == 1);
    CHECK(entries[sb[0]].id == "sb29");
}

TEST_CASE("local_ssd: identical and offset images vanish") {
    GridMeta meta;
    meta.dims = {6, 5, 4};
    std::mt19937_64 rng(11);
    const ScalarVolume img = random_volume(meta, rng);

    const ScalarVolume zero = local_ssd(img, img);
    for (double v : zero.data) CHECK(v == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    ScalarVolume shifted = img;
    for (auto& v : shifted.data) v += 17.5; // constant offset dies in normalization
    const ScalarVolume still_zero = local_ssd(img, shifted);
    for (double v : still_zero.data) CHECK(std::abs(v) < 1e-18);
}

TEST_CASE("local_ssd: impulse difference matches the direct convolution oracle") {
    GridMeta meta;
    meta.dims = {9, 9, 9};
    std::mt19937_64 rng(13);
    const ScalarVolume a = random_volume(meta, rng);
    ScalarVolume b = a;
    b.data[meta.index(4, 4, 4)] += 50.0;

    const ScalarVolume fast = local_ssd(a, b);

    // Oracle route: normalize both, square the difference, convolve in 3D.
    const ScalarVolume na = normalize_intensities(a);
    const ScalarVolume nb = normalize_intensities(b);
    ScalarVolume sq;
    sq.meta = meta;
    sq.data.resize(meta.voxel_count());
    for (std::size_t v = 0; v < sq.data.size(); ++v) {
        const double d = na.data[v] - nb.data[v];
        sq.data[v] = d * d;
    }
    const std::vector<double> bs{1.0 / 6, 4.0 / 6, 1.0 / 6};
    const ScalarVolume brute = oracle_convolve(sq, bs, bs, bs);
    for (std::size_t v = 0; v < brute.data.size(); ++v)
        CHECK(std::abs(fast.data[v] - brute.data[v]) < 1e-8);
}

TEST_CASE("high-frequency displacement norm: constants vanish") {
    GridMeta meta;
    meta.dims = {6, 6, 6};
    DisplacementField constant;
    constant.x = constant_volume(meta, 3.0);
    constant.y = constant_volume(meta, -2.0);
    constant.z = constant_volume(meta, 0.5);
    const ScalarVolume hf = high_freq_disp_norm(constant, 20.0);
    for (double v : hf.data) CHECK(std::abs(v) < 1e-12);

    const ScalarVolume zero = high_freq_disp_norm(zero_field(meta), 20.0);
    for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("high-frequency displacement norm matches the naive blur oracle") {
    GridMeta meta;
    meta.dims = {7, 7, 7};
    meta.spacing = {2.0, 2.0, 2.0};
    DisplacementField spike = zero_field(meta);
    spike.x.data[meta.index(3, 3, 3)] = 10.0;
    const double sigma = 3.0;

    const ScalarVolume fast = high_freq_disp_norm(spike, sigma);

    const auto tx = gauss_taps(sigma, meta.spacing[0]);
    const auto ty = gauss_taps(sigma, meta.spacing[1]);
    const auto tz = gauss_taps(sigma, meta.spacing[2]);
    const ScalarVolume low = oracle_convolve(spike.x, tx, ty, tz);
    for (std::size_t v = 0; v < fast.data.size(); ++v) {
        const double residual = std::abs(spike.x.data[v] - low.data[v]);
        CHECK(std::abs(fast.data[v] - residual) < 1e-8);
    }
}

TEST_CASE("heat weights") {
    CHECK(heat_weight(0.0) == 1.0);
    CHECK(heat_weight(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(heat_weight(2.0) == doctest::Approx(std::exp(-4.0)).epsilon(1e-15));
    CHECK_THROWS_AS(heat_weight(-0.1), std::invalid_argument);
}

TEST_CASE("fuse_atlases: single atlas returns its probability map") {
    GridMeta meta;
    meta.dims = {5, 4, 3};
    std::mt19937_64 rng(17);
    const ScalarVolume subject = random_volume(meta, rng);
    const auto probs = random_probs(meta, 3, rng);
    const auto entry = make_entry("only", 175, Condition::neurotypical,
                                  random_volume(meta, rng), probs);
    AtlasFusionParams params;
    const ProbabilityVolume fused = fuse_atlases({entry}, subject, params);
    for (std::size_t i = 0; i < fused.data.size(); ++i)
        CHECK(fused.data[i] == doctest::Approx(probs.data[i]).epsilon(1e-12));

    CHECK_THROWS_AS(fuse_atlases({}, subject, params), std::invalid_argument);
}

TEST_CASE("fuse_atlases: identical distances give the arithmetic mean") {
    GridMeta meta;
    meta.dims = {4, 4, 4};
    std::mt19937_64 rng(23);
    const ScalarVolume subject = random_volume(meta, rng);
    const ScalarVolume shared_image = random_volume(meta, rng);

    std::vector<AtlasEntry> entries;
    for (int k = 0; k < 3; ++k)
        entries.push_back(make_entry("a" + std::to_string(k), 170 + k, Condition::neurotypical,
                                     shared_image, random_probs(meta, 4, rng)));

    AtlasFusionParams params;
    const ProbabilityVolume fused = fuse_atlases(entries, subject, params);
    for (std::size_t v = 0; v < meta.voxel_count(); ++v)
        for (int c = 0; c < 4; ++c) {
            const double mean = (entries[0].probs.at(v, c) + entries[1].probs.at(v, c) +
                                 entries[2].probs.at(v, c)) /
                                3.0;
            CHECK(fused.at(v, c) == doctest::Approx(mean).epsilon(1e-12));
        }
}

TEST_CASE("fuse_atlases: constructed distances give the expected convex weights") {
    // Flat images kill the SSD term; constant displacement offsets after
    // high-pass removal leave F = 0 for atlas 0 and a spike-driven norm for
    // atlas 1 at the spike voxel. Simpler: identical images, displacement
    // magnitudes chosen so D = 0 and D = 1 at every voxel.
    GridMeta meta;
    meta.dims = {3, 3, 3};
    std::mt19937_64 rng(31);
    const ScalarVolume subject = random_volume(meta, rng);

    AtlasEntry near = make_entry("near", 170, Condition::neurotypical, subject,
                                 random_probs(meta, 2, rng));
    AtlasEntry far = make_entry("far", 170, Condition::neurotypical, subject,
                                random_probs(meta, 2, rng));
    AtlasFusionParams params;
    params.alpha = 0.0; // distance driven purely by the displacement term

    // A field equal to its own high-frequency residual is impossible with a
    // normalized kernel, so instead check the fused output against weights
    // computed from the method's own distance pieces (local_ssd = 0 here).
    far.displacement.x = constant_volume(meta, 0.0);
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x)
                far.displacement.x.data[meta.index(x, y, z)] = ((x + y + z) % 2) ? 4.0 : -4.0;

    const ScalarVolume f_near = high_freq_disp_norm(near.displacement, params.gauss_sigma_mm);
    const ScalarVolume f_far = high_freq_disp_norm(far.displacement, params.gauss_sigma_mm);

    const ProbabilityVolume fused = fuse_atlases({near, far}, subject, params);
    for (std::size_t v = 0; v < meta.voxel_count(); ++v) {
        const double w0 = heat_weight(f_near.data[v]);
        const double w1 = heat_weight(f_far.data[v]);
        CHECK(w1 < w0); // the oscillating field is penalized
        for (int c = 0; c < 2; ++c) {
            const double expect =
                (w0 * near.probs.at(v, c) + w1 * far.probs.at(v, c)) / (w0 + w1);
            CHECK(fused.at(v, c) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("fuse_atlases output is a valid probability volume") {
    GridMeta meta;
    meta.dims = {6, 5, 4};
    std::mt19937_64 rng(41);
    const ScalarVolume subject = random_volume(meta, rng);
    std::vector<AtlasEntry> entries;
    for (int k = 0; k < 4; ++k) {
        AtlasEntry e = make_entry("a" + std::to_string(k), 170, Condition::neurotypical,
                                  random_volume(meta, rng), random_probs(meta, 3, rng));
        e.displacement.x = random_volume(meta, rng, -3.0, 3.0);
        e.displacement.y = random_volume(meta, rng, -3.0, 3.0);
        e.displacement.z = random_volume(meta, rng, -3.0, 3.0);
        entries.push_back(std::move(e));
    }
    AtlasFusionParams params;
    const ProbabilityVolume fused = fuse_atlases(entries, subject, params);
    fused.validate(1e-9);

    // Convex combination: fused values stay inside the per-voxel min/max.
    for (std::size_t v = 0; v < meta.voxel_count(); ++v)
        for (int c = 0; c < 3; ++c) {
            double lo = 1.0, hi = 0.0;
            for (const auto& e : entries) {
                lo = std::min(lo, e.probs.at(v, c));
                hi = std::max(hi, e.probs.at(v, c));
            }
            CHECK(fused.at(v, c) >= lo - 1e-12);
            CHECK(fused.at(v, c) <= hi + 1e-12);
        }
}
