#include <benchmark/benchmark.h>

#include "veritas/contracts.hpp"
#include "veritas/dempster.hpp"
#include "veritas/dro.hpp"
#include "veritas/edt.hpp"
#include "veritas/fusion.hpp"
#include "veritas/metrics.hpp"

#include <random>

using namespace veritas;

namespace {

LabelSpace make_space(int k) {
    std::vector<std::string> names;
    for (int c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    return LabelSpace(names);
}

Bpa random_bpa(const LabelSpace& space, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    const std::uint32_t subsets = (std::uint32_t(1) << space.size()) - 1;
    std::vector<std::pair<SubsetMask, double>> masses;
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double v = unit(rng);
        masses.emplace_back(SubsetMask(1u + rng() % subsets), v);
        total += v;
    }
    masses.emplace_back(space.full_set(), total); // keeps pairs combinable
    total *= 2.0;
    for (auto& [s, v] : masses) v /= total;
    return Bpa(space, masses);
}

} // namespace

static void BM_generic_combine(benchmark::State& state) {
    const LabelSpace space = make_space(static_cast<int>(state.range(0)));
    std::mt19937_64 rng(1);
    const Bpa m1 = random_bpa(space, rng);
    const Bpa m2 = random_bpa(space, rng);
    for (auto _ : state) benchmark::DoNotOptimize(combine(m1, m2));
}
BENCHMARK(BM_generic_combine)->DenseRange(2, 10, 2);

// The O(K) anatomical reweighting against the generic fold + combination it
// provably equals.
static void BM_anatomical_fast_path(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const LabelSpace space = make_space(k);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> w(k), p(k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
        w[c] = unit(rng);
        p[c] = unit(rng) + 0.01;
        sum += p[c];
    }
    w[0] = 1.0;
    for (auto& v : p) v /= sum;
    const ClassProbability prob(space, p);
    for (auto _ : state) benchmark::DoNotOptimize(apply_anatomical(prob, w));
}
BENCHMARK(BM_anatomical_fast_path)->DenseRange(2, 10, 2);

static void BM_anatomical_generic_route(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const LabelSpace space = make_space(k);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> w(k), p(k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
        w[c] = unit(rng);
        p[c] = unit(rng) + 0.01;
        sum += p[c];
    }
    w[0] = 1.0;
    for (auto& v : p) v /= sum;
    const ClassProbability prob(space, p);
    for (auto _ : state) {
        std::vector<Bpa> contracts;
        for (int c = 0; c < k; ++c) contracts.push_back(anatomical_class_bpa(space, c, w[c]));
        benchmark::DoNotOptimize(combine_prob(prob, combine_many(space, contracts)));
    }
}
BENCHMARK(BM_anatomical_generic_route)->DenseRange(2, 10, 2);

static void BM_distance_transform(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    GridMeta meta;
    meta.dims = {n, n, n};
    meta.spacing = {0.8, 0.8, 1.2};
    std::mt19937_64 rng(3);
    MaskVolume mask;
    mask.meta = meta;
    mask.data.resize(meta.voxel_count());
    for (auto& v : mask.data) v = (rng() % 100) < 5;
    mask.data[0] = 1;
    for (auto _ : state) benchmark::DoNotOptimize(distance_transform(mask));
    state.SetItemsProcessed(state.iterations() * meta.voxel_count());
}
BENCHMARK(BM_distance_transform)->Arg(32)->Arg(64)->Arg(96);

static void BM_hd95(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    GridMeta meta;
    meta.dims = {n, n, n};
    std::mt19937_64 rng(4);
    auto ball = [&](double cx, double r) {
        MaskVolume m;
        m.meta = meta;
        m.data.assign(meta.voxel_count(), 0);
        for (int z = 0; z < n; ++z)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const double dx = x - cx, dy = y - n / 2.0, dz = z - n / 2.0;
                    if (dx * dx + dy * dy + dz * dz <= r * r) m.data[meta.index(x, y, z)] = 1;
                }
        return m;
    };
    const MaskVolume a = ball(n / 2.0, n / 3.0);
    const MaskVolume b = ball(n / 2.0 + 2.0, n / 3.2);
    for (auto _ : state) benchmark::DoNotOptimize(hd95(a, b));
}
BENCHMARK(BM_hd95)->Arg(32)->Arg(64);

static void BM_trustworthy_fuse(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const LabelSpace space = make_space(4);
    GridMeta meta;
    meta.dims = {n, n, n};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.01, 1.0);

    ProbabilityVolume p_fb;
    p_fb.meta = meta;
    p_fb.channels = 4;
    p_fb.data.resize(meta.voxel_count() * 4);
    ProbabilityVolume p_ai = p_fb;
    ScalarVolume image;
    image.meta = meta;
    image.data.resize(meta.voxel_count());
    for (std::size_t v = 0; v < meta.voxel_count(); ++v) {
        const int owner = static_cast<int>((v * 4) / meta.voxel_count());
        double sum = 0.0;
        for (int c = 0; c < 4; ++c) {
            p_fb.at(v, c) = owner == c ? 0.7 : 0.1;
            p_ai.at(v, c) = unit(rng);
            sum += p_ai.at(v, c);
        }
        for (int c = 0; c < 4; ++c) p_ai.at(v, c) /= sum;
        image.data[v] = 50.0 * unit(rng);
    }

    FusionConfig cfg;
    cfg.space = space;
    cfg.margins_mm = {2.0, 2.0, 2.0, 2.0};
    cfg.c_high = SubsetMask::singleton(3);
    Gmm2 g;
    g.mu_low = 10.0;
    g.sigma_low = 5.0;
    g.mu_high = 45.0;
    g.sigma_high = 5.0;
    cfg.gmm = g;
    const auto aw = build_contracts_from_fallback(space, p_fb, cfg.margins_mm, cfg.phi);

    for (auto _ : state)
        benchmark::DoNotOptimize(trustworthy_fuse(p_ai, p_fb, aw, image, cfg));
    state.SetItemsProcessed(state.iterations() * meta.voxel_count());
}
BENCHMARK(BM_trustworthy_fuse)->Arg(32)->Arg(64);

static void BM_hardness_sampling(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unit(0.0, 2.0);
    SamplerState sampler;
    sampler.stale_losses.resize(n);
    for (auto& v : sampler.stale_losses) v = unit(rng);
    sampler.beta = 10.0;
    for (auto _ : state) benchmark::DoNotOptimize(sample_batch(sampler, 32));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_hardness_sampling)->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
