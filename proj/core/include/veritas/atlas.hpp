#pragma once
// Atlas-construction numerics: Gaussian temporal weighting, symmetrized
// weighted intensity averaging, and weighted generalized Procrustes
// alignment under per-sample anisotropic scaling + translation with
// per-landmark weights (zero weight = missing landmark).

#include "veritas/volume.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace veritas {

// Gaussian kernel weight in gestational age, sigma in days (default 3).
// w = exp(-((ga - target)/sigma)^2 / 2) / (sqrt(2 pi) sigma)
double temporal_weight(double ga_days, double ga_target_days, double sigma_days = 3.0);

// Variant used by the Procrustes weighting: zeroed beyond 3 sigma.
double temporal_weight_truncated(double ga_days, double ga_target_days, double sigma_days = 3.0);

// Time-weighted, mirror-symmetrized intensity average:
//   out = sum_i w_i (I_i + S(I_i)) / (2 sum_i w_i)
// with S the flip about flip_axis. Each input is first rescaled linearly to
// mean 2000 / std 500 (over `mask` when given, else the whole volume).
// The output is exactly mirror-symmetric by construction.
ScalarVolume weighted_average(const std::vector<ScalarVolume>& volumes,
                              const std::vector<double>& ga_days, double ga_target_days,
                              int flip_axis = 0, double sigma_days = 3.0,
                              const MaskVolume* mask = nullptr);

// Mirror a volume about one grid axis.
ScalarVolume mirror(const ScalarVolume& vol, int flip_axis);

// Linear intensity rescale to the given mean/std over the mask (whole
// volume when null). Throws on constant input.
ScalarVolume rescale_intensities(const ScalarVolume& vol, double target_mean, double target_std,
                                 const MaskVolume* mask = nullptr);

struct LandmarkConfig {
    std::string sample_id;
    double ga_days = 0.0;
    std::vector<std::array<double, 3>> points; // mm, one per landmark
    std::vector<bool> present;                 // false = missing landmark
};

struct SampleTransform {
    std::array<double, 3> scale{1.0, 1.0, 1.0}; // diagonal of M_i
    std::array<double, 3> translation{0.0, 0.0, 0.0};

    std::array<double, 3> apply(const std::array<double, 3>& x) const {
        return {scale[0] * x[0] + translation[0], scale[1] * x[1] + translation[1],
                scale[2] * x[2] + translation[2]};
    }
};

struct ProcrustesSolution {
    std::vector<SampleTransform> transforms;        // one per sample
    std::vector<std::array<double, 3>> consensus;   // one per landmark
    double objective = 0.0;
    int iterations = 0;
    std::vector<double> objective_history;          // objective after each iteration
    double barycenter_residual = 0.0;               // constraint residuals at the solution
    double size_residual = 0.0;
    std::vector<double> barycenter_residual_history; // per-iterate residuals
    std::vector<double> size_residual_history;
};

// Alternating least squares for the weighted generalized Procrustes problem
//   min 1/2 sum_i sum_k w_ik || M_i x_ik + t_i - g_k ||^2
// subject to the consensus barycenter and size being pinned to those of the
// weighted per-landmark means of the raw data. Per-landmark weights come
// from temporal_weight_truncated(ga_i, ga_target) and are zero for missing
// landmarks. The objective is non-increasing across iterations; iteration
// stops on relative decrease < 1e-10 or after 500 iterations.
//
// Preconditions: >= 2 samples; every landmark present in >= 1 sample with
// nonzero temporal weight; not all points coincident.
ProcrustesSolution procrustes_solve(const std::vector<LandmarkConfig>& configs,
                                    double ga_target_days, double sigma_days = 3.0);

// Landmark CSV: sample_id, ga_days, landmark_id, x_mm, y_mm, z_mm, present
// (header row required; landmark_id is a 0-based index).
std::vector<LandmarkConfig> read_landmarks_csv(const std::filesystem::path& path);

} // namespace veritas
