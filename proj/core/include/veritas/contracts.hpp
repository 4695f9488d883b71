#pragma once
// Contract-of-trust constructors.
//
// Anatomical contracts: per class c, a two-focal BPA built from the distance
// to the fallback mask M^c through a thresholding function phi,
//   m^(c)(C \ {c}) = 1 - phi(d),   m^(c)(C) = phi(d).
// Their Dempster combination collapses to a per-voxel weight vector
// w_c = phi(d(x, M^c)); the subset masses follow the product formula
//   m(C \ C') = prod_c [ c in C' ? (1 - w_c) : w_c ],
// and combining with a probability is the O(K) reweighting
//   (p (+) m)(c) = p(c) w_c / sum_c' p(c') w_c'.
//
// Intensity contract: a two-focal BPA on {C_high, C} from a two-component
// 1D Gaussian mixture of the image intensities.

#include "veritas/dempster.hpp"
#include "veritas/volume.hpp"

#include <span>
#include <vector>

namespace veritas {

enum class ThresholdKind { hard, exponential };

ThresholdKind threshold_kind_from_string(const std::string& s);
std::string to_string(ThresholdKind k);

// phi(d): hard margins keep a class admissible while d <= eta (inclusive);
// exponential margins decay as exp(-d / eta).
struct ThresholdingFn {
    ThresholdKind kind = ThresholdKind::hard;
    double eta_mm = 0.0; // hard allows eta = 0; exponential requires eta > 0

    double operator()(double d_mm) const;
};

double anatomical_weight(double d_mm, const ThresholdingFn& phi);

// Per-voxel per-class contract weights, voxel-major and class-fastest.
struct AnatomicalWeights {
    LabelSpace space;
    GridMeta meta;
    std::vector<double> w; // w[voxel * K + c] in [0, 1]

    double at(std::size_t voxel, int cls) const {
        return w[voxel * static_cast<std::size_t>(space.size()) + cls];
    }
    std::span<const double> row(std::size_t voxel) const {
        const auto k = static_cast<std::size_t>(space.size());
        return {w.data() + voxel * k, k};
    }
    ScalarVolume class_volume(int cls) const;
    // Checks the no-complete-contradiction invariant: every voxel has at
    // least one class with weight exactly 1.
    void validate() const;
};

// Builds weights from per-class masks (which must partition the grid) and
// per-class margins. Inside its own mask every voxel gets weight 1.
AnatomicalWeights build_anatomical(const LabelSpace& space, const std::vector<MaskVolume>& masks,
                                   const std::vector<double>& margins_mm, ThresholdKind kind);

// The two-focal BPA of one class at one voxel.
Bpa anatomical_class_bpa(const LabelSpace& space, int cls, double weight);

// Mass the combined anatomical BPA puts on C \ C' (product formula).
double anatomical_mass(std::span<const double> weights, SubsetMask c_prime);

// Full anatomical BPA at one voxel, assembled from the product formula.
Bpa anatomical_bpa(const LabelSpace& space, std::span<const double> weights);

// O(K) combination of a probability with the anatomical BPA.
// Throws on complete contradiction (all surviving weights zero).
ClassProbability apply_anatomical(const ClassProbability& p, std::span<const double> weights);

// In-place flavour for the hot path: p and out are length-K arrays.
void apply_anatomical_raw(std::span<const double> p, std::span<const double> weights,
                          std::span<double> out);

// ---- intensity contract ----

struct Gmm2 {
    double mu_low = 0.0, sigma_low = 1.0;
    double mu_high = 0.0, sigma_high = 1.0;
    double pi_low = 0.5, pi_high = 0.5;

    void validate() const; // sigmas > 0, pis sum to 1, mu_low <= mu_high
};

struct Gmm2Fit {
    Gmm2 model;
    int iterations = 0;
    std::vector<double> log_likelihood; // one entry per EM iteration
};

// EM fit of a two-component 1D mixture. Initialization: means at the
// 25th/75th percentiles, pooled variance, equal mixing weights. Stops when
// the relative log-likelihood change drops below 1e-8; throws after 500
// iterations without convergence or on degenerate (all-equal) data.
// Sigmas are floored at 1e-6 times the data range.
Gmm2Fit fit_gmm2(const std::vector<double>& intensities);

// Intensities of a scalar volume restricted to a mask.
std::vector<double> masked_intensities(const ScalarVolume& image, const MaskVolume& mask);

// Two-focal intensity BPA on {C_high, C}:
//   m(C_high) prop (1/sigma_high) exp(-((I - mu_high)/sigma_high)^2 / 2)
//   m(C)      prop (1/sigma_low)  exp(-((I - mu_low)/sigma_low)^2 / 2)
// normalized to sum 1; m(C) stays strictly positive.
Bpa intensity_bpa(double intensity, const Gmm2& gmm, SubsetMask c_high, const LabelSpace& space);

// Likelihood ratio m(C_high)/m(C) used by the soft-thresholding fast path.
double intensity_boost_ratio(double intensity, const Gmm2& gmm);

// Soft-thresholding combination: channels in C_high are scaled by
// (1 + ratio), then the vector is renormalized. Never zeroes a channel.
ClassProbability apply_intensity(const ClassProbability& p, const Bpa& m);
void apply_intensity_raw(std::span<const double> p, SubsetMask c_high, double ratio,
                         std::span<double> out);

} // namespace veritas
