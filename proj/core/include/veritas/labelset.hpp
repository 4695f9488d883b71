#pragma once
// Label-set loss functions for partially supervised segmentation, on flat
// arrays of per-voxel probabilities and subset annotations.
//
// Phi (marginalize) replaces in-set channels by their mean; Psi0 encodes an
// annotation as the uniform distribution over its set. A loss L is a
// label-set loss iff L(p, g) = L(Phi(p; g), g); the axiom_check harness
// probes that identity plus in-set mass redistributions on random inputs.

#include "veritas/label_space.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace veritas {

struct SoftPrediction {
    std::size_t voxels = 0;
    int classes = 0;
    std::vector<double> p; // row-major, voxels x classes

    double at(std::size_t i, int c) const { return p[i * classes + c]; }
    double& at(std::size_t i, int c) { return p[i * classes + c]; }
    void validate(double tol = 1e-9) const; // rows sum to 1, non-negative
};

struct PartialAnnotation {
    int classes = 0;
    std::vector<SubsetMask> g; // non-empty subsets of the class set

    void validate() const;
};

// Phi: within each g_i the channels are replaced by their mean.
SoftPrediction marginalize(const SoftPrediction& p, const PartialAnnotation& g);

// Psi0: row i uniform over g_i, zero elsewhere.
SoftPrediction psi0(const PartialAnnotation& g);

// Soft mean-class Dice loss between a prediction and a soft target:
//   1 - (1/K) sum_c [ 2 sum_i q_ic p_ic ] / [ sum_i q_ic^a + sum_i p_ic^a + eps ]
double mean_class_dice(const SoftPrediction& p, const SoftPrediction& q_soft, int alpha = 2,
                       double eps = 1e-5);

// Leaf-Dice: the label-set generalization of the mean-class Dice for the
// one-non-singleton annotation pattern. g must take values in
// {L'} u {{c} : c not in L'} for a single L' (fully-singleton g is allowed).
double leaf_dice(const SoftPrediction& p, const PartialAnnotation& g, int alpha = 2,
                 double eps = 1e-5);

// Canonical conversion of the mean-class Dice: L(Phi(p; g), Psi0(g)).
double marginal_dice(const SoftPrediction& p, const PartialAnnotation& g, int alpha = 2,
                     double eps = 1e-5);

// Baseline conversion L(p, Psi0(g)); NOT a label-set loss (negative control).
double soft_target_dice(const SoftPrediction& p, const PartialAnnotation& g, int alpha = 2,
                        double eps = 1e-5);

// Canonical conversion of the cross entropy: CE(Phi(p; g), Psi0(g)),
// averaged over voxels.
double marginal_cross_entropy(const SoftPrediction& p, const PartialAnnotation& g);

// Analytic gradients with respect to p (same layout as p).
std::vector<double> mean_class_dice_grad(const SoftPrediction& p, const SoftPrediction& q_soft,
                                         int alpha = 2, double eps = 1e-5);
std::vector<double> leaf_dice_grad(const SoftPrediction& p, const PartialAnnotation& g,
                                   int alpha = 2, double eps = 1e-5);
std::vector<double> marginal_dice_grad(const SoftPrediction& p, const PartialAnnotation& g,
                                       int alpha = 2, double eps = 1e-5);

using LabelSetLossFn =
    std::function<double(const SoftPrediction&, const PartialAnnotation&)>;

struct AxiomReport {
    std::size_t trials = 0;
    double max_marginalization_violation = 0.0; // |L(p,g) - L(Phi(p;g),g)|
    double max_redistribution_violation = 0.0;  // |L(p,g) - L(q,g)|, q in-set shuffle
    double max_violation() const {
        return std::max(max_marginalization_violation, max_redistribution_violation);
    }
};

// Random (p, g) pairs in the one-non-singleton annotation pattern; for each,
// compares L(p, g) against L(Phi(p; g), g) and against mass-preserving
// in-set redistributions of p.
AxiomReport axiom_check(const LabelSetLossFn& loss, std::size_t trials, std::uint64_t seed,
                        std::size_t voxels = 24, int classes = 4);

} // namespace veritas
