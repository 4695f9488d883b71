#pragma once
// Distributionally robust optimization with hardness-weighted sampling.
//
// The KL-ball DRO objective has the closed forms
//   sampling distribution  p_bar = softmax(beta * L)
//   robust loss            R = (1/beta) log( (1/n) sum_i exp(beta L_i) )
//   percentile bound       l_hat = (1/beta) log( (1/(alpha n)) sum_i exp(beta L_i) )
// over the stale per-example loss vector L. A linear-softmax toy trainer
// demonstrates ERM vs DRO end to end at desk scale.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace veritas {

// The phi-divergence backing the sampler. Only the KL divergence has the
// closed forms below; other choices exist solely for oracle-style reporting.
struct PhiDivergenceSpec {
    enum class Kind { kl } kind = Kind::kl;
    double strong_convexity = 1.0; // rho of phi(z) = z log z - z + 1 on [0, n]

    std::string describe() const { return "KL (rho = 1 strongly convex generator)"; }
};

// D_KL(q || p) over two distributions of equal length.
double kl_divergence(const std::vector<double>& q, const std::vector<double>& p);

// softmax(beta * L), computed with a max shift; beta = 0 gives uniform.
std::vector<double> hardness_probs(const std::vector<double>& losses, double beta);

// Between mean(L) and max(L); beta > 0 required.
double robust_loss(const std::vector<double>& losses, double beta);

// Chernoff upper bound on the (1 - alpha_q) loss percentile, alpha_q in (0, 1].
// The fraction of L_i at or above the bound is at most alpha_q.
double percentile_bound(const std::vector<double>& losses, double beta, double alpha_q);

struct SamplerState {
    std::vector<double> stale_losses;
    double beta = 1.0;
    double w_min = 0.1, w_max = 10.0;
    std::mt19937_64 rng{0};

    void validate() const;
};

// b indices drawn i.i.d. (with replacement) from softmax(beta * stale).
std::vector<std::size_t> sample_batch(SamplerState& state, std::size_t batch_size);

// clip(exp(beta * (L_new - L_stale)), w_min, w_max) per batch entry.
std::vector<double> importance_weights(const SamplerState& state,
                                       const std::vector<std::size_t>& batch,
                                       const std::vector<double>& new_losses);

// Overwrites exactly the batch entries of the stale loss vector.
void update_stale(SamplerState& state, const std::vector<std::size_t>& batch,
                  const std::vector<double>& new_losses);

// ---- toy trainer: 2-D points, linear softmax classifier ----

struct ToyDataset {
    std::vector<std::array<double, 2>> x;
    std::vector<int> y;
    int classes = 0;
};

// Isotropic Gaussian blobs, one center per class.
ToyDataset make_blobs(const std::vector<std::array<double, 2>>& centers,
                      const std::vector<std::size_t>& counts, double sigma, std::uint64_t seed);

enum class TrainMode { erm, dro };

struct ToyTrainConfig {
    TrainMode mode = TrainMode::erm;
    double beta = 10.0;
    double lr = 0.1;
    int steps = 2000;
    int batch_size = 8;
    int stats_every = 500; // record stats every this many steps
    bool importance_sampling = true;
    std::uint64_t seed = 0;
};

struct ToyEpochStats {
    int step = 0;
    double mean_train_loss = 0.0;
    std::vector<double> per_class_accuracy; // on the eval set
    double sampler_entropy = 0.0;           // of the sampling distribution
};

struct ToyTrainResult {
    std::vector<double> weights; // classes x 3 (w0, w1, bias), row-major
    std::vector<ToyEpochStats> stats;
    double final_mean_train_loss = 0.0;
    std::vector<double> final_per_class_accuracy;
};

// ERM samples uniformly; DRO samples by hardness; the gradient math is
// identical otherwise. Throws numerical_error if the loss diverges to NaN.
ToyTrainResult toy_train(const ToyDataset& train, const ToyDataset& eval_set,
                         const ToyTrainConfig& cfg);

} // namespace veritas
