#include "veritas/dro.hpp"

#include "veritas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace veritas {

namespace {

void check_finite(const std::vector<double>& losses) {
    if (losses.empty()) throw std::invalid_argument("loss vector is empty");
    for (double l : losses)
        if (!std::isfinite(l)) throw std::invalid_argument("loss vector has non-finite entries");
}

double log_sum_exp(const std::vector<double>& v, double scale) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, scale * x);
    double acc = 0.0;
    for (double x : v) acc += std::exp(scale * x - mx);
    return mx + std::log(acc);
}

} // namespace

double kl_divergence(const std::vector<double>& q, const std::vector<double>& p) {
    if (q.size() != p.size() || q.empty())
        throw std::invalid_argument("kl_divergence: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] == 0.0) continue;
        if (!(p[i] > 0.0)) return std::numeric_limits<double>::infinity();
        acc += q[i] * std::log(q[i] / p[i]);
    }
    return acc;
}

std::vector<double> hardness_probs(const std::vector<double>& losses, double beta) {
    check_finite(losses);
    if (beta < 0.0) throw std::invalid_argument("hardness_probs: beta must be >= 0");
    double mx = -std::numeric_limits<double>::infinity();
    for (double l : losses) mx = std::max(mx, beta * l);
    std::vector<double> probs(losses.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        probs[i] = std::exp(beta * losses[i] - mx);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double robust_loss(const std::vector<double>& losses, double beta) {
    check_finite(losses);
    if (!(beta > 0.0)) throw std::invalid_argument("robust_loss: beta must be > 0");
    const double n = static_cast<double>(losses.size());
    return (log_sum_exp(losses, beta) - std::log(n)) / beta;
}

double percentile_bound(const std::vector<double>& losses, double beta, double alpha_q) {
    check_finite(losses);
    if (!(beta > 0.0)) throw std::invalid_argument("percentile_bound: beta must be > 0");
    if (!(alpha_q > 0.0 && alpha_q <= 1.0))
        throw std::invalid_argument("percentile_bound: alpha must lie in (0, 1]");
    const double n = static_cast<double>(losses.size());
    return (log_sum_exp(losses, beta) - std::log(alpha_q * n)) / beta;
}

void SamplerState::validate() const {
    check_finite(stale_losses);
    if (!(beta > 0.0)) throw std::invalid_argument("SamplerState: beta must be > 0");
    if (!(w_min > 0.0 && w_min <= 1.0 && w_max >= 1.0))
        throw std::invalid_argument("SamplerState: need 0 < w_min <= 1 <= w_max");
}

std::vector<std::size_t> sample_batch(SamplerState& state, std::size_t batch_size) {
    state.validate();
    if (batch_size < 1) throw std::invalid_argument("sample_batch: batch size must be >= 1");
    const std::vector<double> probs = hardness_probs(state.stale_losses, state.beta);
    std::vector<double> cdf(probs.size());
    std::partial_sum(probs.begin(), probs.end(), cdf.begin());
    cdf.back() = 1.0;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> batch(batch_size);
    for (std::size_t j = 0; j < batch_size; ++j) {
        const double u = unit(state.rng);
        batch[j] = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    }
    return batch;
}

std::vector<double> importance_weights(const SamplerState& state,
                                       const std::vector<std::size_t>& batch,
                                       const std::vector<double>& new_losses) {
    if (batch.size() != new_losses.size())
        throw std::invalid_argument("importance_weights: batch/loss size mismatch");
    std::vector<double> weights(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (batch[j] >= state.stale_losses.size())
            throw std::out_of_range("importance_weights: batch index out of range");
        const double delta = new_losses[j] - state.stale_losses[batch[j]];
        weights[j] = std::clamp(std::exp(state.beta * delta), state.w_min, state.w_max);
    }
    return weights;
}

void update_stale(SamplerState& state, const std::vector<std::size_t>& batch,
                  const std::vector<double>& new_losses) {
    if (batch.size() != new_losses.size())
        throw std::invalid_argument("update_stale: batch/loss size mismatch");
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (batch[j] >= state.stale_losses.size())
            throw std::out_of_range("update_stale: batch index out of range");
        state.stale_losses[batch[j]] = new_losses[j];
    }
}

// ---- toy trainer ----

ToyDataset make_blobs(const std::vector<std::array<double, 2>>& centers,
                      const std::vector<std::size_t>& counts, double sigma, std::uint64_t seed) {
    if (centers.size() != counts.size() || centers.empty())
        throw std::invalid_argument("make_blobs: one count per center required");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    ToyDataset ds;
    ds.classes = static_cast<int>(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t i = 0; i < counts[c]; ++i) {
            ds.x.push_back({centers[c][0] + noise(rng), centers[c][1] + noise(rng)});
            ds.y.push_back(static_cast<int>(c));
        }
    return ds;
}

namespace {

// Linear softmax model: weights are classes x 3 (w0, w1, bias).
std::vector<double> forward_probs(const std::vector<double>& weights, int classes,
                                  const std::array<double, 2>& x) {
    std::vector<double> logits(classes);
    for (int c = 0; c < classes; ++c)
        logits[c] = weights[c * 3] * x[0] + weights[c * 3 + 1] * x[1] + weights[c * 3 + 2];
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (double& l : logits) l /= sum;
    return logits;
}

double example_loss(const std::vector<double>& weights, int classes, const ToyDataset& ds,
                    std::size_t i) {
    const auto probs = forward_probs(weights, classes, ds.x[i]);
    return -std::log(std::max(probs[ds.y[i]], 1e-300));
}

double mean_loss(const std::vector<double>& weights, int classes, const ToyDataset& ds) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ds.x.size(); ++i) acc += example_loss(weights, classes, ds, i);
    return acc / static_cast<double>(ds.x.size());
}

std::vector<double> per_class_accuracy(const std::vector<double>& weights, int classes,
                                       const ToyDataset& ds) {
    std::vector<double> correct(classes, 0.0), total(classes, 0.0);
    for (std::size_t i = 0; i < ds.x.size(); ++i) {
        const auto probs = forward_probs(weights, classes, ds.x[i]);
        const int pred = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        total[ds.y[i]] += 1.0;
        correct[ds.y[i]] += (pred == ds.y[i]);
    }
    std::vector<double> acc(classes, 0.0);
    for (int c = 0; c < classes; ++c) acc[c] = total[c] > 0.0 ? correct[c] / total[c] : 0.0;
    return acc;
}

double distribution_entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

} // namespace

ToyTrainResult toy_train(const ToyDataset& train, const ToyDataset& eval_set,
                         const ToyTrainConfig& cfg) {
    if (train.x.empty() || train.classes < 2)
        throw std::invalid_argument("toy_train: invalid training set");
    if (cfg.steps < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0))
        throw std::invalid_argument("toy_train: invalid hyperparameters");
    if (cfg.mode == TrainMode::dro && !(cfg.beta > 0.0))
        throw std::invalid_argument("toy_train: DRO requires beta > 0");

    const int classes = train.classes;
    const std::size_t n = train.x.size();
    std::vector<double> weights(static_cast<std::size_t>(classes) * 3, 0.0);

    SamplerState state;
    state.stale_losses.assign(n, 0.0);
    state.beta = cfg.mode == TrainMode::dro ? cfg.beta : 1.0;
    state.rng.seed(cfg.seed);
    // Initial stale losses from the untrained model, so the first hardness
    // weights are already meaningful.
    for (std::size_t i = 0; i < n; ++i)
        state.stale_losses[i] = example_loss(weights, classes, train, i);

    std::uniform_int_distribution<std::size_t> uniform_index(0, n - 1);
    ToyTrainResult result;

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<std::size_t> batch;
        if (cfg.mode == TrainMode::dro) {
            batch = sample_batch(state, static_cast<std::size_t>(cfg.batch_size));
        } else {
            batch.resize(cfg.batch_size);
            for (auto& b : batch) b = uniform_index(state.rng);
        }

        std::vector<double> new_losses(batch.size());
        for (std::size_t j = 0; j < batch.size(); ++j)
            new_losses[j] = example_loss(weights, classes, train, batch[j]);

        std::vector<double> sample_weights(batch.size(), 1.0);
        if (cfg.mode == TrainMode::dro && cfg.importance_sampling)
            sample_weights = importance_weights(state, batch, new_losses);
        update_stale(state, batch, new_losses);

        std::vector<double> grad(weights.size(), 0.0);
        for (std::size_t j = 0; j < batch.size(); ++j) {
            const std::size_t i = batch[j];
            const auto probs = forward_probs(weights, classes, train.x[i]);
            for (int c = 0; c < classes; ++c) {
                const double err = sample_weights[j] * (probs[c] - (c == train.y[i] ? 1.0 : 0.0));
                grad[c * 3] += err * train.x[i][0];
                grad[c * 3 + 1] += err * train.x[i][1];
                grad[c * 3 + 2] += err;
            }
        }
        const double scale = cfg.lr / static_cast<double>(batch.size());
        for (std::size_t w = 0; w < weights.size(); ++w) {
            weights[w] -= scale * grad[w];
            if (!std::isfinite(weights[w]))
                throw numerical_error("toy_train: training diverged (non-finite weights)");
        }

        if ((step + 1) % cfg.stats_every == 0 || step + 1 == cfg.steps) {
            ToyEpochStats s;
            s.step = step + 1;
            s.mean_train_loss = mean_loss(weights, classes, train);
            if (std::isnan(s.mean_train_loss))
                throw numerical_error("toy_train: training diverged (NaN loss)");
            s.per_class_accuracy = per_class_accuracy(weights, classes, eval_set);
            s.sampler_entropy = distribution_entropy(
                cfg.mode == TrainMode::dro
                    ? hardness_probs(state.stale_losses, state.beta)
                    : std::vector<double>(n, 1.0 / static_cast<double>(n)));
            result.stats.push_back(std::move(s));
        }
    }

    result.weights = std::move(weights);
    result.final_mean_train_loss = mean_loss(result.weights, classes, train);
    result.final_per_class_accuracy = per_class_accuracy(result.weights, classes, eval_set);
    return result;
}

} // namespace veritas
