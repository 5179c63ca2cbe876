#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "svrnn/dataset.hpp"
#include "svrnn/models.hpp"

namespace svrnn {

/// Adam moments for one parameter store.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const ParamStore& params);
};

/// Bias-corrected Adam update of every tensor in `params`.
void adam_step(AdamState& state, ParamStore& params, const std::vector<Tensor>& grads, double lr);

/// Scales grads in place so their global L2 norm is at most max_norm. Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

struct TrainConfig {
    std::size_t batch_size = 10;
    double learning_rate = 1e-3;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;  // <= 0 disables clipping
    /// Fraction of each epoch drawn from the support set. Negative: X and
    /// X_s are concatenated whole, so the ratio follows the set sizes.
    double support_fraction = -1.0;
    /// Worker threads for per-datum gradients within a batch. Results do not depend on this.
    std::size_t threads = 1;

    void validate() const;
};

struct BatchItem {
    const Datum* datum = nullptr;
    bool is_support = false;
    std::size_t source_index = 0;  // index within X or X_s
};

using Batch = std::vector<BatchItem>;

/// Shuffled batches for one epoch, keyed by (seed, epoch). The last batch may be short.
std::vector<Batch> minibatch_iter(const Dataset& X, const Dataset* X_s, std::size_t batch_size, std::size_t epoch,
                                  std::uint64_t seed, double support_fraction = -1.0);

struct TrainResult {
    std::vector<LossBreakdown> history;  // one row per epoch: mean of batch-mean losses
    ParamStore best_params;              // lowest epoch total; initial params if no epochs ran
    std::size_t best_epoch = 0;          // 1-based; 0 when no epochs ran
};

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown& loss)>;

/// Trains `model` in place. X_s is required for split models and rejected for the VRNN.
TrainResult train(GenerativeModel& model, const Dataset& X, const Dataset* X_s, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Loss and parameter gradients of a batch, averaged over its items. Summation runs in item order.
struct BatchGradient {
    LossBreakdown loss;
    std::vector<Tensor> grads;
};

BatchGradient batch_gradient(const GenerativeModel& model, const Batch& batch, std::uint64_t seed, std::size_t epoch,
                             std::size_t threads = 1);

}  // namespace svrnn
