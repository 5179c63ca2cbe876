#include "svrnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace svrnn {

AdamState AdamState::for_params(const ParamStore& params) {
    AdamState s;
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m.emplace_back(params[i].shape());
        s.v.emplace_back(params[i].shape());
    }
    return s;
}

void adam_step(AdamState& state, ParamStore& params, const std::vector<Tensor>& grads, double lr) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients and " +
                         std::to_string(state.m.size()) + " moments for " + std::to_string(params.size()) +
                         " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].shape() || state.m[i].shape() != params[i].shape()) {
            throw ShapeError("adam_step: shape mismatch for parameter '" + params.name(i) + "'");
        }
    }
    ++state.t;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        auto g = grads[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads) {
        for (double x : g.data()) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& g : grads) {
            for (double& x : g.data()) x *= s;
        }
    }
    return norm;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (support_fraction >= 1.0) throw std::invalid_argument("support_fraction must be below 1");
    if (threads == 0) throw std::invalid_argument("threads must be at least 1");
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554600000000ull;
constexpr std::uint64_t kNoiseStream = 0x4e4f495300000000ull;

void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

std::vector<Batch> minibatch_iter(const Dataset& X, const Dataset* X_s, std::size_t batch_size, std::size_t epoch,
                                  std::uint64_t seed, double support_fraction) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
    const std::size_t n_real = X.size();
    std::size_t n_support = X_s ? X_s->size() : 0;
    if (n_real + n_support == 0) throw std::invalid_argument("cannot iterate over an empty dataset");

    RngStream rng(seed, kShuffleStream + epoch);
    std::vector<std::size_t> support_pick(n_support);
    for (std::size_t i = 0; i < n_support; ++i) support_pick[i] = i;
    if (X_s && support_fraction >= 0.0) {
        const double want = support_fraction / (1.0 - support_fraction) * static_cast<double>(n_real);
        const auto m = std::min<std::size_t>(n_support, static_cast<std::size_t>(std::llround(want)));
        shuffle(support_pick, rng);
        support_pick.resize(m);
        std::sort(support_pick.begin(), support_pick.end());
        n_support = m;
    }

    std::vector<BatchItem> items;
    items.reserve(n_real + n_support);
    for (std::size_t i = 0; i < n_real; ++i) items.push_back({&X.data[i], false, i});
    for (std::size_t i : support_pick) items.push_back({&X_s->data[i], true, i});
    if (items.empty()) throw std::invalid_argument("cannot iterate over an empty dataset");

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        Batch b;
        for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) b.push_back(items[order[k]]);
        batches.push_back(std::move(b));
    }
    return batches;
}

namespace {

struct ItemGradient {
    LossBreakdown loss;
    std::vector<Tensor> grads;
};

ItemGradient item_gradient(const GenerativeModel& model, const BatchItem& item, std::uint64_t seed,
                           std::size_t epoch) {
    // Noise is keyed by the datum, not its batch position, so it does not depend on threading.
    const std::uint64_t stream = kNoiseStream + (epoch << 20) + (item.is_support ? 1u << 19 : 0u) + item.source_index;
    RngStream rng(seed, stream);
    const LatentNoise noise = model.draw_noise(rng);
    ad::Tape tape;
    BoundParams p(tape, model.params());
    const LossTerms terms = model.loss(p, item.datum->observations, item.is_support, noise);
    tape.backward(terms.total);
    ItemGradient out{terms.values(), {}};
    out.grads.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out.grads.push_back(p[i].grad());
    return out;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
    acc.reconstruction += x.reconstruction;
    acc.kl_primary += x.kl_primary;
    acc.kl_shared += x.kl_shared;
    acc.total += x.total;
}

LossBreakdown scaled(LossBreakdown x, double s) {
    x.reconstruction *= s;
    x.kl_primary *= s;
    x.kl_shared *= s;
    x.total *= s;
    return x;
}

}  // namespace

BatchGradient batch_gradient(const GenerativeModel& model, const Batch& batch, std::uint64_t seed, std::size_t epoch,
                             std::size_t threads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    BatchGradient out;
    const ParamStore& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) out.grads.emplace_back(params[i].shape());

    auto add_item = [&out](const ItemGradient& g) {
        accumulate(out.loss, g.loss);
        for (std::size_t i = 0; i < g.grads.size(); ++i) {
            auto dst = out.grads[i].data();
            auto src = g.grads[i].data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    };

    if (threads <= 1 || batch.size() == 1) {
        for (const auto& item : batch) add_item(item_gradient(model, item, seed, epoch));
    } else {
        std::vector<ItemGradient> per_item(batch.size());
        std::vector<std::exception_ptr> errors(batch.size());
        const std::size_t workers = std::min(threads, batch.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < batch.size(); k += workers) {
                    try {
                        per_item[k] = item_gradient(model, batch[k], seed, epoch);
                    } catch (...) {
                        errors[k] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        for (const auto& g : per_item) add_item(g);
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss = scaled(out.loss, inv);
    for (auto& g : out.grads) {
        for (double& x : g.data()) x *= inv;
    }
    return out;
}

TrainResult train(GenerativeModel& model, const Dataset& X, const Dataset* X_s, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    const bool split = uses_support(model.kind());
    if (split && !X_s) {
        throw std::invalid_argument(std::string(to_string(model.kind())) + " needs a support dataset");
    }
    if (!split && X_s) throw std::invalid_argument("the VRNN takes no support dataset");
    const Architecture& arch = model.arch();
    if (X.grid_side != arch.grid_side || X.horizon != arch.horizon) {
        throw GeometryError("training data (T=" + std::to_string(X.horizon) + ", side=" + std::to_string(X.grid_side) +
                            ") does not match the model (T=" + std::to_string(arch.horizon) +
                            ", side=" + std::to_string(arch.grid_side) + ")");
    }
    if (X_s) require_same_geometry(X, *X_s);
    X.validate();
    if (X_s) X_s->validate();

    TrainResult result;
    result.best_params = model.params();
    if (config.epochs == 0) return result;

    AdamState adam = AdamState::for_params(model.params());
    double best = 0.0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto batches = minibatch_iter(X, X_s, config.batch_size, epoch, config.seed, config.support_fraction);
        LossBreakdown epoch_loss;
        for (const auto& batch : batches) {
            BatchGradient g = batch_gradient(model, batch, config.seed, epoch, config.threads);
            accumulate(epoch_loss, g.loss);
            clip_global_norm(g.grads, config.clip_norm);
            adam_step(adam, model.params(), g.grads, config.learning_rate);
        }
        epoch_loss = scaled(epoch_loss, 1.0 / static_cast<double>(batches.size()));
        if (!std::isfinite(epoch_loss.total)) {
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        }
        result.history.push_back(epoch_loss);
        if (result.best_epoch == 0 || epoch_loss.total < best) {
            best = epoch_loss.total;
            result.best_epoch = epoch;
            result.best_params = model.params();
        }
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    return result;
}

}  // namespace svrnn
