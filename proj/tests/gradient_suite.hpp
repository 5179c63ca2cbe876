#pragma once

// Finite-difference checks shared by the unit tests and the acceptance run.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "svrnn/layers.hpp"
#include "svrnn/models.hpp"
#include "svrnn/rng.hpp"

namespace gradcheck {

using namespace svrnn;
namespace ad = svrnn::ad;

struct Check {
    std::string name;
    std::function<double(std::uint64_t seed)> run;  // normwise relative error
};

/// Random values bounded away from zero, so relu kinks are not straddled by the FD step.
inline Tensor away_from_zero(RngStream& r, const Shape& s) {
    Tensor t = rng_normal(r, s);
    for (double& v : t.data()) v = (v >= 0 ? 0.1 : -0.1) + v;
    return t;
}

/// Weighted sum keeps every output entry in play with a distinct sensitivity.
inline ad::Variable weighted(ad::Tape& tape, const ad::Variable& v, std::uint64_t seed) {
    RngStream r(seed, 999);
    const ad::Variable w = tape.constant(rng_normal(r, v.shape()));
    return ad::sum(ad::mul(v, w));
}

inline double model_gradient_error(const GenerativeModel& model, const Tensor& x, bool is_support,
                                   const LatentNoise& noise, double h = 1e-5) {
    ParamStore work = model.params();
    std::vector<double> analytic;
    {
        ad::Tape tape;
        BoundParams p(tape, model.params());
        const LossTerms terms = model.loss(p, x, is_support, noise);
        tape.backward(terms.total);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const Tensor g = p[i].grad();
            analytic.insert(analytic.end(), g.data().begin(), g.data().end());
        }
    }
    auto eval = [&]() {
        ad::Tape tape;
        BoundParams p(tape, work);
        return model.loss(p, x, is_support, noise).total.value().item();
    };
    double diff = 0.0, scale = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < work.size(); ++i) {
        for (std::size_t j = 0; j < work[i].size(); ++j, ++k) {
            const double keep = work[i][j];
            work[i][j] = keep + h;
            const double up = eval();
            work[i][j] = keep - h;
            const double down = eval();
            work[i][j] = keep;
            const double fd = (up - down) / (2.0 * h);
            diff = std::max(diff, std::abs(analytic[k] - fd));
            scale = std::max(scale, std::abs(fd));
        }
    }
    return diff / std::max(scale, 1e-12);
}

inline Architecture tiny(ModelKind kind) {
    Architecture a = Architecture::reference(kind, 3, 3);
    a.latent_dim = 2;
    a.hidden_dim = 4;
    if (kind == ModelKind::vrnn) {
        a.encoder_hidden = {5};
        a.decoder_hidden = {5};
    } else if (kind == ModelKind::svrnn) {
        a.encoder_hidden = {5, 6, 5};
        a.decoder_hidden = {5, 6, 5};
        a.reconstruction = Reconstruction::sum;
    } else {
        a.grid_side = 8;
        a.horizon = 2;
        a.conv_channels = {2, 3};
        a.reconstruction = Reconstruction::sum;
    }
    return a;
}

inline double full_loss_check(ModelKind kind, std::uint64_t seed) {
    const Architecture a = tiny(kind);
    auto model = GenerativeModel::create(a, seed);
    RngStream r(seed, 77);
    // Perturb biases and gains so no parameter sits exactly at its initial symmetric value.
    for (std::size_t i = 0; i < model->params().size(); ++i) {
        for (double& v : model->params()[i].data()) v += 0.1 * r.normal();
    }
    const Tensor x = rng_normal(r, {a.horizon, a.grid_size()}, 1.0, 1.0);
    const LatentNoise noise = model->draw_noise(r);
    return model_gradient_error(*model, x, seed % 2 == 0, noise);
}

inline std::vector<Check> all_checks() {
    using oracle::gradient_error;
    using V = std::vector<ad::Variable>;
    std::vector<Check> c;
    auto unary = [](const char* name, std::function<ad::Variable(const ad::Variable&)> op, bool kink) {
        return Check{name, [op, kink](std::uint64_t s) {
                         RngStream r(s);
                         const Tensor x = kink ? away_from_zero(r, {3, 4}) : rng_normal(r, {3, 4});
                         return gradient_error({x}, [&](ad::Tape& t, const V& v) { return weighted(t, op(v[0]), s); });
                     }};
    };
    auto binary = [](const char* name, std::function<ad::Variable(const ad::Variable&, const ad::Variable&)> op) {
        return Check{name, [op](std::uint64_t s) {
                         RngStream r(s);
                         const Tensor a = rng_normal(r, {2, 5}), b = rng_normal(r, {2, 5});
                         return gradient_error({a, b},
                                               [&](ad::Tape& t, const V& v) { return weighted(t, op(v[0], v[1]), s); });
                     }};
    };
    c.push_back(binary("add", [](auto& a, auto& b) { return ad::add(a, b); }));
    c.push_back(binary("sub", [](auto& a, auto& b) { return ad::sub(a, b); }));
    c.push_back(binary("mul", [](auto& a, auto& b) { return ad::mul(a, b); }));
    c.push_back(unary("scale", [](auto& a) { return ad::scale(a, -1.7); }, false));
    c.push_back(unary("tanh", [](auto& a) { return ad::tanh(a); }, false));
    c.push_back(unary("relu", [](auto& a) { return ad::relu(a); }, true));
    c.push_back(unary("exp", [](auto& a) { return ad::exp(a); }, false));
    c.push_back(unary("reshape", [](auto& a) { return ad::reshape(a, {4, 3}); }, false));
    c.push_back(unary("slice", [](auto& a) { return ad::slice(a, 3, 6); }, false));
    c.push_back({"sum", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {6})}, [](ad::Tape&, const V& v) {
                         return ad::mul(ad::sum(v[0]), ad::sum(ad::mul(v[0], v[0])));
                     });
                 }});
    c.push_back({"mean", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {6})}, [](ad::Tape&, const V& v) {
                         return ad::mul(ad::mean(v[0]), ad::mean(ad::exp(v[0])));
                     });
                 }});
    c.push_back({"matmul", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {3, 4}), rng_normal(r, {4, 2})}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::matmul(v[0], v[1]), s);
                     });
                 }});
    c.push_back({"concat", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {3}), rng_normal(r, {2, 2})}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::concat({v[0], v[1], v[0]}), s);
                     });
                 }});
    for (auto act : {ad::Activation::none, ad::Activation::tanh, ad::Activation::relu}) {
        const std::string name = act == ad::Activation::none ? "dense" : act == ad::Activation::tanh ? "dense_tanh"
                                                                                                      : "dense_relu";
        c.push_back({name, [act](std::uint64_t s) {
                         RngStream r(s);
                         const Tensor x = rng_normal(r, {5}), w = rng_normal(r, {4, 5}), b = rng_normal(r, {4});
                         return gradient_error({x, w, b}, [&](ad::Tape& t, const V& v) {
                             return weighted(t, ad::dense(v[0], v[1], v[2], act), s);
                         });
                     }});
    }
    c.push_back({"conv2d", [](std::uint64_t s) {
                     RngStream r(s);
                     const Tensor x = rng_normal(r, {2, 5, 5}), k = rng_normal(r, {3, 2, 3, 3});
                     return gradient_error({x, k}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::conv2d(v[0], v[1], {3, 2, 1, 0}), s);
                     });
                 }});
    c.push_back({"conv_transpose2d", [](std::uint64_t s) {
                     RngStream r(s);
                     const Tensor x = rng_normal(r, {3, 3, 3}), k = rng_normal(r, {3, 2, 3, 3});
                     return gradient_error({x, k}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::conv_transpose2d(v[0], v[1], {3, 2, 1, 1}), s);
                     });
                 }});
    c.push_back({"channel_bias", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {3, 2, 2}), rng_normal(r, {3})}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::channel_bias(v[0], v[1]), s);
                     });
                 }});
    c.push_back({"center_crop", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {2, 5, 6})}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::center_crop(v[0], 3, 3), s);
                     });
                 }});
    c.push_back({"layer_norm", [](std::uint64_t s) {
                     RngStream r(s);
                     const Tensor x = rng_normal(r, {6}), g = rng_normal(r, {6}), b = rng_normal(r, {6});
                     return gradient_error({x, g, b}, [s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::layer_norm(v[0], v[1], v[2]), s);
                     });
                 }});
    c.push_back({"kl_to_standard_normal", [](std::uint64_t s) {
                     RngStream r(s);
                     return gradient_error({rng_normal(r, {4}), rng_normal(r, {4})}, [](ad::Tape&, const V& v) {
                         return ad::kl_to_standard_normal({v[0], v[1]});
                     });
                 }});
    c.push_back({"reparameterize", [](std::uint64_t s) {
                     RngStream r(s);
                     const Tensor eps = rng_normal(r, {4});
                     return gradient_error({rng_normal(r, {4}), rng_normal(r, {4})}, [&eps, s](ad::Tape& t, const V& v) {
                         return weighted(t, ad::reparameterize({v[0], v[1]}, eps), s);
                     });
                 }});
    c.push_back({"mse", [](std::uint64_t s) {
                     RngStream r(s);
                     const Tensor y = rng_normal(r, {7});
                     return gradient_error({rng_normal(r, {7})}, [&y](ad::Tape&, const V& v) { return ad::mse(v[0], y); });
                 }});
    c.push_back({"sse", [](std::uint64_t s) {
                     RngStream r(s);
                     const Tensor y = rng_normal(r, {7});
                     return gradient_error({rng_normal(r, {7})}, [&y](ad::Tape&, const V& v) { return ad::sse(v[0], y); });
                 }});
    c.push_back({"svae_loss", [](std::uint64_t s) { return full_loss_check(ModelKind::svae, s); }});
    c.push_back({"vrnn_loss", [](std::uint64_t s) { return full_loss_check(ModelKind::vrnn, s); }});
    c.push_back({"svrnn_loss", [](std::uint64_t s) { return full_loss_check(ModelKind::svrnn, s); }});
    return c;
}

}  // namespace gradcheck
