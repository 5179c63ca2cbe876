#include "svrnn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace svrnn::ad {

Variable dense(const Variable& x, const Variable& w, const Variable& b, Activation activation) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (wv.rank() != 2 || xv.rank() != 1 || wv.shape()[1] != xv.size() || bv.rank() != 1 ||
        bv.size() != wv.shape()[0]) {
        throw ShapeError("dense shape mismatch: x " + to_string(xv.shape()) + ", w " + to_string(wv.shape()) +
                         ", b " + to_string(bv.shape()));
    }
    const std::size_t m = wv.shape()[0], n = wv.shape()[1];
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = wv.data().data() + i * n;
        double s = bv[i];
        for (std::size_t j = 0; j < n; ++j) s += row[j] * xv[j];
        switch (activation) {
            case Activation::tanh: s = std::tanh(s); break;
            case Activation::relu: s = s > 0.0 ? s : 0.0; break;
            case Activation::none: break;
        }
        out[i] = s;
    }
    return x.tape().record(
        std::move(out), {x.id(), w.id(), b.id()},
        [ix = x.id(), iw = w.id(), ib = b.id(), activation, m, n](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad_of(self);
            const Tensor& y = tp.value(self);
            std::vector<double> gpre(m);
            for (std::size_t i = 0; i < m; ++i) {
                switch (activation) {
                    case Activation::tanh: gpre[i] = g[i] * (1.0 - y[i] * y[i]); break;
                    case Activation::relu: gpre[i] = y[i] > 0.0 ? g[i] : 0.0; break;
                    case Activation::none: gpre[i] = g[i]; break;
                }
            }
            const Tensor& xv = tp.value(ix);
            const Tensor& wv = tp.value(iw);
            if (tp.requires_grad(iw)) {
                auto gw = tp.grad_buffer(iw).data();
                for (std::size_t i = 0; i < m; ++i) {
                    if (gpre[i] == 0.0) continue;
                    double* row = gw.data() + i * n;
                    for (std::size_t j = 0; j < n; ++j) row[j] += gpre[i] * xv[j];
                }
            }
            if (tp.requires_grad(ib)) {
                auto gb = tp.grad_buffer(ib).data();
                for (std::size_t i = 0; i < m; ++i) gb[i] += gpre[i];
            }
            if (tp.requires_grad(ix)) {
                auto gx = tp.grad_buffer(ix).data();
                for (std::size_t i = 0; i < m; ++i) {
                    if (gpre[i] == 0.0) continue;
                    const double* row = wv.data().data() + i * n;
                    for (std::size_t j = 0; j < n; ++j) gx[j] += gpre[i] * row[j];
                }
            }
        });
}

std::size_t conv_output_extent(std::size_t n, const ConvGeometry& g) {
    if (g.stride == 0 || g.kernel == 0) throw ShapeError("conv geometry needs positive kernel and stride");
    const long span = static_cast<long>(n) + 2 * static_cast<long>(g.padding) - static_cast<long>(g.kernel);
    if (span < 0) {
        throw ShapeError("conv output extent not positive for input " + std::to_string(n) + ", kernel " +
                         std::to_string(g.kernel) + ", padding " + std::to_string(g.padding));
    }
    return static_cast<std::size_t>(span) / g.stride + 1;
}

std::size_t conv_transpose_output_extent(std::size_t n, const ConvGeometry& g) {
    if (g.stride == 0 || g.kernel == 0 || n == 0) throw ShapeError("transposed conv needs positive extents");
    if (g.output_padding >= g.stride) throw ShapeError("output_padding must be smaller than stride");
    const long out = (static_cast<long>(n) - 1) * static_cast<long>(g.stride) - 2 * static_cast<long>(g.padding) +
                     static_cast<long>(g.kernel) + static_cast<long>(g.output_padding);
    if (out <= 0) throw ShapeError("transposed conv output extent not positive");
    return static_cast<std::size_t>(out);
}

namespace {

// Index bookkeeping shared by convolution and its adjoint. "Wide" is the
// (C, H, W) side, "narrow" the (F, Ho, Wo) side of a stride-s correlation.
struct ConvPlan {
    std::size_t C, H, W, F, Ho, Wo, k, s, p;

    // Range of output positions o with 0 <= o*s - p + kk < n.
    void range(std::size_t kk, std::size_t n, std::size_t no, std::size_t& lo, std::size_t& hi) const {
        const long off = static_cast<long>(kk) - static_cast<long>(p);
        long first = 0;
        if (off < 0) first = (-off + static_cast<long>(s) - 1) / static_cast<long>(s);
        long last = (static_cast<long>(n) - 1 - off);
        last = last < 0 ? -1 : last / static_cast<long>(s);
        lo = static_cast<std::size_t>(std::min<long>(first, static_cast<long>(no)));
        hi = static_cast<std::size_t>(std::clamp<long>(last + 1, static_cast<long>(lo), static_cast<long>(no)));
    }

    // narrow[f, oy, ox] += K[f, c, ky, kx] * wide[c, oy*s-p+ky, ox*s-p+kx]
    void gather(const double* wide, const double* K, double* narrow) const {
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    std::size_t y0, y1;
                    range(ky, H, Ho, y0, y1);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        std::size_t x0, x1;
                        range(kx, W, Wo, x0, x1);
                        const double w = K[((f * C + c) * k + ky) * k + kx];
                        if (w == 0.0) continue;
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const double* in = wide + (c * H + (oy * s + ky - p)) * W;
                            double* out = narrow + (f * Ho + oy) * Wo;
                            for (std::size_t ox = x0; ox < x1; ++ox) out[ox] += w * in[ox * s + kx - p];
                        }
                    }
                }
    }

    // wide[c, oy*s-p+ky, ox*s-p+kx] += K[f, c, ky, kx] * narrow[f, oy, ox]
    void scatter(const double* narrow, const double* K, double* wide) const {
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    std::size_t y0, y1;
                    range(ky, H, Ho, y0, y1);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        std::size_t x0, x1;
                        range(kx, W, Wo, x0, x1);
                        const double w = K[((f * C + c) * k + ky) * k + kx];
                        if (w == 0.0) continue;
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            double* out = wide + (c * H + (oy * s + ky - p)) * W;
                            const double* in = narrow + (f * Ho + oy) * Wo;
                            for (std::size_t ox = x0; ox < x1; ++ox) out[ox * s + kx - p] += w * in[ox];
                        }
                    }
                }
    }

    // gK[f, c, ky, kx] += sum_{oy,ox} narrow[f, oy, ox] * wide[c, oy*s-p+ky, ox*s-p+kx]
    void kernel_grad(const double* wide, const double* narrow, double* gK) const {
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    std::size_t y0, y1;
                    range(ky, H, Ho, y0, y1);
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        std::size_t x0, x1;
                        range(kx, W, Wo, x0, x1);
                        double acc = 0.0;
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const double* in = wide + (c * H + (oy * s + ky - p)) * W;
                            const double* g = narrow + (f * Ho + oy) * Wo;
                            for (std::size_t ox = x0; ox < x1; ++ox) acc += g[ox] * in[ox * s + kx - p];
                        }
                        gK[((f * C + c) * k + ky) * k + kx] += acc;
                    }
                }
    }
};

void require_kernel(const Tensor& kernels, std::size_t channels, std::size_t channel_axis, const ConvGeometry& g,
                    const Tensor& x) {
    if (kernels.rank() != 4 || kernels.shape()[channel_axis] != channels || kernels.shape()[2] != g.kernel ||
        kernels.shape()[3] != g.kernel) {
        throw ShapeError("kernel shape " + to_string(kernels.shape()) + " incompatible with input " +
                         to_string(x.shape()) + " and kernel size " + std::to_string(g.kernel));
    }
}

}  // namespace

Variable conv2d(const Variable& x, const Variable& kernels, const ConvGeometry& g) {
    const Tensor& xv = x.value();
    const Tensor& kv = kernels.value();
    if (xv.rank() != 3) throw ShapeError("conv2d expects (C,H,W) input, got " + to_string(xv.shape()));
    require_kernel(kv, xv.shape()[0], 1, g, xv);
    ConvPlan plan{xv.shape()[0], xv.shape()[1], xv.shape()[2], kv.shape()[0],
                  conv_output_extent(xv.shape()[1], g), conv_output_extent(xv.shape()[2], g),
                  g.kernel, g.stride, g.padding};
    Tensor out({plan.F, plan.Ho, plan.Wo});
    plan.gather(xv.data().data(), kv.data().data(), out.data().data());
    return x.tape().record(std::move(out), {x.id(), kernels.id()},
                           [ix = x.id(), ik = kernels.id(), plan](Tape& tp, std::size_t self) {
                               const Tensor& gy = tp.grad_of(self);
                               if (tp.requires_grad(ix))
                                   plan.scatter(gy.data().data(), tp.value(ik).data().data(),
                                                tp.grad_buffer(ix).data().data());
                               if (tp.requires_grad(ik))
                                   plan.kernel_grad(tp.value(ix).data().data(), gy.data().data(),
                                                    tp.grad_buffer(ik).data().data());
                           });
}

Variable conv_transpose2d(const Variable& x, const Variable& kernels, const ConvGeometry& g) {
    const Tensor& xv = x.value();
    const Tensor& kv = kernels.value();
    if (xv.rank() != 3) throw ShapeError("conv_transpose2d expects (C,H,W) input, got " + to_string(xv.shape()));
    require_kernel(kv, xv.shape()[0], 0, g, xv);
    // Seen from the output side this is a plain convolution with the same kernel.
    ConvPlan plan{kv.shape()[1],
                  conv_transpose_output_extent(xv.shape()[1], g),
                  conv_transpose_output_extent(xv.shape()[2], g),
                  xv.shape()[0], xv.shape()[1], xv.shape()[2], g.kernel, g.stride, g.padding};
    Tensor out({plan.C, plan.H, plan.W});
    plan.scatter(xv.data().data(), kv.data().data(), out.data().data());
    return x.tape().record(std::move(out), {x.id(), kernels.id()},
                           [ix = x.id(), ik = kernels.id(), plan](Tape& tp, std::size_t self) {
                               const Tensor& gy = tp.grad_of(self);
                               if (tp.requires_grad(ix))
                                   plan.gather(gy.data().data(), tp.value(ik).data().data(),
                                               tp.grad_buffer(ix).data().data());
                               if (tp.requires_grad(ik))
                                   plan.kernel_grad(gy.data().data(), tp.value(ix).data().data(),
                                                    tp.grad_buffer(ik).data().data());
                           });
}

Variable channel_bias(const Variable& x, const Variable& b) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 || b.value().rank() != 1 || b.value().size() != xv.shape()[0]) {
        throw ShapeError("channel_bias shape mismatch: x " + to_string(xv.shape()) + ", b " +
                         to_string(b.value().shape()));
    }
    const std::size_t C = xv.shape()[0], plane = xv.shape()[1] * xv.shape()[2];
    Tensor out = xv;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += b.value()[c];
    return x.tape().record(std::move(out), {x.id(), b.id()},
                           [ix = x.id(), ib = b.id(), C, plane](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               if (tp.requires_grad(ix)) {
                                   auto gx = tp.grad_buffer(ix).data();
                                   for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                               }
                               if (tp.requires_grad(ib)) {
                                   auto gb = tp.grad_buffer(ib).data();
                                   for (std::size_t c = 0; c < C; ++c)
                                       for (std::size_t i = 0; i < plane; ++i) gb[c] += g[c * plane + i];
                               }
                           });
}

Variable center_crop(const Variable& x, std::size_t h, std::size_t w) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 || h > xv.shape()[1] || w > xv.shape()[2]) {
        throw ShapeError("cannot crop " + to_string(xv.shape()) + " to " + std::to_string(h) + "x" +
                         std::to_string(w));
    }
    const std::size_t C = xv.shape()[0], H = xv.shape()[1], W = xv.shape()[2];
    const std::size_t top = (H - h) / 2, left = (W - w) / 2;
    Tensor out({C, h, w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out[(c * h + i) * w + j] = xv[(c * H + top + i) * W + left + j];
    return x.tape().record(std::move(out), {x.id()},
                           [ix = x.id(), C, H, W, h, w, top, left](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               auto gx = tp.grad_buffer(ix).data();
                               for (std::size_t c = 0; c < C; ++c)
                                   for (std::size_t i = 0; i < h; ++i)
                                       for (std::size_t j = 0; j < w; ++j)
                                           gx[(c * H + top + i) * W + left + j] += g[(c * h + i) * w + j];
                           });
}

Variable layer_norm(const Variable& x, const Variable& gain, const Variable& bias, double eps) {
    const Tensor& xv = x.value();
    const std::size_t d = xv.size();
    if (d == 0 || gain.value().shape() != xv.shape() || bias.value().shape() != xv.shape()) {
        throw ShapeError("layer_norm shape mismatch: x " + to_string(xv.shape()) + ", gain " +
                         to_string(gain.value().shape()) + ", bias " + to_string(bias.value().shape()));
    }
    double mu = 0.0;
    for (double v : xv.data()) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double v : xv.data()) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    Tensor xhat(xv.shape());
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < d; ++i) {
        xhat[i] = (xv[i] - mu) * inv_std;
        out[i] = xhat[i] * gain.value()[i] + bias.value()[i];
    }
    return x.tape().record(
        std::move(out), {x.id(), gain.id(), bias.id()},
        [ix = x.id(), ig = gain.id(), ib = bias.id(), xhat = std::move(xhat), inv_std, d](Tape& tp,
                                                                                         std::size_t self) {
            const Tensor& g = tp.grad_of(self);
            if (tp.requires_grad(ig)) {
                auto gg = tp.grad_buffer(ig).data();
                for (std::size_t i = 0; i < d; ++i) gg[i] += g[i] * xhat[i];
            }
            if (tp.requires_grad(ib)) {
                auto gb = tp.grad_buffer(ib).data();
                for (std::size_t i = 0; i < d; ++i) gb[i] += g[i];
            }
            if (tp.requires_grad(ix)) {
                const Tensor& gain_v = tp.value(ig);
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double gh = g[i] * gain_v[i];
                    m1 += gh;
                    m2 += gh * xhat[i];
                }
                m1 /= static_cast<double>(d);
                m2 /= static_cast<double>(d);
                auto gx = tp.grad_buffer(ix).data();
                for (std::size_t i = 0; i < d; ++i) gx[i] += inv_std * (g[i] * gain_v[i] - m1 - xhat[i] * m2);
            }
        });
}

Variable kl_to_standard_normal(const GaussianLatent& q) {
    const Tensor& mu = q.mu.value();
    const Tensor& lv = q.log_var.value();
    if (mu.shape() != lv.shape()) {
        throw ShapeError("latent mu " + to_string(mu.shape()) + " and log_var " + to_string(lv.shape()) +
                         " differ");
    }
    double kl = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) kl += mu[j] * mu[j] + std::exp(lv[j]) - lv[j] - 1.0;
    kl *= 0.5;
    return q.mu.tape().record(Tensor::scalar(kl), {q.mu.id(), q.log_var.id()},
                              [im = q.mu.id(), il = q.log_var.id()](Tape& tp, std::size_t self) {
                                  const double g = tp.grad_of(self)[0];
                                  if (tp.requires_grad(im)) {
                                      const Tensor& mu = tp.value(im);
                                      auto gm = tp.grad_buffer(im).data();
                                      for (std::size_t j = 0; j < gm.size(); ++j) gm[j] += g * mu[j];
                                  }
                                  if (tp.requires_grad(il)) {
                                      const Tensor& lv = tp.value(il);
                                      auto gl = tp.grad_buffer(il).data();
                                      for (std::size_t j = 0; j < gl.size(); ++j)
                                          gl[j] += 0.5 * g * (std::exp(lv[j]) - 1.0);
                                  }
                              });
}

Variable reparameterize(const GaussianLatent& q, const Tensor& eps) {
    const Tensor& mu = q.mu.value();
    const Tensor& lv = q.log_var.value();
    if (mu.shape() != lv.shape() || eps.size() != mu.size()) {
        throw ShapeError("reparameterize shape mismatch: mu " + to_string(mu.shape()) + ", log_var " +
                         to_string(lv.shape()) + ", eps " + to_string(eps.shape()));
    }
    Tensor sigma(mu.shape());
    Tensor z(mu.shape());
    for (std::size_t j = 0; j < mu.size(); ++j) {
        sigma[j] = std::exp(0.5 * lv[j]);
        z[j] = mu[j] + sigma[j] * eps[j];
    }
    return q.mu.tape().record(std::move(z), {q.mu.id(), q.log_var.id()},
                              [im = q.mu.id(), il = q.log_var.id(), sigma = std::move(sigma), eps](
                                  Tape& tp, std::size_t self) {
                                  const Tensor& g = tp.grad_of(self);
                                  if (tp.requires_grad(im)) {
                                      auto gm = tp.grad_buffer(im).data();
                                      for (std::size_t j = 0; j < gm.size(); ++j) gm[j] += g[j];
                                  }
                                  if (tp.requires_grad(il)) {
                                      auto gl = tp.grad_buffer(il).data();
                                      for (std::size_t j = 0; j < gl.size(); ++j)
                                          gl[j] += 0.5 * g[j] * sigma[j] * eps[j];
                                  }
                              });
}

namespace {

Variable squared_error(const Variable& x, const Tensor& y, bool average, const char* what) {
    const Tensor& xv = x.value();
    if (xv.size() != y.size() || xv.size() == 0) {
        throw ShapeError(std::string(what) + " shape mismatch: " + to_string(xv.shape()) + " vs " + to_string(y.shape()));
    }
    const double n = average ? static_cast<double>(xv.size()) : 1.0;
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = xv[i] - y[i];
        s += d * d;
    }
    return x.tape().record(Tensor::scalar(s / n), {x.id()}, [ix = x.id(), y, n](Tape& tp, std::size_t self) {
        const double g = tp.grad_of(self)[0] * 2.0 / n;
        const Tensor& xv = tp.value(ix);
        auto gx = tp.grad_buffer(ix).data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (xv[i] - y[i]);
    });
}

}  // namespace

Variable mse(const Variable& x, const Tensor& y) { return squared_error(x, y, true, "mse"); }

Variable sse(const Variable& x, const Tensor& y) { return squared_error(x, y, false, "sse"); }

}  // namespace svrnn::ad
