#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library except to build tapes for gradient checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "svrnn/autodiff.hpp"
#include "svrnn/tensor.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const svrnn::Tensor& t) {
    const std::size_t r = t.shape()[0], c = t.shape()[1];
    Matrix m(r, std::vector<double>(c));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m[i][j] = t.at(i, j);
    return m;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j)
            for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // vectors[i] pairs with values[i]
};

/// Cyclic Jacobi rotations on a symmetric matrix.
inline SymmetricEigen jacobi(Matrix a) {
    const std::size_t n = a.size();
    Matrix v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
    SymmetricEigen out;
    for (std::size_t i : order) {
        out.values.push_back(a[i][i]);
        std::vector<double> col(n);
        for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
        out.vectors.push_back(col);
    }
    return out;
}

/// Real parts of the eigenvalues by unshifted QR iteration (Gram-Schmidt QR).
/// Converged 2x2 diagonal blocks contribute their trace / 2 twice.
inline std::vector<double> qr_eigen_real_parts(Matrix a, int iterations = 20000) {
    const std::size_t n = a.size();
    for (int it = 0; it < iterations; ++it) {
        Matrix q(n, std::vector<double>(n, 0.0)), r(n, std::vector<double>(n, 0.0));
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = a[i][j];
            for (std::size_t k = 0; k < j; ++k) {
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) d += q[i][k] * a[i][j];
                r[k][j] = d;
                for (std::size_t i = 0; i < n; ++i) v[i] -= d * q[i][k];
            }
            double nv = 0.0;
            for (double x : v) nv += x * x;
            nv = std::sqrt(nv);
            r[j][j] = nv;
            for (std::size_t i = 0; i < n; ++i) q[i][j] = v[i] / nv;
        }
        a = multiply(r, q);
    }
    std::vector<double> re;
    for (std::size_t i = 0; i < n;) {
        if (i + 1 < n && std::abs(a[i + 1][i]) > 1e-8) {
            const double m = 0.5 * (a[i][i] + a[i + 1][i + 1]);
            re.push_back(m);
            re.push_back(m);
            i += 2;
        } else {
            re.push_back(a[i][i]);
            i += 1;
        }
    }
    return re;
}

/// exp(A) by scaling and squaring with a truncated Taylor series.
inline Matrix expm(const Matrix& a) {
    const std::size_t n = a.size();
    double norm = 0.0;
    for (const auto& row : a) {
        double s = 0.0;
        for (double x : row) s += std::abs(x);
        norm = std::max(norm, s);
    }
    int squarings = 0;
    while (norm > 0.05) {
        norm /= 2.0;
        ++squarings;
    }
    Matrix scaled = a;
    for (auto& row : scaled)
        for (double& x : row) x = std::ldexp(x, -squarings);
    Matrix result(n, std::vector<double>(n, 0.0)), term(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) result[i][i] = term[i][i] = 1.0;
    for (int k = 1; k <= 30; ++k) {
        term = multiply(term, scaled);
        for (auto& row : term)
            for (double& x : row) x /= k;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) result[i][j] += term[i][j];
    }
    for (int s = 0; s < squarings; ++s) result = multiply(result, result);
    return result;
}

/// Direct six-loop cross-correlation. x: (C,H,W), k: (F,C,kk,kk).
inline svrnn::Tensor naive_conv2d(const svrnn::Tensor& x, const svrnn::Tensor& k, std::size_t stride,
                                  std::size_t pad) {
    const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    const std::size_t F = k.shape()[0], kk = k.shape()[2];
    const std::size_t Ho = (H + 2 * pad - kk) / stride + 1, Wo = (W + 2 * pad - kk) / stride + 1;
    svrnn::Tensor out({F, Ho, Wo});
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                double s = 0.0;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < kk; ++ky)
                        for (std::size_t kx = 0; kx < kk; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                            s += k[((f * C + c) * kk + ky) * kk + kx] * x[(c * H + iy) * W + ix];
                        }
                out[(f * Ho + oy) * Wo + ox] = s;
            }
    return out;
}

/// Direct transposed convolution. x: (Cin,H,W), k: (Cin,Cout,kk,kk).
inline svrnn::Tensor naive_conv_transpose2d(const svrnn::Tensor& x, const svrnn::Tensor& k, std::size_t stride,
                                            std::size_t pad, std::size_t out_pad) {
    const std::size_t Ci = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    const std::size_t Co = k.shape()[1], kk = k.shape()[2];
    const std::size_t Ho = (H - 1) * stride - 2 * pad + kk + out_pad, Wo = (W - 1) * stride - 2 * pad + kk + out_pad;
    svrnn::Tensor out({Co, Ho, Wo});
    for (std::size_t ci = 0; ci < Ci; ++ci)
        for (std::size_t iy = 0; iy < H; ++iy)
            for (std::size_t ix = 0; ix < W; ++ix)
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t ky = 0; ky < kk; ++ky)
                        for (std::size_t kx = 0; kx < kk; ++kx) {
                            const long oy = static_cast<long>(iy * stride + ky) - static_cast<long>(pad);
                            const long ox = static_cast<long>(ix * stride + kx) - static_cast<long>(pad);
                            if (oy < 0 || ox < 0 || oy >= static_cast<long>(Ho) || ox >= static_cast<long>(Wo)) continue;
                            out[(co * Ho + oy) * Wo + ox] +=
                                x[(ci * H + iy) * W + ix] * k[((ci * Co + co) * kk + ky) * kk + kx];
                        }
    return out;
}

using LossBuilder = std::function<svrnn::ad::Variable(svrnn::ad::Tape&, const std::vector<svrnn::ad::Variable>&)>;

/// Normwise relative error ||analytic - fd||_inf / max(||fd||_inf, 1e-12) between the tape gradient
/// and central differences, over every entry of every input.
inline double gradient_error(const std::vector<svrnn::Tensor>& inputs, const LossBuilder& f, double h = 1e-5) {
    std::vector<double> analytic, numeric;
    {
        svrnn::ad::Tape tape;
        std::vector<svrnn::ad::Variable> leaves;
        for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
        const auto loss = f(tape, leaves);
        tape.backward(loss);
        for (const auto& l : leaves) {
            const svrnn::Tensor g = l.grad();
            analytic.insert(analytic.end(), g.data().begin(), g.data().end());
        }
    }
    auto eval = [&](const std::vector<svrnn::Tensor>& xs) {
        svrnn::ad::Tape tape;
        std::vector<svrnn::ad::Variable> leaves;
        for (const auto& t : xs) leaves.push_back(tape.leaf(t));
        return f(tape, leaves).value().item();
    };
    std::vector<svrnn::Tensor> work = inputs;
    for (std::size_t i = 0; i < work.size(); ++i) {
        for (std::size_t j = 0; j < work[i].size(); ++j) {
            const double keep = work[i][j];
            work[i][j] = keep + h;
            const double up = eval(work);
            work[i][j] = keep - h;
            const double down = eval(work);
            work[i][j] = keep;
            numeric.push_back((up - down) / (2.0 * h));
        }
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max(scale, std::abs(numeric[i]));
    }
    return diff / std::max(scale, 1e-12);
}

/// Sylvester Hadamard matrix of order 2^p with +-1 entries.
inline Matrix hadamard(std::size_t order) {
    Matrix h{{1.0}};
    while (h.size() < order) {
        const std::size_t n = h.size();
        Matrix g(2 * n, std::vector<double>(2 * n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                g[i][j] = g[i][j + n] = g[i + n][j] = h[i][j];
                g[i + n][j + n] = -h[i][j];
            }
        h = g;
    }
    return h;
}

/// Scalar Adam written from the textbook formulas.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    int t = 0;
    double step(double x, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return x - lr * mh / (std::sqrt(vh) + eps);
    }
};

}  // namespace oracle
