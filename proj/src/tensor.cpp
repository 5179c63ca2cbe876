#include "svrnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace svrnn {

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
    }
}

Tensor Tensor::vector(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
        if (r.size() != n) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({m, n}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
    }
    return shape_[axis];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul shape mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    auto o = out.data();
    auto av = a.data();
    auto bv = b.data();
    // i-k-j order keeps the inner loop contiguous; accumulation order is fixed.
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = o.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + " shape mismatch: " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

template <class F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape());
    auto o = out.data();
    auto in = a.data();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
    return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
    Tensor out(a.shape());
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(x[i], y[i]);
    return out;
}

}  // namespace

Tensor elementwise(ElementwiseKind kind, const Tensor& a) {
    switch (kind) {
        case ElementwiseKind::tanh:
            return map(a, [](double v) { return std::tanh(v); });
        case ElementwiseKind::relu:
            return map(a, [](double v) { return v > 0.0 ? v : 0.0; });
        case ElementwiseKind::exp: {
            Tensor out = map(a, [](double v) { return std::exp(v); });
            if (!out.all_finite()) throw DomainError("exp overflow");
            return out;
        }
        case ElementwiseKind::log:
            for (double v : a.data()) {
                if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
            }
            return map(a, [](double v) { return std::log(v); });
        default:
            throw std::invalid_argument("elementwise: binary kind called with one operand");
    }
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
    switch (kind) {
        case ElementwiseKind::add:
            require_same_shape(a, b, "add");
            return zip(a, b, std::plus<>());
        case ElementwiseKind::sub:
            require_same_shape(a, b, "sub");
            return zip(a, b, std::minus<>());
        case ElementwiseKind::mul:
            require_same_shape(a, b, "mul");
            return zip(a, b, std::multiplies<>());
        case ElementwiseKind::scale:
            if (b.size() != 1) throw ShapeError("scale expects a scalar, got " + to_string(b.shape()));
            return elementwise(kind, a, b[0]);
        default:
            return elementwise(kind, a);
    }
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, double s) {
    switch (kind) {
        case ElementwiseKind::add:
            return map(a, [s](double v) { return v + s; });
        case ElementwiseKind::sub:
            return map(a, [s](double v) { return v - s; });
        case ElementwiseKind::mul:
        case ElementwiseKind::scale:
            return map(a, [s](double v) { return v * s; });
        default:
            return elementwise(kind, a);
    }
}

Tensor reduce(ReduceKind kind, const Tensor& a, const std::vector<std::size_t>& axes) {
    const std::size_t r = a.rank();
    std::vector<bool> reduced(r, axes.empty());
    for (std::size_t ax : axes) {
        if (ax >= r) throw ShapeError("reduce axis " + std::to_string(ax) + " invalid for " + to_string(a.shape()));
        reduced[ax] = true;
    }
    Shape out_shape;
    std::size_t count = 1;
    for (std::size_t d = 0; d < r; ++d) {
        if (reduced[d]) {
            count *= a.shape()[d];
        } else {
            out_shape.push_back(a.shape()[d]);
        }
    }
    if (count == 0 || a.size() == 0) throw ShapeError("reduction over empty axis in " + to_string(a.shape()));

    const double init = kind == ReduceKind::max ? -std::numeric_limits<double>::infinity() : 0.0;
    Tensor out(out_shape, init);

    // Row-major strides of the input, and of the output in input-axis order.
    std::vector<std::size_t> out_stride(r, 0);
    std::size_t stride = 1;
    for (std::size_t d = r; d-- > 0;) {
        if (!reduced[d]) {
            out_stride[d] = stride;
            stride *= a.shape()[d];
        }
    }
    std::vector<std::size_t> idx(r, 0);
    auto in = a.data();
    auto o = out.data();
    for (std::size_t flat = 0; flat < in.size(); ++flat) {
        std::size_t oi = 0;
        for (std::size_t d = 0; d < r; ++d) oi += idx[d] * out_stride[d];
        if (kind == ReduceKind::max) {
            o[oi] = std::max(o[oi], in[flat]);
        } else {
            o[oi] += in[flat];
        }
        for (std::size_t d = r; d-- > 0;) {
            if (++idx[d] < a.shape()[d]) break;
            idx[d] = 0;
        }
    }
    if (kind == ReduceKind::mean) {
        for (double& v : o) v /= static_cast<double>(count);
    }
    return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseKind::add, a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseKind::sub, a, b); }
Tensor operator*(double s, const Tensor& a) { return elementwise(ElementwiseKind::scale, a, s); }

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) throw ShapeError("transpose expects a matrix, got " + to_string(m.shape()));
    const std::size_t r = m.shape()[0], c = m.shape()[1];
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot size mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double frobenius_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace svrnn
