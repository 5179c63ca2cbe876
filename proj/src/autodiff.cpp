#include "svrnn/autodiff.hpp"

#include <cmath>

namespace svrnn::ad {

const Tensor& Variable::value() const { return tape_->value(id_); }

Tensor Variable::grad() const {
    if (const Tensor* g = tape_->grad_if(id_)) return *g;
    return Tensor(value().shape());
}

Variable Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Variable(this, nodes_.size() - 1);
}

Variable Tape::leaf(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Variable(this, nodes_.size() - 1);
}

Variable Tape::parameter(const Tensor& external) {
    Node n;
    n.external = &external;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Variable(this, nodes_.size() - 1);
}

Variable Tape::record(Tensor value, std::vector<std::size_t> parents, Backward fn) {
    Node n;
    n.value = std::move(value);
    for (std::size_t p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    n.parents = std::move(parents);
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Variable(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(value(id).shape());
        n.has_grad = true;
    }
    return n.grad;
}

const Tensor& Tape::grad_of(std::size_t id) { return grad_buffer(id); }

const Tensor* Tape::grad_if(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.has_grad ? &n.grad : nullptr;
}

void Tape::backward(const Variable& loss) {
    if (backward_done_) throw TapeStateError("backward already called on this tape; reset() before reuse");
    if (loss.tape_ != this) throw std::invalid_argument("loss belongs to a different tape");
    if (value(loss.id()).size() != 1) {
        throw ShapeError("backward needs a scalar loss, got shape " + to_string(value(loss.id()).shape()));
    }
    backward_done_ = true;
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.backward) continue;
        n.backward(*this, i);
    }
}

void Tape::reset() {
    nodes_.clear();
    backward_done_ = false;
}

namespace {

void require_same(const Variable& a, const Variable& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + " shape mismatch: " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

void accumulate(Tensor& dst, const Tensor& src, double s = 1.0) {
    auto d = dst.data();
    auto v = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * v[i];
}

}  // namespace

Variable add(const Variable& a, const Variable& b) {
    require_same(a, b, "add");
    Tape& t = a.tape();
    return t.record(a.value() + b.value(), {a.id(), b.id()}, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad_of(self);
        if (tp.requires_grad(ia)) accumulate(tp.grad_buffer(ia), g);
        if (tp.requires_grad(ib)) accumulate(tp.grad_buffer(ib), g);
    });
}

Variable sub(const Variable& a, const Variable& b) {
    require_same(a, b, "sub");
    Tape& t = a.tape();
    return t.record(a.value() - b.value(), {a.id(), b.id()}, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad_of(self);
        if (tp.requires_grad(ia)) accumulate(tp.grad_buffer(ia), g);
        if (tp.requires_grad(ib)) accumulate(tp.grad_buffer(ib), g, -1.0);
    });
}

Variable mul(const Variable& a, const Variable& b) {
    require_same(a, b, "mul");
    Tape& t = a.tape();
    return t.record(elementwise(ElementwiseKind::mul, a.value(), b.value()), {a.id(), b.id()},
                    [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
                        const Tensor& g = tp.grad_of(self);
                        if (tp.requires_grad(ia))
                            accumulate(tp.grad_buffer(ia), elementwise(ElementwiseKind::mul, g, tp.value(ib)));
                        if (tp.requires_grad(ib))
                            accumulate(tp.grad_buffer(ib), elementwise(ElementwiseKind::mul, g, tp.value(ia)));
                    });
}

Variable scale(const Variable& a, double s) {
    return a.tape().record(s * a.value(), {a.id()}, [ia = a.id(), s](Tape& tp, std::size_t self) {
        accumulate(tp.grad_buffer(ia), tp.grad_of(self), s);
    });
}

Variable tanh(const Variable& a) {
    return a.tape().record(elementwise(ElementwiseKind::tanh, a.value()), {a.id()},
                           [ia = a.id()](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               const Tensor& y = tp.value(self);
                               auto d = tp.grad_buffer(ia).data();
                               for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
                           });
}

Variable relu(const Variable& a) {
    return a.tape().record(elementwise(ElementwiseKind::relu, a.value()), {a.id()},
                           [ia = a.id()](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               const Tensor& x = tp.value(ia);
                               auto d = tp.grad_buffer(ia).data();
                               for (std::size_t i = 0; i < d.size(); ++i)
                                   if (x[i] > 0.0) d[i] += g[i];
                           });
}

Variable exp(const Variable& a) {
    return a.tape().record(elementwise(ElementwiseKind::exp, a.value()), {a.id()},
                           [ia = a.id()](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               const Tensor& y = tp.value(self);
                               auto d = tp.grad_buffer(ia).data();
                               for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
                           });
}

Variable sum(const Variable& a) {
    return a.tape().record(reduce(ReduceKind::sum, a.value()), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        const double g = tp.grad_of(self)[0];
        for (double& d : tp.grad_buffer(ia).data()) d += g;
    });
}

Variable mean(const Variable& a) {
    const double n = static_cast<double>(a.value().size());
    return a.tape().record(reduce(ReduceKind::mean, a.value()), {a.id()},
                           [ia = a.id(), n](Tape& tp, std::size_t self) {
                               const double g = tp.grad_of(self)[0] / n;
                               for (double& d : tp.grad_buffer(ia).data()) d += g;
                           });
}

Variable matmul(const Variable& a, const Variable& b) {
    return a.tape().record(svrnn::matmul(a.value(), b.value()), {a.id(), b.id()},
                           [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               if (tp.requires_grad(ia))
                                   accumulate(tp.grad_buffer(ia), svrnn::matmul(g, transpose(tp.value(ib))));
                               if (tp.requires_grad(ib))
                                   accumulate(tp.grad_buffer(ib), svrnn::matmul(transpose(tp.value(ia)), g));
                           });
}

Variable reshape(const Variable& a, Shape shape) {
    return a.tape().record(a.value().reshaped(std::move(shape)), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        accumulate(tp.grad_buffer(ia), tp.grad_of(self));
    });
}

Variable concat(const std::vector<Variable>& parts) {
    if (parts.empty()) throw ShapeError("concat of zero parts");
    std::vector<double> data;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(data.size());
        ids.push_back(p.id());
        data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    }
    Tape& t = parts.front().tape();
    return t.record(Tensor::vector(std::move(data)), ids, [ids, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad_of(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!tp.requires_grad(ids[k])) continue;
            auto d = tp.grad_buffer(ids[k]).data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[offsets[k] + i];
        }
    });
}

Variable slice(const Variable& a, std::size_t offset, std::size_t length) {
    const Tensor& v = a.value();
    if (offset + length > v.size()) {
        throw ShapeError("slice [" + std::to_string(offset) + "," + std::to_string(offset + length) +
                         ") out of range for " + to_string(v.shape()));
    }
    std::vector<double> data(v.data().begin() + static_cast<std::ptrdiff_t>(offset),
                             v.data().begin() + static_cast<std::ptrdiff_t>(offset + length));
    return a.tape().record(Tensor::vector(std::move(data)), {a.id()},
                           [ia = a.id(), offset](Tape& tp, std::size_t self) {
                               const Tensor& g = tp.grad_of(self);
                               auto d = tp.grad_buffer(ia).data();
                               for (std::size_t i = 0; i < g.size(); ++i) d[offset + i] += g[i];
                           });
}

}  // namespace svrnn::ad
