#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "svrnn/tensor.hpp"

namespace svrnn::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Variable {
public:
    Variable() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    /// Accumulated gradient, or zeros of the value's shape if none reached it.
    Tensor grad() const;
    std::size_t id() const { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Variable(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Raised when backward() is called a second time on the same recording.
class TapeStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward() walks it once in reverse. A tape is
/// single-threaded; separate tapes are independent.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Value that never receives a gradient.
    Variable constant(Tensor value);
    /// Owned value that receives a gradient.
    Variable leaf(Tensor value);
    /// Borrowed value that receives a gradient. `external` must outlive the tape.
    Variable parameter(const Tensor& external);

    /// Appends a derived node. `fn` is skipped when no parent needs a gradient.
    Variable record(Tensor value, std::vector<std::size_t> parents, Backward fn);

    void backward(const Variable& loss);
    void reset();

    const Tensor& value(std::size_t id) const;
    /// Gradient flowing into node `id` during backward (zeros if none yet).
    const Tensor& grad_of(std::size_t id);
    /// Materialized gradient accumulator for node `id`.
    Tensor& grad_buffer(std::size_t id);
    const Tensor* grad_if(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    std::size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        std::vector<std::size_t> parents;
        Backward backward;
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Elementary operations. Binary operations require equal shapes.
Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable scale(const Variable& a, double s);
Variable tanh(const Variable& a);
Variable relu(const Variable& a);
Variable exp(const Variable& a);
Variable sum(const Variable& a);
Variable mean(const Variable& a);
Variable matmul(const Variable& a, const Variable& b);

Variable reshape(const Variable& a, Shape shape);
Variable concat(const std::vector<Variable>& parts);
/// Flat slice [offset, offset+length) of a tensor, returned as a vector.
Variable slice(const Variable& a, std::size_t offset, std::size_t length);

}  // namespace svrnn::ad
