#pragma once

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "paint/common.hpp"

namespace paint {

using Shape = std::vector<int>;

int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major f64 tensor. `grad` is filled by Tape::backward for
/// requires_grad leaves and consumed by the optimizer.
struct TensorData {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // empty or same length as values
};

/// Shared handle to TensorData. Copies alias the same storage; tensors are
/// treated as immutable once recorded on a tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const { return impl_->shape; }
    int64_t size() const { return static_cast<int64_t>(impl_->values.size()); }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    std::span<const double> data() const { return impl_->values; }
    std::vector<double>& mutable_data() { return impl_->values; }

    double item() const;  // scalar tensors only

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        impl_->requires_grad = on;
        return *this;
    }

    /// Accumulated gradient; allocated (zeroed) on first access.
    std::vector<double>& grad();
    bool has_grad() const { return !impl_->grad.empty(); }
    void zero_grad();

    TensorData* impl() const { return impl_.get(); }

private:
    std::shared_ptr<TensorData> impl_;
    explicit Tensor(std::shared_ptr<TensorData> impl) : impl_(std::move(impl)) {}
    friend class Tape;
};

/// Reverse-mode autodiff tape. Forward ops record a node when any input
/// requires grad; backward() walks nodes in reverse and accumulates leaf
/// gradients. Each training sample uses its own tape, so parallel batch
/// evaluation needs no locking; parameter tensors are shared read-only.
///
/// Every forward op validates shapes (error names the op and both shapes)
/// and checks outputs for non-finite values.
class Tape {
public:
    Tape() = default;
    /// grad_enabled=false skips node recording entirely (inference passes).
    explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}

    // -- elementwise (same-shape, or b a suffix of a: NumPy-style trailing broadcast)
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);

    /// a: (..., M, K) row-major, b: (K, N). Leading dims of a are flattened.
    Tensor matmul(const Tensor& a, const Tensor& b);

    Tensor reshape(const Tensor& a, Shape shape);
    /// Swap the first two axes of a rank-3 tensor.
    Tensor transpose01(const Tensor& a);

    /// Softmax over the last axis.
    Tensor softmax(const Tensor& a);
    /// Layer normalization over the last axis with affine (gamma, beta).
    /// Inputs with variance below eps_var normalize to zero (constant rows
    /// are well-defined: output is beta).
    Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                     double eps_var = 1e-12);
    Tensor gelu(const Tensor& a);

    /// Multi-head scaled dot-product attention. q, k, v: (B, S, D); D % heads == 0.
    Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

    /// (T, C, H, W) -> (T*(H/p)*(W/p), C*p*p) patch tokens, frame-major then
    /// patch-row-major; features ordered (c, py, px).
    Tensor patchify(const Tensor& x, int p);
    /// Inverse layout of patchify: (T*(H/p)*(W/p), C*p*p) -> (T, C, H, W).
    Tensor unpatchify(const Tensor& tokens, int T, int C, int H, int W, int p);

    /// Concatenate along axis 1 of rank-4 tensors: (T,Ca,H,W)+(T,Cb,H,W).
    Tensor concat_channels(const Tensor& a, const Tensor& b);

    Tensor sum(const Tensor& a);
    Tensor mean(const Tensor& a);

    /// Reverse pass from a scalar loss. Leaf gradients are accumulated into
    /// each leaf's `grad` buffer in leaf-first-use order; the tape is cleared.
    void backward(const Tensor& loss);

    /// As backward(), but gradients stay tape-local (read via grad_of). Used
    /// by the batch-parallel training loop, which reduces per-sample
    /// gradients in fixed element order.
    void backward_local(const Tensor& loss);
    std::span<const double> grad_of(const Tensor& leaf) const;

    void clear();
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::function<void(Tape&)> back;
    };
    bool grad_enabled_ = true;
    std::vector<Node> nodes_;
    std::unordered_map<const TensorData*, std::vector<double>> grads_;
    std::unordered_set<const TensorData*> produced_;
    std::vector<Tensor> leaves_;  // requires_grad inputs in first-use order

    void note_inputs(std::initializer_list<const Tensor*> ts);
    Tensor finish(Tensor out, bool needs_grad, std::function<void(Tape&)> back);
    std::vector<double>* grad_buffer(const TensorData* t);
    std::vector<double>& grad_accum(const Tensor& t);
    void run_backward(const Tensor& loss);
};

}  // namespace paint
