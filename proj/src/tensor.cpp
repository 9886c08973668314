#include "paint/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace paint {

int64_t shape_size(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

static void check_shape_valid(const Shape& shape, const char* op) {
    if (shape.empty())
        throw std::invalid_argument(std::string(op) + ": empty shape");
    for (int d : shape)
        if (d <= 0)
            throw std::invalid_argument(std::string(op) + ": non-positive dim in " + shape_str(shape));
}

static void check_finite(const Tensor& t, const char* op) {
    for (double x : t.data())
        if (!std::isfinite(x)) [[unlikely]]
            throw numeric_error(std::string("op '") + op + "' produced non-finite output");
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_shape_valid(shape, "zeros");
    auto impl = std::make_shared<TensorData>();
    impl->values.assign(static_cast<size_t>(shape_size(shape)), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.impl_->values.begin(), t.impl_->values.end(), value);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape_valid(shape, "from");
    if (static_cast<int64_t>(values.size()) != shape_size(shape))
        throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                    " values for shape " + shape_str(shape));
    auto impl = std::make_shared<TensorData>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& x : t.impl_->values) x = rng.normal() * stddev;
    return t;
}

double Tensor::item() const {
    if (size() != 1)
        throw std::invalid_argument("Tensor::item: tensor has shape " + shape_str(shape()));
    return impl_->values[0];
}

std::vector<double>& Tensor::grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape machinery
// ---------------------------------------------------------------------------

void Tape::note_inputs(std::initializer_list<const Tensor*> ts) {
    if (!grad_enabled_) return;
    for (const Tensor* t : ts) {
        if (!t->requires_grad()) continue;
        if (produced_.count(t->impl())) continue;  // tape-internal, not a leaf
        bool known = false;
        for (const Tensor& l : leaves_)
            if (l.impl() == t->impl()) {
                known = true;
                break;
            }
        if (!known) leaves_.push_back(*t);
    }
}

Tensor Tape::finish(Tensor out, bool needs_grad, std::function<void(Tape&)> back) {
    if (!grad_enabled_) needs_grad = false;
    out.set_requires_grad(needs_grad);
    if (needs_grad) {
        produced_.insert(out.impl());
        nodes_.push_back(Node{std::move(back)});
    }
    return out;
}

std::vector<double>* Tape::grad_buffer(const TensorData* t) {
    auto it = grads_.find(t);
    return it == grads_.end() ? nullptr : &it->second;
}

std::vector<double>& Tape::grad_accum(const Tensor& t) {
    auto& buf = grads_[t.impl()];
    if (buf.empty()) buf.assign(t.data().size(), 0.0);
    return buf;
}

void Tape::run_backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    if (nodes_.empty())
        throw std::invalid_argument("backward: tape is empty");
    grad_accum(loss)[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back(*this);
}

void Tape::backward(const Tensor& loss) {
    run_backward(loss);
    for (Tensor& leaf : leaves_) {
        auto* g = grad_buffer(leaf.impl());
        if (!g) continue;
        auto& dst = leaf.grad();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += (*g)[i];
    }
    clear();
}

void Tape::backward_local(const Tensor& loss) {
    run_backward(loss);
    nodes_.clear();
    produced_.clear();
}

std::span<const double> Tape::grad_of(const Tensor& leaf) const {
    auto it = grads_.find(leaf.impl());
    if (it == grads_.end()) return {};
    return it->second;
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
    produced_.clear();
    leaves_.clear();
}

// ---------------------------------------------------------------------------
// Elementwise ops with trailing broadcast
// ---------------------------------------------------------------------------

namespace {

// b broadcasts over a when b.shape is a trailing suffix of a.shape, or b is
// scalar. Returns the outer repeat count, or -1 if incompatible.
int64_t suffix_repeat(const Shape& a, const Shape& b) {
    if (shape_size(b) == 1) return shape_size(a);
    if (b.size() > a.size()) return -1;
    size_t off = a.size() - b.size();
    for (size_t i = 0; i < b.size(); ++i)
        if (a[off + i] != b[i]) return -1;
    int64_t rep = 1;
    for (size_t i = 0; i < off; ++i) rep *= a[i];
    return rep;
}

void binary_shapes(const char* op, const Tensor& a, const Tensor& b, int64_t& rep, int64_t& inner) {
    rep = suffix_repeat(a.shape(), b.shape());
    if (rep < 0)
        throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()) +
                                    " do not broadcast (same shape or trailing suffix required)");
    inner = b.size() == 1 ? 1 : b.size();
}

}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    int64_t rep, inner;
    binary_shapes("add", a, b, rep, inner);
    note_inputs({&a, &b});
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.mutable_data().data();
    if (inner == 1) {
        const double c = pb[0];
        for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + c;
    } else {
        for (int64_t r = 0; r < rep; ++r)
            for (int64_t i = 0; i < inner; ++i) po[r * inner + i] = pa[r * inner + i] + pb[i];
    }
    check_finite(out, "add");
    bool ng = a.requires_grad() || b.requires_grad();
    return finish(out, ng, [a, b, out, rep, inner](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        if (a.requires_grad()) {
            auto& ga = t.grad_accum(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i];
        }
        if (b.requires_grad()) {
            auto& gb = t.grad_accum(b);
            if (inner == 1) {
                double s = 0;
                for (double g : *go) s += g;
                gb[0] += s;
            } else {
                for (int64_t r = 0; r < rep; ++r)
                    for (int64_t i = 0; i < inner; ++i) gb[i] += (*go)[r * inner + i];
            }
        }
    });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    int64_t rep, inner;
    binary_shapes("sub", a, b, rep, inner);
    note_inputs({&a, &b});
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.mutable_data().data();
    if (inner == 1) {
        const double c = pb[0];
        for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] - c;
    } else {
        for (int64_t r = 0; r < rep; ++r)
            for (int64_t i = 0; i < inner; ++i) po[r * inner + i] = pa[r * inner + i] - pb[i];
    }
    check_finite(out, "sub");
    bool ng = a.requires_grad() || b.requires_grad();
    return finish(out, ng, [a, b, out, rep, inner](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        if (a.requires_grad()) {
            auto& ga = t.grad_accum(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i];
        }
        if (b.requires_grad()) {
            auto& gb = t.grad_accum(b);
            if (inner == 1) {
                double s = 0;
                for (double g : *go) s += g;
                gb[0] -= s;
            } else {
                for (int64_t r = 0; r < rep; ++r)
                    for (int64_t i = 0; i < inner; ++i) gb[i] -= (*go)[r * inner + i];
            }
        }
    });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    int64_t rep, inner;
    binary_shapes("mul", a, b, rep, inner);
    note_inputs({&a, &b});
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.mutable_data().data();
    if (inner == 1) {
        const double c = pb[0];
        for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * c;
    } else {
        for (int64_t r = 0; r < rep; ++r)
            for (int64_t i = 0; i < inner; ++i) po[r * inner + i] = pa[r * inner + i] * pb[i];
    }
    check_finite(out, "mul");
    bool ng = a.requires_grad() || b.requires_grad();
    return finish(out, ng, [a, b, out, rep, inner](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        if (a.requires_grad()) {
            auto& ga = t.grad_accum(a);
            if (inner == 1) {
                const double c = pb[0];
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i] * c;
            } else {
                for (int64_t r = 0; r < rep; ++r)
                    for (int64_t i = 0; i < inner; ++i)
                        ga[r * inner + i] += (*go)[r * inner + i] * pb[i];
            }
        }
        if (b.requires_grad()) {
            auto& gb = t.grad_accum(b);
            if (inner == 1) {
                double s = 0;
                for (size_t i = 0; i < go->size(); ++i) s += (*go)[i] * pa[i];
                gb[0] += s;
            } else {
                for (int64_t r = 0; r < rep; ++r)
                    for (int64_t i = 0; i < inner; ++i)
                        gb[i] += (*go)[r * inner + i] * pa[r * inner + i];
            }
        }
    });
}

Tensor Tape::scale(const Tensor& a, double c) {
    note_inputs({&a});
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    double* po = out.mutable_data().data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * c;
    check_finite(out, "scale");
    return finish(out, a.requires_grad(), [a, out, c](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i] * c;
    });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace {

// C(R,N) = A(R,K) * B(K,N); ikj order autovectorizes well at our sizes.
void gemm(const double* __restrict a, const double* __restrict b, double* __restrict c,
          int64_t R, int64_t K, int64_t N) {
    for (int64_t r = 0; r < R; ++r) {
        double* cr = c + r * N;
        std::fill(cr, cr + N, 0.0);
        const double* ar = a + r * K;
        for (int64_t k = 0; k < K; ++k) {
            const double av = ar[k];
            const double* bk = b + k * N;
            for (int64_t n = 0; n < N; ++n) cr[n] += av * bk[n];
        }
    }
}

// C(R,K) += A(R,N) * B(K,N)^T   (row-row dots)
void gemm_nt_accum(const double* __restrict a, const double* __restrict b, double* __restrict c,
                   int64_t R, int64_t N, int64_t K) {
    for (int64_t r = 0; r < R; ++r) {
        const double* ar = a + r * N;
        double* cr = c + r * K;
        for (int64_t k = 0; k < K; ++k) {
            const double* bk = b + k * N;
            double acc = 0;
            for (int64_t n = 0; n < N; ++n) acc += ar[n] * bk[n];
            cr[k] += acc;
        }
    }
}

// C(K,N) += A(R,K)^T * B(R,N)   (rank-1 updates)
void gemm_tn_accum(const double* __restrict a, const double* __restrict b, double* __restrict c,
                   int64_t R, int64_t K, int64_t N) {
    for (int64_t r = 0; r < R; ++r) {
        const double* ar = a + r * K;
        const double* br = b + r * N;
        for (int64_t k = 0; k < K; ++k) {
            const double av = ar[k];
            double* ck = c + k * N;
            for (int64_t n = 0; n < N; ++n) ck[n] += av * br[n];
        }
    }
}

}  // namespace

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: expects a rank>=2 and b rank 2, got " +
                                    shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const int K = a.shape().back();
    if (K != b.shape()[0])
        throw std::invalid_argument("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    const int N = b.shape()[1];
    const int64_t R = a.size() / K;
    note_inputs({&a, &b});
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(N);
    Tensor out = Tensor::zeros(out_shape);
    gemm(a.data().data(), b.data().data(), out.mutable_data().data(), R, K, N);
    check_finite(out, "matmul");
    bool ng = a.requires_grad() || b.requires_grad();
    return finish(out, ng, [a, b, out, R, K, N](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        if (a.requires_grad())
            gemm_nt_accum(go->data(), b.data().data(), t.grad_accum(a).data(), R, N, K);
        if (b.requires_grad())
            gemm_tn_accum(a.data().data(), go->data(), t.grad_accum(b).data(), R, K, N);
    });
}

// ---------------------------------------------------------------------------
// reshape / transpose / concat
// ---------------------------------------------------------------------------

Tensor Tape::reshape(const Tensor& a, Shape shape) {
    check_shape_valid(shape, "reshape");
    if (shape_size(shape) != a.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    note_inputs({&a});
    Tensor out = Tensor::from(std::move(shape),
                              std::vector<double>(a.data().begin(), a.data().end()));
    return finish(out, a.requires_grad(), [a, out](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i];
    });
}

Tensor Tape::transpose01(const Tensor& a) {
    if (a.rank() != 3)
        throw std::invalid_argument("transpose01: expects rank 3, got " + shape_str(a.shape()));
    note_inputs({&a});
    const int A = a.shape()[0], B = a.shape()[1], D = a.shape()[2];
    Tensor out = Tensor::zeros({B, A, D});
    const double* pa = a.data().data();
    double* po = out.mutable_data().data();
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < B; ++j)
            std::memcpy(po + (static_cast<int64_t>(j) * A + i) * D,
                        pa + (static_cast<int64_t>(i) * B + j) * D, sizeof(double) * D);
    return finish(out, a.requires_grad(), [a, out, A, B, D](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        for (int i = 0; i < A; ++i)
            for (int j = 0; j < B; ++j) {
                const double* src = go->data() + (static_cast<int64_t>(j) * A + i) * D;
                double* dst = ga.data() + (static_cast<int64_t>(i) * B + j) * D;
                for (int d = 0; d < D; ++d) dst[d] += src[d];
            }
    });
}

Tensor Tape::concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || b.rank() != 4)
        throw std::invalid_argument("concat_channels: expects rank 4, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
        throw std::invalid_argument("concat_channels: incompatible shapes " + shape_str(sa) +
                                    " and " + shape_str(sb));
    note_inputs({&a, &b});
    const int T = sa[0], Ca = sa[1], Cb = sb[1], HW = sa[2] * sa[3];
    Tensor out = Tensor::zeros({T, Ca + Cb, sa[2], sa[3]});
    double* po = out.mutable_data().data();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (int t = 0; t < T; ++t) {
        std::memcpy(po + static_cast<int64_t>(t) * (Ca + Cb) * HW,
                    pa + static_cast<int64_t>(t) * Ca * HW, sizeof(double) * Ca * HW);
        std::memcpy(po + (static_cast<int64_t>(t) * (Ca + Cb) + Ca) * HW,
                    pb + static_cast<int64_t>(t) * Cb * HW, sizeof(double) * Cb * HW);
    }
    bool ng = a.requires_grad() || b.requires_grad();
    return finish(out, ng, [a, b, out, T, Ca, Cb, HW](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        if (a.requires_grad()) {
            auto& ga = t.grad_accum(a);
            for (int f = 0; f < T; ++f) {
                const double* src = go->data() + static_cast<int64_t>(f) * (Ca + Cb) * HW;
                double* dst = ga.data() + static_cast<int64_t>(f) * Ca * HW;
                for (int i = 0; i < Ca * HW; ++i) dst[i] += src[i];
            }
        }
        if (b.requires_grad()) {
            auto& gb = t.grad_accum(b);
            for (int f = 0; f < T; ++f) {
                const double* src = go->data() + (static_cast<int64_t>(f) * (Ca + Cb) + Ca) * HW;
                double* dst = gb.data() + static_cast<int64_t>(f) * Cb * HW;
                for (int i = 0; i < Cb * HW; ++i) dst[i] += src[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// softmax / layernorm / gelu
// ---------------------------------------------------------------------------

Tensor Tape::softmax(const Tensor& a) {
    const int D = a.shape().back();
    const int64_t R = a.size() / D;
    note_inputs({&a});
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    double* po = out.mutable_data().data();
    for (int64_t r = 0; r < R; ++r) {
        const double* x = pa + r * D;
        double* y = po + r * D;
        double mx = x[0];
        for (int i = 1; i < D; ++i) mx = std::max(mx, x[i]);
        double z = 0;
        for (int i = 0; i < D; ++i) {
            y[i] = std::exp(x[i] - mx);
            z += y[i];
        }
        const double inv = 1.0 / z;
        for (int i = 0; i < D; ++i) y[i] *= inv;
    }
    check_finite(out, "softmax");
    return finish(out, a.requires_grad(), [a, out, R, D](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        const double* y = out.data().data();
        for (int64_t r = 0; r < R; ++r) {
            const double* yr = y + r * D;
            const double* gr = go->data() + r * D;
            double dot = 0;
            for (int i = 0; i < D; ++i) dot += gr[i] * yr[i];
            double* gar = ga.data() + r * D;
            for (int i = 0; i < D; ++i) gar[i] += yr[i] * (gr[i] - dot);
        }
    });
}

Tensor Tape::layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps_var) {
    const int D = a.shape().back();
    if (gamma.size() != D || beta.size() != D)
        throw std::invalid_argument("layernorm: affine params must have size " + std::to_string(D) +
                                    ", got " + shape_str(gamma.shape()) + " and " +
                                    shape_str(beta.shape()));
    const int64_t R = a.size() / D;
    note_inputs({&a, &gamma, &beta});
    Tensor out = Tensor::zeros(a.shape());
    auto xhat = std::make_shared<std::vector<double>>(a.size());
    auto inv_std = std::make_shared<std::vector<double>>(R);
    const double* pa = a.data().data();
    const double* pg = gamma.data().data();
    const double* pb = beta.data().data();
    double* po = out.mutable_data().data();
    for (int64_t r = 0; r < R; ++r) {
        const double* x = pa + r * D;
        double m = 0;
        for (int i = 0; i < D; ++i) m += x[i];
        m /= D;
        double var = 0;
        for (int i = 0; i < D; ++i) var += (x[i] - m) * (x[i] - m);
        var /= D;
        // constant rows normalize to zero; output reduces to beta
        const double inv = var < eps_var ? 0.0 : 1.0 / std::sqrt(var);
        (*inv_std)[r] = inv;
        double* xh = xhat->data() + r * D;
        double* y = po + r * D;
        for (int i = 0; i < D; ++i) {
            xh[i] = (x[i] - m) * inv;
            y[i] = pg[i] * xh[i] + pb[i];
        }
    }
    check_finite(out, "layernorm");
    bool ng = a.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    return finish(out, ng, [a, gamma, beta, out, xhat, inv_std, R, D](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        const double* pg = gamma.data().data();
        if (gamma.requires_grad()) {
            auto& gg = t.grad_accum(gamma);
            for (int64_t r = 0; r < R; ++r)
                for (int i = 0; i < D; ++i) gg[i] += (*go)[r * D + i] * (*xhat)[r * D + i];
        }
        if (beta.requires_grad()) {
            auto& gb = t.grad_accum(beta);
            for (int64_t r = 0; r < R; ++r)
                for (int i = 0; i < D; ++i) gb[i] += (*go)[r * D + i];
        }
        if (a.requires_grad()) {
            auto& ga = t.grad_accum(a);
            for (int64_t r = 0; r < R; ++r) {
                const double inv = (*inv_std)[r];
                if (inv == 0.0) continue;  // constant input: zero subgradient
                const double* xh = xhat->data() + r * D;
                const double* g = go->data() + r * D;
                double sum_dxh = 0, sum_dxh_xh = 0;
                for (int i = 0; i < D; ++i) {
                    const double dxh = g[i] * pg[i];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh[i];
                }
                double* gar = ga.data() + r * D;
                for (int i = 0; i < D; ++i) {
                    const double dxh = g[i] * pg[i];
                    gar[i] += inv * (dxh - (sum_dxh + xh[i] * sum_dxh_xh) / D);
                }
            }
        }
    });
}

Tensor Tape::gelu(const Tensor& a) {
    note_inputs({&a});
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    double* po = out.mutable_data().data();
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (int64_t i = 0; i < a.size(); ++i)
        po[i] = 0.5 * pa[i] * (1.0 + std::erf(pa[i] * inv_sqrt2));
    check_finite(out, "gelu");
    return finish(out, a.requires_grad(), [a, out](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        const double* pa = a.data().data();
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        for (size_t i = 0; i < ga.size(); ++i) {
            const double x = pa[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            ga[i] += (*go)[i] * (cdf + x * pdf);
        }
    });
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

Tensor Tape::attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3 || q.shape() != k.shape() ||
        q.shape() != v.shape())
        throw std::invalid_argument("attention: q,k,v must share a rank-3 shape, got " +
                                    shape_str(q.shape()) + ", " + shape_str(k.shape()) + ", " +
                                    shape_str(v.shape()));
    const int B = q.shape()[0], S = q.shape()[1], D = q.shape()[2];
    if (heads <= 0 || D % heads != 0)
        throw std::invalid_argument("attention: dim " + std::to_string(D) +
                                    " not divisible by heads " + std::to_string(heads));
    const int Dh = D / heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(Dh));
    note_inputs({&q, &k, &v});

    Tensor out = Tensor::zeros(q.shape());
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(B) * heads * S * S);

    const double* pq = q.data().data();
    const double* pk = k.data().data();
    const double* pv = v.data().data();
    double* po = out.mutable_data().data();

    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < heads; ++h) {
            double* P = probs->data() + (static_cast<int64_t>(b) * heads + h) * S * S;
            const int64_t base = static_cast<int64_t>(b) * S * D + h * Dh;
            for (int i = 0; i < S; ++i) {
                const double* qi = pq + base + static_cast<int64_t>(i) * D;
                double* Pi = P + static_cast<int64_t>(i) * S;
                double mx = -1e300;
                for (int j = 0; j < S; ++j) {
                    const double* kj = pk + base + static_cast<int64_t>(j) * D;
                    double s = 0;
                    for (int d = 0; d < Dh; ++d) s += qi[d] * kj[d];
                    Pi[j] = s * scl;
                    mx = std::max(mx, Pi[j]);
                }
                double z = 0;
                for (int j = 0; j < S; ++j) {
                    Pi[j] = std::exp(Pi[j] - mx);
                    z += Pi[j];
                }
                const double inv = 1.0 / z;
                double* oi = po + base + static_cast<int64_t>(i) * D;
                for (int d = 0; d < Dh; ++d) oi[d] = 0;
                for (int j = 0; j < S; ++j) {
                    Pi[j] *= inv;
                    const double* vj = pv + base + static_cast<int64_t>(j) * D;
                    const double p = Pi[j];
                    for (int d = 0; d < Dh; ++d) oi[d] += p * vj[d];
                }
            }
        }
    }
    check_finite(out, "attention");
    bool ng = q.requires_grad() || k.requires_grad() || v.requires_grad();
    return finish(out, ng, [q, k, v, out, probs, B, S, D, Dh, heads, scl](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& gq = t.grad_accum(q);
        auto& gk = t.grad_accum(k);
        auto& gv = t.grad_accum(v);
        const double* pq = q.data().data();
        const double* pk = k.data().data();
        const double* pv = v.data().data();
        std::vector<double> dP(static_cast<size_t>(S) * S);
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < heads; ++h) {
                const double* P = probs->data() + (static_cast<int64_t>(b) * heads + h) * S * S;
                const int64_t base = static_cast<int64_t>(b) * S * D + h * Dh;
                // dV and dP
                for (int i = 0; i < S; ++i) {
                    const double* goi = go->data() + base + static_cast<int64_t>(i) * D;
                    const double* Pi = P + static_cast<int64_t>(i) * S;
                    double* dPi = dP.data() + static_cast<int64_t>(i) * S;
                    for (int j = 0; j < S; ++j) {
                        const double* vj = pv + base + static_cast<int64_t>(j) * D;
                        double* gvj = gv.data() + base + static_cast<int64_t>(j) * D;
                        double s = 0;
                        const double p = Pi[j];
                        for (int d = 0; d < Dh; ++d) {
                            s += goi[d] * vj[d];
                            gvj[d] += p * goi[d];
                        }
                        dPi[j] = s;
                    }
                }
                // softmax backward, then dQ, dK
                for (int i = 0; i < S; ++i) {
                    const double* Pi = P + static_cast<int64_t>(i) * S;
                    double* dPi = dP.data() + static_cast<int64_t>(i) * S;
                    double dot = 0;
                    for (int j = 0; j < S; ++j) dot += dPi[j] * Pi[j];
                    const double* qi = pq + base + static_cast<int64_t>(i) * D;
                    double* gqi = gq.data() + base + static_cast<int64_t>(i) * D;
                    for (int j = 0; j < S; ++j) {
                        const double ds = Pi[j] * (dPi[j] - dot) * scl;
                        const double* kj = pk + base + static_cast<int64_t>(j) * D;
                        double* gkj = gk.data() + base + static_cast<int64_t>(j) * D;
                        for (int d = 0; d < Dh; ++d) {
                            gqi[d] += ds * kj[d];
                            gkj[d] += ds * qi[d];
                        }
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// patchify / unpatchify
// ---------------------------------------------------------------------------

namespace {
void check_patch_dims(const char* op, int H, int W, int p) {
    if (p <= 0 || H % p != 0 || W % p != 0)
        throw std::invalid_argument(std::string(op) + ": patch " + std::to_string(p) +
                                    " does not tile " + std::to_string(H) + "x" + std::to_string(W));
}
}  // namespace

Tensor Tape::patchify(const Tensor& x, int p) {
    if (x.rank() != 4)
        throw std::invalid_argument("patchify: expects rank 4 (T,C,H,W), got " +
                                    shape_str(x.shape()));
    const int T = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    check_patch_dims("patchify", H, W, p);
    note_inputs({&x});
    const int hp = H / p, wp = W / p, F = C * p * p;
    Tensor out = Tensor::zeros({T * hp * wp, F});
    const double* px = x.data().data();
    double* po = out.mutable_data().data();
    for (int t = 0; t < T; ++t)
        for (int by = 0; by < hp; ++by)
            for (int bx = 0; bx < wp; ++bx) {
                double* tok = po + (static_cast<int64_t>(t) * hp * wp + by * wp + bx) * F;
                for (int c = 0; c < C; ++c)
                    for (int py = 0; py < p; ++py) {
                        const double* src =
                            px + ((static_cast<int64_t>(t) * C + c) * H + by * p + py) * W + bx * p;
                        double* dst = tok + (c * p + py) * p;
                        for (int q = 0; q < p; ++q) dst[q] = src[q];
                    }
            }
    return finish(out, x.requires_grad(), [x, out, T, C, H, W, p](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& gx = t.grad_accum(x);
        const int hp = H / p, wp = W / p, F = C * p * p;
        for (int f = 0; f < T; ++f)
            for (int by = 0; by < hp; ++by)
                for (int bx = 0; bx < wp; ++bx) {
                    const double* tok =
                        go->data() + (static_cast<int64_t>(f) * hp * wp + by * wp + bx) * F;
                    for (int c = 0; c < C; ++c)
                        for (int py = 0; py < p; ++py) {
                            double* dst = gx.data() +
                                          ((static_cast<int64_t>(f) * C + c) * H + by * p + py) * W +
                                          bx * p;
                            const double* src = tok + (c * p + py) * p;
                            for (int q = 0; q < p; ++q) dst[q] += src[q];
                        }
                }
    });
}

Tensor Tape::unpatchify(const Tensor& tokens, int T, int C, int H, int W, int p) {
    check_patch_dims("unpatchify", H, W, p);
    const int hp = H / p, wp = W / p, F = C * p * p;
    if (tokens.rank() != 2 || tokens.shape()[0] != T * hp * wp || tokens.shape()[1] != F)
        throw std::invalid_argument("unpatchify: tokens " + shape_str(tokens.shape()) +
                                    " do not match (T,C,H,W,p)=(" + std::to_string(T) + "," +
                                    std::to_string(C) + "," + std::to_string(H) + "," +
                                    std::to_string(W) + "," + std::to_string(p) + ")");
    note_inputs({&tokens});
    Tensor out = Tensor::zeros({T, C, H, W});
    const double* pt = tokens.data().data();
    double* po = out.mutable_data().data();
    for (int t = 0; t < T; ++t)
        for (int by = 0; by < hp; ++by)
            for (int bx = 0; bx < wp; ++bx) {
                const double* tok = pt + (static_cast<int64_t>(t) * hp * wp + by * wp + bx) * F;
                for (int c = 0; c < C; ++c)
                    for (int py = 0; py < p; ++py) {
                        double* dst =
                            po + ((static_cast<int64_t>(t) * C + c) * H + by * p + py) * W + bx * p;
                        const double* src = tok + (c * p + py) * p;
                        for (int q = 0; q < p; ++q) dst[q] = src[q];
                    }
            }
    return finish(out, tokens.requires_grad(), [tokens, out, T, C, H, W, p](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& gt = t.grad_accum(tokens);
        const int hp = H / p, wp = W / p, F = C * p * p;
        for (int f = 0; f < T; ++f)
            for (int by = 0; by < hp; ++by)
                for (int bx = 0; bx < wp; ++bx) {
                    double* tok = gt.data() + (static_cast<int64_t>(f) * hp * wp + by * wp + bx) * F;
                    for (int c = 0; c < C; ++c)
                        for (int py = 0; py < p; ++py) {
                            const double* src =
                                go->data() +
                                ((static_cast<int64_t>(f) * C + c) * H + by * p + py) * W + bx * p;
                            double* dst = tok + (c * p + py) * p;
                            for (int q = 0; q < p; ++q) dst[q] += src[q];
                        }
                }
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor Tape::sum(const Tensor& a) {
    note_inputs({&a});
    double s = 0;
    for (double x : a.data()) s += x;
    Tensor out = Tensor::scalar(s);
    check_finite(out, "sum");
    return finish(out, a.requires_grad(), [a, out](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        const double g = (*go)[0];
        for (double& x : ga) x += g;
    });
}

Tensor Tape::mean(const Tensor& a) {
    note_inputs({&a});
    double s = 0;
    for (double x : a.data()) s += x;
    const double inv = 1.0 / static_cast<double>(a.size());
    Tensor out = Tensor::scalar(s * inv);
    check_finite(out, "mean");
    return finish(out, a.requires_grad(), [a, out, inv](Tape& t) {
        auto* go = t.grad_buffer(out.impl());
        if (!go) return;
        auto& ga = t.grad_accum(a);
        const double g = (*go)[0] * inv;
        for (double& x : ga) x += g;
    });
}

}  // namespace paint
