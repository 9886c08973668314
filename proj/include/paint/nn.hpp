#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "paint/tensor.hpp"

namespace paint {

/// Ordered, named parameter registry. Order is the optimizer's iteration
/// order and the checkpoint record order.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t);
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    int64_t scalar_count() const;
    void zero_grads();
    Tensor find(const std::string& name) const;  // throws if absent

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

/// Linear warmup from lr_start to lr_peak over warmup_steps, then cosine
/// decay to lr_end at total_steps. Positive everywhere.
struct LrSchedule {
    double lr_start = 5e-7;
    double lr_peak = 1e-4;
    double lr_end = 1e-5;
    int warmup_steps = 0;
    int total_steps = 1;

    double at(int step) const;
};

/// AdamW with decoupled weight decay. Moment buffers are owned here and
/// match parameter shapes; step_count increments once per update call.
class AdamW {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;

    explicit AdamW(double weight_decay = 0.05) : weight_decay(weight_decay) {}

    /// Apply one update to every parameter from its .grad buffer.
    void step(ParamStore& params, double lr);

    int64_t step_count() const { return step_count_; }

    // checkpoint support
    void save_state(ParamStore& out, const ParamStore& params) const;
    void load_state(const ParamStore& in, const ParamStore& params);

private:
    int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
    void ensure_buffers(const ParamStore& params);
};

// ---------------------------------------------------------------------------
// Layers. Each registers its tensors in a ParamStore under a name prefix.
// ---------------------------------------------------------------------------

struct Linear {
    Tensor weight;  // (in, out)
    Tensor bias;    // (out)

    static Linear make(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng);
    Tensor apply(Tape& tape, const Tensor& x) const;  // x: (..., in)
};

struct LayerNormParams {
    Tensor gamma, beta;

    static LayerNormParams make(ParamStore& ps, const std::string& prefix, int dim);
    Tensor apply(Tape& tape, const Tensor& x) const;
};

/// Pre-norm transformer block: x + attn(ln1(x)), then x + mlp(ln2(x)).
struct AttentionBlock {
    LayerNormParams ln1, ln2;
    Linear wq, wk, wv, wo;
    Linear fc1, fc2;
    int heads = 1;

    static AttentionBlock make(ParamStore& ps, const std::string& prefix, int dim, int heads,
                               int mlp_ratio, Rng& rng);
    Tensor apply(Tape& tape, const Tensor& x) const;  // x: (B, S, D)
};

/// Sinusoidal features of a scalar in [0,1]: [sin(w_i t), cos(w_i t)] with
/// geometrically spaced frequencies. Returns a (dim) tensor without grad.
Tensor sinusoidal_embedding(double t, int dim);

// ---------------------------------------------------------------------------
// Checkpoints: magic "PTNT", u32 version, then per tensor
// (u32 name length, name bytes, u32 rank, u32 dims..., f64 payload),
// little-endian throughout.
// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace paint
