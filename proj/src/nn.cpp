#include "paint/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace paint {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and trajectory formats assume a little-endian host");

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

Tensor ParamStore::add(const std::string& name, Tensor t) {
    for (auto& [n, _] : items_)
        if (n == name) throw std::invalid_argument("ParamStore: duplicate name '" + name + "'");
    t.set_requires_grad(true);
    items_.emplace_back(name, t);
    return t;
}

int64_t ParamStore::scalar_count() const {
    int64_t n = 0;
    for (auto& [_, t] : items_) n += t.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [_, t] : items_) t.zero_grad();
}

Tensor ParamStore::find(const std::string& name) const {
    for (auto& [n, t] : items_)
        if (n == name) return t;
    throw std::invalid_argument("ParamStore: no parameter named '" + name + "'");
}

// ---------------------------------------------------------------------------
// LrSchedule
// ---------------------------------------------------------------------------

double LrSchedule::at(int step) const {
    if (step <= 0) return lr_start;
    if (step < warmup_steps)
        return lr_start + (lr_peak - lr_start) * static_cast<double>(step) / warmup_steps;
    if (step >= total_steps) return lr_end;
    const double u = static_cast<double>(step - warmup_steps) /
                     static_cast<double>(total_steps - warmup_steps);
    const double c = 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
    return lr_end + (lr_peak - lr_end) * c;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

void AdamW::ensure_buffers(const ParamStore& params) {
    if (!m_.empty()) return;
    for (auto& [_, t] : params.items()) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void AdamW::step(ParamStore& params, double lr) {
    if (lr <= 0) throw std::invalid_argument("AdamW: lr must be positive");
    ensure_buffers(params);
    if (m_.size() != params.items().size())
        throw std::invalid_argument("AdamW: parameter list changed size");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params.items().size(); ++pi) {
        Tensor& t = params.items()[pi].second;
        auto& g = t.grad();
        auto& vals = t.mutable_data();
        if (g.size() != vals.size())
            throw std::invalid_argument("AdamW: grad shape mismatch for '" +
                                        params.items()[pi].first + "'");
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < vals.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            vals[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * vals[i]);
        }
    }
}

void AdamW::save_state(ParamStore& out, const ParamStore& params) const {
    out.add("optim.step_count", Tensor::scalar(static_cast<double>(step_count_)));
    for (size_t pi = 0; pi < m_.size(); ++pi) {
        const auto& name = params.items()[pi].first;
        const auto& shape = params.items()[pi].second.shape();
        out.add("optim.m." + name, Tensor::from(shape, m_[pi]));
        out.add("optim.v." + name, Tensor::from(shape, v_[pi]));
    }
}

void AdamW::load_state(const ParamStore& in, const ParamStore& params) {
    step_count_ = static_cast<int64_t>(in.find("optim.step_count").item());
    m_.clear();
    v_.clear();
    for (auto& [name, t] : params.items()) {
        Tensor m = in.find("optim.m." + name);
        Tensor v = in.find("optim.v." + name);
        if (m.size() != t.size() || v.size() != t.size())
            throw io_error("optimizer state shape mismatch for '" + name + "'");
        m_.emplace_back(m.data().begin(), m.data().end());
        v_.emplace_back(v.data().begin(), v.data().end());
    }
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

Linear Linear::make(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
    Linear l;
    const double std = 0.02;
    l.weight = ps.add(prefix + ".weight", Tensor::randn({in, out}, rng, std));
    l.bias = ps.add(prefix + ".bias", Tensor::zeros({out}));
    return l;
}

Tensor Linear::apply(Tape& tape, const Tensor& x) const {
    return tape.add(tape.matmul(x, weight), bias);
}

LayerNormParams LayerNormParams::make(ParamStore& ps, const std::string& prefix, int dim) {
    LayerNormParams ln;
    ln.gamma = ps.add(prefix + ".gamma", Tensor::full({dim}, 1.0));
    ln.beta = ps.add(prefix + ".beta", Tensor::zeros({dim}));
    return ln;
}

Tensor LayerNormParams::apply(Tape& tape, const Tensor& x) const {
    return tape.layernorm(x, gamma, beta);
}

AttentionBlock AttentionBlock::make(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                    int mlp_ratio, Rng& rng) {
    AttentionBlock b;
    b.heads = heads;
    b.ln1 = LayerNormParams::make(ps, prefix + ".ln1", dim);
    b.ln2 = LayerNormParams::make(ps, prefix + ".ln2", dim);
    b.wq = Linear::make(ps, prefix + ".wq", dim, dim, rng);
    b.wk = Linear::make(ps, prefix + ".wk", dim, dim, rng);
    b.wv = Linear::make(ps, prefix + ".wv", dim, dim, rng);
    b.wo = Linear::make(ps, prefix + ".wo", dim, dim, rng);
    b.fc1 = Linear::make(ps, prefix + ".fc1", dim, dim * mlp_ratio, rng);
    b.fc2 = Linear::make(ps, prefix + ".fc2", dim * mlp_ratio, dim, rng);
    return b;
}

Tensor AttentionBlock::apply(Tape& tape, const Tensor& x) const {
    Tensor h = ln1.apply(tape, x);
    Tensor attn = tape.attention(wq.apply(tape, h), wk.apply(tape, h), wv.apply(tape, h), heads);
    Tensor y = tape.add(x, wo.apply(tape, attn));
    Tensor h2 = ln2.apply(tape, y);
    Tensor m = fc2.apply(tape, tape.gelu(fc1.apply(tape, h2)));
    return tape.add(y, m);
}

Tensor sinusoidal_embedding(double t, int dim) {
    Tensor out = Tensor::zeros({dim});
    auto& v = out.mutable_data();
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        v[i] = std::sin(t * freq * 1000.0);
        v[half + i] = std::cos(t * freq * 1000.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'P', 'T', 'N', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is, const char* what) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4))
        throw io_error(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw io_error("cannot open '" + tmp + "' for writing");
        os.write(kMagic, 4);
        write_u32(os, kVersion);
        for (auto& [name, t] : params.items()) {
            write_u32(os, static_cast<uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_u32(os, static_cast<uint32_t>(t.rank()));
            for (int d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
            os.write(reinterpret_cast<const char*>(t.data().data()),
                     static_cast<std::streamsize>(t.size() * 8));
        }
        if (!os) throw io_error("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint '" + path.string() + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("'" + path.string() + "' is not a PTNT checkpoint (bad magic)");
    const uint32_t version = read_u32(is, "version");
    if (version != kVersion)
        throw io_error("checkpoint version " + std::to_string(version) + " unsupported (want " +
                       std::to_string(kVersion) + ")");
    ParamStore ps;
    for (;;) {
        uint32_t name_len = 0;
        if (!is.read(reinterpret_cast<char*>(&name_len), 4)) break;  // clean EOF
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw io_error("checkpoint: truncated name");
        const uint32_t rank = read_u32(is, "rank");
        Shape shape(rank);
        for (uint32_t i = 0; i < rank; ++i)
            shape[i] = static_cast<int>(read_u32(is, "shape"));
        const int64_t n = shape_size(shape);
        std::vector<double> values(static_cast<size_t>(n));
        if (!is.read(reinterpret_cast<char*>(values.data()), n * 8))
            throw io_error("checkpoint: truncated payload for '" + name + "' (expected " +
                           std::to_string(n * 8) + " bytes)");
        ps.add(name, Tensor::from(std::move(shape), std::move(values)));
    }
    return ps;
}

}  // namespace paint
