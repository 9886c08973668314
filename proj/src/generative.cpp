#include "paint/generative.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace paint {

void ModelConfig::validate() const {
    if (grid_h % patch != 0 || grid_w % patch != 0)
        throw config_error("model: patch " + std::to_string(patch) + " does not tile " +
                           std::to_string(grid_h) + "x" + std::to_string(grid_w));
    if (dim % heads != 0)
        throw config_error("model: dim " + std::to_string(dim) + " not divisible by heads " +
                           std::to_string(heads));
    if (layers < 1 || dim < 1 || heads < 1 || mlp_ratio < 1)
        throw config_error("model: layers, dim, heads, mlp_ratio must be positive");
    if (history < 1 || forecast < 0 || context < 1)
        throw config_error("model: history >= 1, forecast >= 0, context >= 1 required");
}

// ---------------------------------------------------------------------------
// WindowModel
// ---------------------------------------------------------------------------

WindowModel::WindowModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    build(seed);
}

void WindowModel::build(uint64_t seed) {
    Rng rng(derive_seed(seed, 0x30DE1));
    const int d = cfg_.dim;
    const int in_feat = 5 * cfg_.patch * cfg_.patch;   // 2 state + 3 conditioning channels
    const int out_feat = 2 * cfg_.patch * cfg_.patch;
    const int S = cfg_.tokens_per_frame();
    const int T = cfg_.window_frames();

    embed_ = Linear::make(params_, "embed", in_feat, d, rng);
    pos_spatial_ = params_.add("pos_spatial", Tensor::randn({S, d}, rng, 0.02));
    pos_temporal_ = params_.add("pos_temporal", Tensor::randn({T, d}, rng, 0.02));
    tau_fc1_ = Linear::make(params_, "tau_fc1", d, d, rng);
    tau_fc2_ = Linear::make(params_, "tau_fc2", d, d, rng);
    for (int l = 0; l < cfg_.layers; ++l)
        blocks_.push_back(AttentionBlock::make(params_, "blocks." + std::to_string(l), d,
                                               cfg_.heads, cfg_.mlp_ratio, rng));
    final_ln_ = LayerNormParams::make(params_, "final_ln", d);
    head_ = Linear::make(params_, "head", d, out_feat, rng);
}

Tensor WindowModel::forward(Tape& tape, const Tensor& x_tau, const Tensor& cond,
                            double tau) const {
    const int T = cfg_.window_frames(), H = cfg_.grid_h, W = cfg_.grid_w;
    const int S = cfg_.tokens_per_frame(), d = cfg_.dim;
    if (x_tau.shape() != Shape{T, 2, H, W})
        throw std::invalid_argument("window model: state window " + shape_str(x_tau.shape()) +
                                    ", expected " + shape_str({T, 2, H, W}));
    if (cond.shape() != Shape{T, 3, H, W})
        throw std::invalid_argument("window model: conditioning " + shape_str(cond.shape()) +
                                    ", expected " + shape_str({T, 3, H, W}));

    Tensor inp = tape.concat_channels(x_tau, cond);
    Tensor tok = embed_.apply(tape, tape.patchify(inp, cfg_.patch));
    Tensor x = tape.reshape(tok, {T, S, d});
    x = tape.add(x, pos_spatial_);
    {
        // temporal positions broadcast per frame in the (S, T, d) layout
        Tensor xt = tape.transpose01(x);
        xt = tape.add(xt, pos_temporal_);
        x = tape.transpose01(xt);
    }
    {
        Tensor temb = sinusoidal_embedding(tau, d);
        Tensor h = tau_fc2_.apply(tape, tape.gelu(tau_fc1_.apply(tape, tape.reshape(temb, {1, d}))));
        x = tape.add(x, tape.reshape(h, {d}));
    }
    for (size_t l = 0; l < blocks_.size(); ++l) {
        if (l % 2 == 0) {
            x = blocks_[l].apply(tape, x);  // attention over space within each frame
        } else {
            Tensor xt = tape.transpose01(x);  // attention over time per location
            xt = blocks_[l].apply(tape, xt);
            x = tape.transpose01(xt);
        }
    }
    x = final_ln_.apply(tape, x);
    Tensor out_tok = head_.apply(tape, tape.reshape(x, {T * S, d}));
    return tape.unpatchify(out_tok, T, 2, H, W, cfg_.patch);
}

// ---------------------------------------------------------------------------
// ARModel
// ---------------------------------------------------------------------------

ARModel::ARModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    build(seed);
}

void ARModel::build(uint64_t seed) {
    Rng rng(derive_seed(seed, 0xA7));
    const int d = cfg_.dim;
    const int in_feat = (2 * cfg_.context + 3) * cfg_.patch * cfg_.patch;
    const int out_feat = 2 * cfg_.patch * cfg_.patch;
    const int S = cfg_.tokens_per_frame();

    embed_ = Linear::make(params_, "embed", in_feat, d, rng);
    pos_spatial_ = params_.add("pos_spatial", Tensor::randn({S, d}, rng, 0.02));
    for (int l = 0; l < cfg_.layers; ++l)
        blocks_.push_back(AttentionBlock::make(params_, "blocks." + std::to_string(l), d,
                                               cfg_.heads, cfg_.mlp_ratio, rng));
    final_ln_ = LayerNormParams::make(params_, "final_ln", d);
    head_ = Linear::make(params_, "head", d, out_feat, rng);
}

Tensor ARModel::forward(Tape& tape, const Tensor& prev, const Tensor& cond) const {
    const int H = cfg_.grid_h, W = cfg_.grid_w, S = cfg_.tokens_per_frame(), d = cfg_.dim;
    if (prev.shape() != Shape{cfg_.context, 2, H, W})
        throw std::invalid_argument("ar model: context " + shape_str(prev.shape()) +
                                    ", expected " + shape_str({cfg_.context, 2, H, W}));
    if (cond.shape() != Shape{1, 3, H, W})
        throw std::invalid_argument("ar model: conditioning " + shape_str(cond.shape()) +
                                    ", expected " + shape_str({1, 3, H, W}));

    Tensor stacked = tape.reshape(prev, {1, 2 * cfg_.context, H, W});
    Tensor inp = tape.concat_channels(stacked, cond);
    Tensor tok = embed_.apply(tape, tape.patchify(inp, cfg_.patch));
    Tensor x = tape.add(tape.reshape(tok, {1, S, d}), pos_spatial_);
    for (auto& b : blocks_) x = b.apply(tape, x);
    x = final_ln_.apply(tape, x);
    Tensor out_tok = head_.apply(tape, tape.reshape(x, {S, d}));
    return tape.unpatchify(out_tok, 1, 2, H, W, cfg_.patch);
}

// ---------------------------------------------------------------------------
// Model checkpoints (PTNT with meta.* entries)
// ---------------------------------------------------------------------------

namespace {

void append_meta(ParamStore& out, const ModelConfig& c, int model_kind) {
    auto put = [&](const std::string& k, double v) { out.add("meta." + k, Tensor::scalar(v)); };
    put("model_kind", model_kind);
    put("grid_h", c.grid_h);
    put("grid_w", c.grid_w);
    put("patch", c.patch);
    put("dim", c.dim);
    put("layers", c.layers);
    put("heads", c.heads);
    put("mlp_ratio", c.mlp_ratio);
    put("history", c.history);
    put("forecast", c.forecast);
    put("context", c.context);
}

ModelConfig read_meta(const ParamStore& in, int expect_kind) {
    auto get = [&](const std::string& k) { return in.find("meta." + k).item(); };
    const int kind = static_cast<int>(get("model_kind"));
    if (kind != expect_kind)
        throw io_error("checkpoint holds model kind " + std::to_string(kind) + ", expected " +
                       std::to_string(expect_kind));
    ModelConfig c;
    c.grid_h = static_cast<int>(get("grid_h"));
    c.grid_w = static_cast<int>(get("grid_w"));
    c.patch = static_cast<int>(get("patch"));
    c.dim = static_cast<int>(get("dim"));
    c.layers = static_cast<int>(get("layers"));
    c.heads = static_cast<int>(get("heads"));
    c.mlp_ratio = static_cast<int>(get("mlp_ratio"));
    c.history = static_cast<int>(get("history"));
    c.forecast = static_cast<int>(get("forecast"));
    c.context = static_cast<int>(get("context"));
    return c;
}

void assign_params(ParamStore& dst, const ParamStore& src) {
    for (auto& [name, t] : dst.items()) {
        Tensor loaded = src.find(name);
        if (loaded.shape() != t.shape())
            throw io_error("checkpoint: shape mismatch for '" + name + "': " +
                           shape_str(loaded.shape()) + " vs " + shape_str(t.shape()));
        std::copy(loaded.data().begin(), loaded.data().end(), t.mutable_data().begin());
    }
}

ParamStore with_meta(const ParamStore& params, const ModelConfig& cfg, int kind) {
    ParamStore out;
    for (auto& [name, t] : params.items()) out.add(name, t);
    append_meta(out, cfg, kind);
    return out;
}

}  // namespace

void WindowModel::save(const std::filesystem::path& path) const {
    save_checkpoint(path, with_meta(params_, cfg_, 0));
}

WindowModel WindowModel::load(const std::filesystem::path& path) {
    ParamStore in = load_checkpoint(path);
    WindowModel m(read_meta(in, 0), 0);
    assign_params(m.params_, in);
    return m;
}

void ARModel::save(const std::filesystem::path& path) const {
    save_checkpoint(path, with_meta(params_, cfg_, 1));
}

ARModel ARModel::load(const std::filesystem::path& path) {
    ParamStore in = load_checkpoint(path);
    ARModel m(read_meta(in, 1), 0);
    assign_params(m.params_, in);
    return m;
}

void save_training_state(const std::filesystem::path& path, const ParamStore& model_params,
                         const AdamW& opt, int step, const ModelConfig& cfg, int model_kind) {
    ParamStore out = with_meta(model_params, cfg, model_kind);
    out.add("train.step", Tensor::scalar(step));
    opt.save_state(out, model_params);
    save_checkpoint(path, out);
}

int load_training_state(const std::filesystem::path& path, ParamStore& model_params, AdamW& opt) {
    ParamStore in = load_checkpoint(path);
    assign_params(model_params, in);
    opt.load_state(in, model_params);
    return static_cast<int>(in.find("train.step").item());
}

// ---------------------------------------------------------------------------
// Loss ingredients
// ---------------------------------------------------------------------------

SpatialWeightMap SpatialWeightMap::make(const ProbeSet& probes, int H, int W, double alpha,
                                        double sigma) {
    probes.validate();
    SpatialWeightMap wm;
    wm.H = H;
    wm.W = W;
    wm.alpha = alpha;
    wm.sigma = sigma;
    wm.w.assign(static_cast<size_t>(H) * W, 1.0);
    if (alpha == 0.0) return wm;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double d2 = 1e300;
            for (auto& [r, c] : probes.positions) {
                const double dy = y - r, dx = x - c;
                d2 = std::min(d2, dy * dy + dx * dx);
            }
            wm.w[static_cast<size_t>(y) * W + x] += alpha * std::exp(-d2 / (2 * sigma * sigma));
        }
    return wm;
}

Tensor coupled_source(const MeasurementWindow& meas, int window_frames, int history, int grid_h,
                      int grid_w, uint64_t noise_seed) {
    if (meas.window_length > history)
        throw std::invalid_argument("coupled_source: measurements longer than the history prefix");
    Rng rng(derive_seed(noise_seed, 0x50FCE));
    Tensor x0 = Tensor::zeros({window_frames, 2, grid_h, grid_w});
    auto& d = x0.mutable_data();
    for (double& v : d) v = rng.normal();
    // measured frames sit at the end of the history prefix
    const int first = history - meas.window_length;
    const int64_t HW = static_cast<int64_t>(grid_h) * grid_w;
    for (int f = 0; f < meas.window_length; ++f) {
        const int64_t base = static_cast<int64_t>(first + f) * 2 * HW;
        for (int p = 0; p < meas.probe_set.count(); ++p) {
            const auto& [r, c] = meas.probe_set.positions[static_cast<size_t>(p)];
            const int64_t px = static_cast<int64_t>(r) * grid_w + c;
            d[base + px] = meas.u_at(f, p);
            d[base + HW + px] = meas.v_at(f, p);
        }
    }
    return x0;
}

Tensor window_conditioning(const MeasurementWindow& meas, int window_frames, int history,
                           int grid_h, int grid_w) {
    if (meas.window_length > history)
        throw std::invalid_argument("window_conditioning: measurements longer than history");
    Tensor cond = Tensor::zeros({window_frames, 3, grid_h, grid_w});
    Tensor enc = encode(meas, grid_h, grid_w);
    const int first = history - meas.window_length;
    const int64_t per_frame = 3LL * grid_h * grid_w;
    std::copy(enc.data().begin(), enc.data().end(),
              cond.mutable_data().begin() + first * per_frame);
    return cond;
}

Tensor fm_loss(Tape& tape, const WindowModel& model, const WindowSample& sample, double tau,
               uint64_t noise_seed, const SpatialWeightMap& weights) {
    if (tau < 0.0 || tau > 1.0)
        throw std::invalid_argument("fm_loss: tau=" + std::to_string(tau) + " outside [0,1]");
    const auto& cfg = model.config();
    const int T = cfg.window_frames();
    if (sample.states.shape() != Shape{T, 2, cfg.grid_h, cfg.grid_w})
        throw std::invalid_argument("fm_loss: sample window " + shape_str(sample.states.shape()) +
                                    " does not match model window " +
                                    shape_str({T, 2, cfg.grid_h, cfg.grid_w}));

    Tensor x0 =
        coupled_source(sample.measurements, T, cfg.history, cfg.grid_h, cfg.grid_w, noise_seed);
    Tensor cond =
        window_conditioning(sample.measurements, T, cfg.history, cfg.grid_h, cfg.grid_w);

    const auto x1 = sample.states.data();
    Tensor x_tau = Tensor::zeros(sample.states.shape());
    Tensor target = Tensor::zeros(sample.states.shape());
    for (int64_t i = 0; i < sample.states.size(); ++i) {
        x_tau.mutable_data()[i] = (1.0 - tau) * x0.data()[i] + tau * x1[i];
        target.mutable_data()[i] = x1[i] - x0.data()[i];
    }

    Tensor vhat = model.forward(tape, x_tau, cond, tau);
    Tensor diff = tape.sub(vhat, target);
    Tensor sq = tape.mul(diff, diff);
    Tensor weighted = tape.mul(sq, weights.tensor());
    return tape.mean(weighted);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

Tensor euler_sample(const VelocityModel& model, Tensor x0, const Tensor& cond, int steps) {
    if (steps < 1) throw std::invalid_argument("euler_sample: steps must be >= 1");
    Tensor x = Tensor::from(x0.shape(), std::vector<double>(x0.data().begin(), x0.data().end()));
    const double dtau = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const double tau = static_cast<double>(k) / steps;
        try {
            Tape tape(false);
            Tensor v = model.velocity(tape, x, cond, tau);
            auto& xd = x.mutable_data();
            for (int64_t i = 0; i < x.size(); ++i) xd[i] += dtau * v.data()[i];
        } catch (const numeric_error& e) {
            throw numeric_error("euler_sample: non-finite state at denoising step " +
                                std::to_string(k) + "/" + std::to_string(steps) + ": " + e.what());
        }
    }
    for (double v : x.data())
        if (!std::isfinite(v))
            throw numeric_error("euler_sample: non-finite output after " + std::to_string(steps) +
                                " steps");
    return x;
}

std::vector<Field2D> fm_sample(const WindowModel& model, const MeasurementWindow& measurements,
                               int steps, uint64_t seed) {
    const auto& cfg = model.config();
    const int T = cfg.window_frames();
    Tensor x0 = coupled_source(measurements, T, cfg.history, cfg.grid_h, cfg.grid_w,
                               derive_seed(seed, 0xD4A));
    Tensor cond = window_conditioning(measurements, T, cfg.history, cfg.grid_h, cfg.grid_w);
    Tensor x = euler_sample(model, x0, cond, steps);

    std::vector<Field2D> frames;
    frames.reserve(T);
    const int64_t HW = static_cast<int64_t>(cfg.grid_h) * cfg.grid_w;
    for (int f = 0; f < T; ++f) {
        Field2D fld(cfg.grid_h, cfg.grid_w);
        std::copy(x.data().begin() + f * 2 * HW, x.data().begin() + f * 2 * HW + HW,
                  fld.u.begin());
        std::copy(x.data().begin() + f * 2 * HW + HW, x.data().begin() + (f + 1) * 2 * HW,
                  fld.v.begin());
        frames.push_back(std::move(fld));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::vector<Trajectory> load_split(const DatasetManifest& m, Split s) {
    std::vector<Trajectory> out;
    for (const ManifestEntry* e : m.of(s)) out.push_back(read_trajectory(e->path));
    if (out.empty())
        throw std::invalid_argument("dataset has no " + split_name(s) + " trajectories");
    return out;
}

namespace {

// Shared batch-parallel training loop. build_loss assembles one sample and
// returns its loss on the given tape; gradients are reduced in element order
// so results do not depend on the thread count.
template <class BuildLoss>
TrainStats run_training(const char* label, ParamStore& params, AdamW& opt, const TrainConfig& cfg,
                        const ModelConfig& mcfg, int model_kind, BuildLoss&& build_loss) {
    if (cfg.steps < 1 || cfg.batch < 1)
        throw config_error(std::string(label) + ": steps and batch must be positive");

    LrSchedule sched;
    sched.lr_start = cfg.lr_start;
    sched.lr_peak = cfg.lr_peak;
    sched.lr_end = cfg.lr_end;
    sched.total_steps = cfg.steps;
    sched.warmup_steps = std::max(1, static_cast<int>(cfg.warmup_frac * cfg.steps));

    const size_t n_params = params.items().size();
    std::vector<std::vector<std::vector<double>>> grad_slots(cfg.batch);
    for (auto& slots : grad_slots) {
        slots.resize(n_params);
        for (size_t p = 0; p < n_params; ++p)
            slots[p].assign(params.items()[p].second.size(), 0.0);
    }
    std::vector<double> losses(cfg.batch, 0.0);

    std::ofstream csv;
    if (!cfg.loss_csv_path.empty()) {
        csv.open(cfg.loss_csv_path, cfg.resume_step > 0 ? std::ios::app : std::ios::trunc);
        if (!csv) throw io_error("cannot open loss log '" + cfg.loss_csv_path.string() + "'");
        if (cfg.resume_step == 0) csv << "step,lr,loss\n";
        csv.precision(17);
    }

    TrainStats stats;
    for (int step = cfg.resume_step + 1; step <= cfg.steps; ++step) {
        const double lr = sched.at(step);
        try {
            parallel_for(cfg.batch, [&](int64_t i) {
                const uint64_t es = derive_seed(cfg.seed, 0xBA7C4, static_cast<uint64_t>(step),
                                                static_cast<uint64_t>(i));
                Tape tape;
                Tensor loss = build_loss(tape, es);
                tape.backward_local(loss);
                losses[i] = loss.item();
                for (size_t p = 0; p < n_params; ++p) {
                    auto g = tape.grad_of(params.items()[p].second);
                    auto& slot = grad_slots[i][p];
                    if (g.empty())
                        std::fill(slot.begin(), slot.end(), 0.0);
                    else
                        std::copy(g.begin(), g.end(), slot.begin());
                }
            });
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(label) + ": aborted at step " + std::to_string(step) +
                                ": " + e.what());
        }

        params.zero_grads();
        const double inv_batch = 1.0 / cfg.batch;
        for (int i = 0; i < cfg.batch; ++i)
            for (size_t p = 0; p < n_params; ++p) {
                auto& dst = params.items()[p].second.grad();
                const auto& src = grad_slots[i][p];
                for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j] * inv_batch;
            }

        double mean_loss = 0;
        for (double l : losses) mean_loss += l;
        mean_loss /= cfg.batch;
        if (!std::isfinite(mean_loss))
            throw numeric_error(std::string(label) + ": non-finite loss at step " +
                                std::to_string(step));

        opt.step(params, lr);
        if (csv.is_open()) csv << step << "," << lr << "," << mean_loss << "\n";

        stats.steps_run = step;
        stats.final_loss = mean_loss;
        if (!cfg.checkpoint_path.empty() &&
            (step % cfg.checkpoint_every == 0 || step == cfg.steps)) {
            csv.flush();
            save_training_state(cfg.checkpoint_path, params, opt, step, mcfg, model_kind);
        }
    }
    return stats;
}

int pick_train_frame(Rng& rng, const Trajectory& traj, int lead, int tail) {
    const int lo = lead, hi = traj.frame_count() - 1 - tail;
    if (hi < lo)
        throw std::invalid_argument("training trajectory too short: " +
                                    std::to_string(traj.frame_count()) + " frames");
    return lo + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(hi - lo + 1)));
}

}  // namespace

TrainStats train_paint(const DatasetManifest& data, WindowModel& model, AdamW& opt,
                       const TrainConfig& cfg) {
    const auto trajs = load_split(data, Split::train);
    const auto& mc = model.config();
    for (auto& t : trajs)
        if (t.H != mc.grid_h || t.W != mc.grid_w)
            throw config_error("train_paint: trajectory grid " + std::to_string(t.H) + "x" +
                               std::to_string(t.W) + " does not match model");
    opt.weight_decay = cfg.weight_decay;

    return run_training(
        "train_paint", model.params(), opt, cfg, mc, 0, [&](Tape& tape, uint64_t es) {
            Rng rng(es);
            const auto& traj = trajs[rng.uniform_index(trajs.size())];
            const int t = pick_train_frame(rng, traj, mc.history, mc.forecast);
            const int k_f = traj.params.kind == SystemKind::kolmogorov ? traj.params.k_f : 1;
            ProbeSet probes = sample_probes(ProbeKind::random, cfg.train_probes, mc.grid_h,
                                            mc.grid_w, k_f, rng.next_u64());
            WindowSample ws = extract_window(traj, probes, t, mc.history, mc.forecast);
            if (cfg.window_dropout && rng.uniform() < 0.5) {
                const int h_eff = 1 + static_cast<int>(rng.uniform_index(mc.history));
                if (h_eff < mc.history)
                    ws.measurements = ws.measurements.slice(mc.history - h_eff, mc.history);
            }
            const double tau = rng.uniform();
            const uint64_t noise_seed = rng.next_u64();
            SpatialWeightMap weights = SpatialWeightMap::make(probes, mc.grid_h, mc.grid_w,
                                                              cfg.loss_alpha, cfg.loss_sigma);
            return fm_loss(tape, model, ws, tau, noise_seed, weights);
        });
}

TrainStats train_ar(const DatasetManifest& data, ARModel& model, AdamW& opt,
                    const TrainConfig& cfg) {
    const auto trajs = load_split(data, Split::train);
    const auto& mc = model.config();
    for (auto& t : trajs)
        if (t.H != mc.grid_h || t.W != mc.grid_w)
            throw config_error("train_ar: trajectory grid does not match model");
    opt.weight_decay = cfg.weight_decay;

    const int64_t HW = static_cast<int64_t>(mc.grid_h) * mc.grid_w;
    return run_training(
        "train_ar", model.params(), opt, cfg, mc, 1, [&, HW](Tape& tape, uint64_t es) {
            Rng rng(es);
            const auto& traj = trajs[rng.uniform_index(trajs.size())];
            // teacher forcing: ground-truth context [t-ctx+1, t], target t+1
            const int t = pick_train_frame(rng, traj, mc.context - 1, 1);
            const int k_f = traj.params.kind == SystemKind::kolmogorov ? traj.params.k_f : 1;
            ProbeSet probes = sample_probes(ProbeKind::random, cfg.train_probes, mc.grid_h,
                                            mc.grid_w, k_f, rng.next_u64());

            Tensor prev = Tensor::zeros({mc.context, 2, mc.grid_h, mc.grid_w});
            for (int f = 0; f < mc.context; ++f) {
                const auto& frame = traj.frames[static_cast<size_t>(t - mc.context + 1 + f)];
                std::copy(frame.begin(), frame.end(),
                          prev.mutable_data().begin() + f * 2 * HW);
            }
            MeasurementWindow next_meas = emit(traj, probes, t + 1, 1);
            Tensor cond = encode(next_meas, mc.grid_h, mc.grid_w);

            Tensor target = Tensor::zeros({1, 2, mc.grid_h, mc.grid_w});
            const auto& tf = traj.frames[static_cast<size_t>(t + 1)];
            std::copy(tf.begin(), tf.end(), target.mutable_data().begin());

            Tensor pred = model.forward(tape, prev, cond);
            Tensor diff = tape.sub(pred, target);
            return tape.mean(tape.mul(diff, diff));
        });
}

}  // namespace paint
