#include "paint/twin.hpp"

#include <cmath>

namespace paint {

TwinMode twin_mode_from_name(const std::string& name) {
    if (name == "sequence") return TwinMode::sequence;
    if (name == "sliding" || name == "sliding-single") return TwinMode::sliding_single;
    throw config_error("unknown twin mode '" + name + "' (sequence|sliding)");
}

Reconstruction reconstruct(const WindowModel& model, const MeasurementWindow& stream,
                           const TwinConfig& cfg) {
    const auto& mc = model.config();
    const int h = mc.history, T = stream.window_length;
    if (T < h)
        throw std::invalid_argument("reconstruct: stream of " + std::to_string(T) +
                                    " frames is shorter than the window history " +
                                    std::to_string(h));

    Reconstruction out;
    if (cfg.mode == TwinMode::sliding_single) {
        out.t_first = stream.t_start + h - 1;
        out.frames.reserve(T - h + 1);
        for (int t = h - 1; t < T; ++t) {
            MeasurementWindow sub = stream.slice(t - h + 1, t + 1);
            const uint64_t wseed =
                derive_seed(cfg.seed, 0x511D, static_cast<uint64_t>(stream.t_start + t));
            auto window = fm_sample(model, sub, cfg.denoise_steps, wseed);
            out.frames.push_back(std::move(window[static_cast<size_t>(h - 1)]));
        }
    } else {
        out.t_first = stream.t_start;
        const int n_windows = T / h;
        for (int w = 0; w < n_windows; ++w) {
            MeasurementWindow sub = stream.slice(w * h, (w + 1) * h);
            const uint64_t wseed =
                derive_seed(cfg.seed, 0x5E9, static_cast<uint64_t>(stream.t_start + w * h));
            auto window = fm_sample(model, sub, cfg.denoise_steps, wseed);
            const int keep = (w + 1 == n_windows) ? h + mc.forecast : h;
            for (int f = 0; f < keep; ++f) out.frames.push_back(std::move(window[f]));
        }
    }
    return out;
}

EnsembleEstimate ensemble(const WindowModel& model, const MeasurementWindow& stream,
                          const TwinConfig& cfg, bool keep_members) {
    if (cfg.n_seeds < 1) throw std::invalid_argument("ensemble: n_seeds must be >= 1");
    EnsembleEstimate est;
    std::vector<Reconstruction> runs;
    runs.reserve(cfg.n_seeds);
    for (int s = 0; s < cfg.n_seeds; ++s) {
        TwinConfig member = cfg;
        member.seed = derive_seed(cfg.seed, 0xE5B, static_cast<uint64_t>(s));
        runs.push_back(reconstruct(model, stream, member));
    }
    est.t_first = runs[0].t_first;
    const size_t n_frames = runs[0].frames.size();
    const int H = runs[0].frames[0].H, W = runs[0].frames[0].W;
    est.mean.assign(n_frames, Field2D(H, W));
    est.stddev.assign(n_frames, Field2D(H, W));
    const double inv = 1.0 / cfg.n_seeds;
    for (size_t f = 0; f < n_frames; ++f) {
        for (size_t i = 0; i < est.mean[f].u.size(); ++i) {
            double su = 0, sv = 0, su2 = 0, sv2 = 0;
            for (auto& r : runs) {
                su += r.frames[f].u[i];
                sv += r.frames[f].v[i];
                su2 += r.frames[f].u[i] * r.frames[f].u[i];
                sv2 += r.frames[f].v[i] * r.frames[f].v[i];
            }
            est.mean[f].u[i] = su * inv;
            est.mean[f].v[i] = sv * inv;
            est.stddev[f].u[i] = std::sqrt(std::max(0.0, su2 * inv - su * inv * su * inv));
            est.stddev[f].v[i] = std::sqrt(std::max(0.0, sv2 * inv - sv * inv * sv * inv));
        }
    }
    if (keep_members) est.members = std::move(runs);
    return est;
}

std::vector<Field2D> ar_rollout(const NextFrameFn& step, int context,
                                std::vector<Field2D> initial_context,
                                const MeasurementWindow& stream, int T) {
    if (static_cast<int>(initial_context.size()) != context)
        throw std::invalid_argument("ar_rollout: expected " + std::to_string(context) +
                                    " initial context frames, got " +
                                    std::to_string(initial_context.size()));
    if (T < 0) throw std::invalid_argument("ar_rollout: T must be >= 0");
    if (stream.window_length < context + T)
        throw std::invalid_argument("ar_rollout: measurement stream has " +
                                    std::to_string(stream.window_length) + " frames, need " +
                                    std::to_string(context + T));

    std::vector<Field2D> frames = std::move(initial_context);
    for (int k = 0; k < T; ++k) {
        const int target = context + k;  // frame index within the stream
        std::vector<Field2D> ctx(frames.end() - context, frames.end());
        MeasurementWindow next = stream.slice(target, target + 1);
        Field2D pred = step(ctx, next);
        for (double v : pred.u)
            if (!std::isfinite(v))
                throw numeric_error("ar_rollout: non-finite state at step " + std::to_string(k));
        for (double v : pred.v)
            if (!std::isfinite(v))
                throw numeric_error("ar_rollout: non-finite state at step " + std::to_string(k));
        frames.push_back(std::move(pred));
    }
    return frames;
}

std::vector<Field2D> ar_rollout(const ARModel& model, std::vector<Field2D> initial_context,
                                const MeasurementWindow& stream, int T) {
    const auto& mc = model.config();
    const int64_t HW = static_cast<int64_t>(mc.grid_h) * mc.grid_w;
    NextFrameFn step = [&](const std::vector<Field2D>& ctx, const MeasurementWindow& next) {
        Tensor prev = Tensor::zeros({mc.context, 2, mc.grid_h, mc.grid_w});
        for (int f = 0; f < mc.context; ++f) {
            std::copy(ctx[f].u.begin(), ctx[f].u.end(),
                      prev.mutable_data().begin() + f * 2 * HW);
            std::copy(ctx[f].v.begin(), ctx[f].v.end(),
                      prev.mutable_data().begin() + f * 2 * HW + HW);
        }
        Tensor cond = encode(next, mc.grid_h, mc.grid_w);
        Tape tape(false);
        Tensor out = model.forward(tape, prev, cond);
        Field2D fld(mc.grid_h, mc.grid_w);
        std::copy(out.data().begin(), out.data().begin() + HW, fld.u.begin());
        std::copy(out.data().begin() + HW, out.data().end(), fld.v.begin());
        return fld;
    };
    return ar_rollout(step, mc.context, std::move(initial_context), stream, T);
}

Trajectory frames_to_trajectory(const std::vector<Field2D>& frames, const Trajectory& like) {
    if (frames.empty()) throw std::invalid_argument("frames_to_trajectory: no frames");
    Trajectory t;
    t.params = like.params;
    t.dt = like.dt;
    t.H = frames[0].H;
    t.W = frames[0].W;
    t.norm_scale = like.norm_scale;
    for (const auto& f : frames) t.push_field(f);
    return t;
}

}  // namespace paint
