#include "paint/evalkit.hpp"

#include <algorithm>
#include <cmath>

namespace paint {

namespace {

int shell_count(int H, int W) {
    const double kmax = std::sqrt(static_cast<double>(H / 2) * (H / 2) +
                                  static_cast<double>(W / 2) * (W / 2));
    return static_cast<int>(std::lround(kmax)) + 1;
}

}  // namespace

std::vector<double> energy_spectrum(const Field2D& f) {
    const int H = f.H, W = f.W;
    std::vector<std::complex<double>> uh(f.u.size()), vh(f.v.size());
    for (size_t i = 0; i < f.u.size(); ++i) {
        uh[i] = f.u[i];
        vh[i] = f.v[i];
    }
    fft2(uh, H, W);
    fft2(vh, H, W);
    std::vector<double> spec(shell_count(H, W), 0.0);
    const double norm = 1.0 / (static_cast<double>(H) * W * H * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double kx = wavenumber(x, W), ky = wavenumber(y, H);
            const int shell = static_cast<int>(std::lround(std::sqrt(kx * kx + ky * ky)));
            const size_t i = static_cast<size_t>(y) * W + x;
            spec[shell] += 0.5 * (std::norm(uh[i]) + std::norm(vh[i])) * norm;
        }
    return spec;
}

FlowStats flow_stats(const std::vector<Field2D>& frames) {
    if (frames.size() < 2)
        throw std::invalid_argument("flow_stats: need >= 2 frames for the time variance");
    const int H = frames[0].H, W = frames[0].W;
    for (auto& f : frames)
        if (f.H != H || f.W != W) throw std::invalid_argument("flow_stats: frame shapes differ");

    FlowStats st;
    st.time_mean = Field2D(H, W);
    st.time_variance = Field2D(H, W);
    const double inv = 1.0 / static_cast<double>(frames.size());
    for (auto& f : frames)
        for (size_t i = 0; i < f.u.size(); ++i) {
            st.time_mean.u[i] += f.u[i] * inv;
            st.time_mean.v[i] += f.v[i] * inv;
        }
    for (auto& f : frames)
        for (size_t i = 0; i < f.u.size(); ++i) {
            const double du = f.u[i] - st.time_mean.u[i];
            const double dv = f.v[i] - st.time_mean.v[i];
            st.time_variance.u[i] += du * du * inv;
            st.time_variance.v[i] += dv * dv * inv;
        }

    st.spectrum.assign(shell_count(H, W), 0.0);
    for (auto& f : frames) {
        auto s = energy_spectrum(f);
        for (size_t k = 0; k < s.size(); ++k) st.spectrum[k] += s[k] * inv;
    }
    return st;
}

FlowStats flow_stats(const Trajectory& traj) {
    std::vector<Field2D> frames;
    frames.reserve(traj.frame_count());
    for (int f = 0; f < traj.frame_count(); ++f) frames.push_back(traj.field(f));
    return flow_stats(frames);
}

double ols_slope(const std::vector<double>& y) {
    const size_t n = y.size();
    if (n < 2) return 0.0;
    double mx = (n - 1) / 2.0, my = 0;
    for (double v : y) my += v;
    my /= n;
    double num = 0, den = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (i - mx) * (y[i] - my);
        den += (i - mx) * (i - mx);
    }
    return num / den;
}

DriftReport drift_report(const std::vector<Field2D>& truth, const std::vector<Field2D>& est) {
    if (truth.size() != est.size() || truth.empty())
        throw std::invalid_argument("drift_report: sequences differ in length (" +
                                    std::to_string(truth.size()) + " vs " +
                                    std::to_string(est.size()) + ")");
    if (truth[0].H != est[0].H || truth[0].W != est[0].W)
        throw std::invalid_argument("drift_report: frame shapes differ");

    DriftReport rep;
    rep.mse_t.reserve(truth.size());
    double total = 0;
    for (size_t f = 0; f < truth.size(); ++f) {
        double acc = 0;
        for (size_t i = 0; i < truth[f].u.size(); ++i) {
            const double du = truth[f].u[i] - est[f].u[i];
            const double dv = truth[f].v[i] - est[f].v[i];
            acc += du * du + dv * dv;
        }
        acc /= 2.0 * truth[f].u.size();
        rep.mse_t.push_back(acc);
        total += acc;
    }
    rep.mse_trajectory = total / truth.size();
    rep.slope = ols_slope(rep.mse_t);

    if (truth.size() >= 2) {
        FlowStats st = flow_stats(truth), se = flow_stats(est);
        double mae_m = 0, mae_v = 0;
        for (size_t i = 0; i < st.time_mean.u.size(); ++i) {
            mae_m += std::abs(st.time_mean.u[i] - se.time_mean.u[i]);
            mae_m += std::abs(st.time_mean.v[i] - se.time_mean.v[i]);
            mae_v += std::abs(st.time_variance.u[i] - se.time_variance.u[i]);
            mae_v += std::abs(st.time_variance.v[i] - se.time_variance.v[i]);
        }
        rep.mae_time_mean = mae_m / (2.0 * st.time_mean.u.size());
        rep.mae_time_variance = mae_v / (2.0 * st.time_mean.u.size());
        double se2 = 0;
        for (size_t k = 0; k < st.spectrum.size(); ++k) {
            const double d = st.spectrum[k] - se.spectrum[k];
            se2 += d * d;
        }
        rep.rmse_spectrum = std::sqrt(se2 / st.spectrum.size());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Jacobian series
// ---------------------------------------------------------------------------

namespace {

// spectral norm of a row-major dim x dim matrix by power iteration on A^T A
double spectral_norm(const std::vector<double>& A, int dim) {
    std::vector<double> v(dim, 1.0 / std::sqrt(static_cast<double>(dim))), w(dim), u(dim);
    double sigma = 0;
    for (int it = 0; it < 100; ++it) {
        for (int i = 0; i < dim; ++i) {
            double s = 0;
            for (int j = 0; j < dim; ++j) s += A[static_cast<size_t>(i) * dim + j] * v[j];
            w[i] = s;
        }
        double nw = 0;
        for (double x : w) nw += x * x;
        sigma = std::sqrt(nw);  // v stays normalized, so ||A v|| estimates the norm
        for (int j = 0; j < dim; ++j) {
            double s = 0;
            for (int i = 0; i < dim; ++i) s += A[static_cast<size_t>(i) * dim + j] * w[i];
            u[j] = s;
        }
        double nu = 0;
        for (double x : u) nu += x * x;
        nu = std::sqrt(nu);
        if (nu == 0) return sigma;
        for (int j = 0; j < dim; ++j) v[j] = u[j] / nu;
    }
    return sigma;
}

std::vector<double> mat_mul(const std::vector<double>& A, const std::vector<double>& B, int dim) {
    std::vector<double> C(static_cast<size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            const double a = A[static_cast<size_t>(i) * dim + k];
            for (int j = 0; j < dim; ++j)
                C[static_cast<size_t>(i) * dim + j] += a * B[static_cast<size_t>(k) * dim + j];
        }
    return C;
}

}  // namespace

JacobianSeries logistic_jacobian_series(const std::vector<double>& orbit, double r, int k, int t) {
    if (k < 0 || t <= k || t >= static_cast<int>(orbit.size()))
        throw std::invalid_argument("logistic_jacobian_series: need 0 <= k < t < orbit length");
    JacobianSeries js;
    js.dim = 1;
    double prod = 1.0;
    for (int i = k + 1; i <= t; ++i) {
        const double J = r * (1.0 - 2.0 * orbit[static_cast<size_t>(i - 1)]);
        js.jacobians.push_back({J});
        prod *= J;
        js.prefix_norms.push_back(std::abs(prod));
    }
    return js;
}

JacobianSeries jacobian_series_fd(const VecStepFn& step,
                                  const std::vector<std::vector<double>>& orbit, int k, int t,
                                  double fd_eps) {
    if (k < 0 || t <= k || t >= static_cast<int>(orbit.size()))
        throw std::invalid_argument("jacobian_series_fd: need 0 <= k < t < orbit length");
    const int dim = static_cast<int>(orbit[0].size());
    JacobianSeries js;
    js.dim = dim;
    std::vector<double> prod;
    for (int i = k + 1; i <= t; ++i) {
        const auto& x = orbit[static_cast<size_t>(i - 1)];
        std::vector<double> J(static_cast<size_t>(dim) * dim);
        for (int c = 0; c < dim; ++c) {
            auto xp = x, xm = x;
            xp[c] += fd_eps;
            xm[c] -= fd_eps;
            const auto fp = step(xp), fm = step(xm);
            for (int rw = 0; rw < dim; ++rw)
                J[static_cast<size_t>(rw) * dim + c] = (fp[rw] - fm[rw]) / (2 * fd_eps);
        }
        for (double v : J)
            if (!std::isfinite(v)) throw numeric_error("jacobian_series_fd: non-finite Jacobian");
        prod = prod.empty() ? J : mat_mul(J, prod, dim);
        js.prefix_norms.push_back(spectral_norm(prod, dim));
        js.jacobians.push_back(std::move(J));
    }
    return js;
}

// ---------------------------------------------------------------------------
// AR-model Jacobian probe (matrix-free)
// ---------------------------------------------------------------------------

namespace {

struct ArStepLin {
    const ARModel& model;
    const std::vector<Field2D>& rollout;
    const MeasurementWindow& stream;
    int64_t HW;

    Tensor context_at(int i, const std::vector<double>* last_override) const {
        const auto& mc = model.config();
        Tensor prev = Tensor::zeros({mc.context, 2, mc.grid_h, mc.grid_w});
        for (int f = 0; f < mc.context; ++f) {
            const auto& fld = rollout[static_cast<size_t>(i - mc.context + 1 + f)];
            std::copy(fld.u.begin(), fld.u.end(), prev.mutable_data().begin() + f * 2 * HW);
            std::copy(fld.v.begin(), fld.v.end(), prev.mutable_data().begin() + f * 2 * HW + HW);
        }
        if (last_override)
            std::copy(last_override->begin(), last_override->end(),
                      prev.mutable_data().begin() + (mc.context - 1) * 2 * HW);
        return prev;
    }

    std::vector<double> forward_state(int i, const std::vector<double>& last) const {
        const auto& mc = model.config();
        Tensor prev = context_at(i, &last);
        Tensor cond = encode(stream.slice(i + 1, i + 2), mc.grid_h, mc.grid_w);
        Tape tape(false);
        Tensor out = model.forward(tape, prev, cond);
        return std::vector<double>(out.data().begin(), out.data().end());
    }

    // directional derivative (J u) at recorded step i via central differences
    std::vector<double> jvp(int i, const std::vector<double>& u) const {
        const auto& fld = rollout[static_cast<size_t>(i)];
        std::vector<double> base(2 * HW);
        std::copy(fld.u.begin(), fld.u.end(), base.begin());
        std::copy(fld.v.begin(), fld.v.end(), base.begin() + HW);
        const double eps = 1e-5;
        auto xp = base, xm = base;
        for (size_t j = 0; j < base.size(); ++j) {
            xp[j] += eps * u[j];
            xm[j] -= eps * u[j];
        }
        const auto fp = forward_state(i, xp), fm = forward_state(i, xm);
        std::vector<double> out(base.size());
        for (size_t j = 0; j < out.size(); ++j) out[j] = (fp[j] - fm[j]) / (2 * eps);
        return out;
    }

    // J^T w at recorded step i via reverse-mode autodiff
    std::vector<double> vjp(int i, const std::vector<double>& w) const {
        const auto& mc = model.config();
        Tensor prev = context_at(i, nullptr);
        prev.set_requires_grad(true);
        Tensor cond = encode(stream.slice(i + 1, i + 2), mc.grid_h, mc.grid_w);
        Tensor wt = Tensor::from({1, 2, mc.grid_h, mc.grid_w},
                                 std::vector<double>(w.begin(), w.end()));
        Tape tape;
        Tensor out = model.forward(tape, prev, cond);
        Tensor inner = tape.sum(tape.mul(out, wt));
        prev.zero_grad();
        tape.backward(inner);
        const auto& g = prev.grad();
        // gradient w.r.t. the most recent context frame only
        return std::vector<double>(g.begin() + (mc.context - 1) * 2 * HW, g.end());
    }
};

}  // namespace

ArJacobianProbe ar_jacobian_probe(const ARModel& model, const std::vector<Field2D>& rollout,
                                  const MeasurementWindow& stream, int k, int t, int power_iters,
                                  uint64_t seed) {
    const auto& mc = model.config();
    if (k < mc.context - 1 || t <= k || t >= static_cast<int>(rollout.size()))
        throw std::invalid_argument("ar_jacobian_probe: need context-1 <= k < t < rollout length");
    const int64_t HW = static_cast<int64_t>(mc.grid_h) * mc.grid_w;
    ArStepLin lin{model, rollout, stream, HW};
    const size_t dim = static_cast<size_t>(2 * HW);

    Rng rng(derive_seed(seed, 0x1AC0B));
    auto normalize = [](std::vector<double>& v) {
        double n = 0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 0)
            for (double& x : v) x /= n;
        return n;
    };

    // JVP/FD vs VJP/autodiff consistency at the first step
    std::vector<double> u(dim), w(dim);
    for (auto& x : u) x = rng.normal();
    for (auto& x : w) x = rng.normal();
    normalize(u);
    normalize(w);
    const auto Ju = lin.jvp(k, u);
    const auto Jtw = lin.vjp(k, w);
    double wJu = 0, Jtwu = 0;
    for (size_t j = 0; j < dim; ++j) {
        wJu += w[j] * Ju[j];
        Jtwu += Jtw[j] * u[j];
    }
    ArJacobianProbe probe;
    probe.jvp_vjp_rel_err = std::abs(wJu - Jtwu) / std::max(1e-12, std::abs(wJu));

    // prefix spectral norms: power iteration on (P_m)^T (P_m)
    for (int m = k + 1; m <= t; ++m) {
        std::vector<double> v(dim);
        Rng r2(derive_seed(seed, 0x90F3, static_cast<uint64_t>(m)));
        for (auto& x : v) x = r2.normal();
        normalize(v);
        double sigma = 0;
        for (int it = 0; it < power_iters; ++it) {
            auto fwd = v;
            for (int i = k; i < m; ++i) fwd = lin.jvp(i, fwd);
            double nf = 0;
            for (double x : fwd) nf += x * x;
            sigma = std::sqrt(nf);
            auto bwd = fwd;
            for (int i = m - 1; i >= k; --i) bwd = lin.vjp(i, bwd);
            if (normalize(bwd) == 0) break;
            v = bwd;
        }
        probe.prefix_norms.push_back(sigma);
    }
    return probe;
}

double logistic_lyapunov(double r, int iters, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x17AD));
    double x = 0.1 + 0.8 * rng.uniform();
    for (int i = 0; i < 1000; ++i) x = logistic_step(x, r);
    double acc = 0;
    for (int i = 0; i < iters; ++i) {
        acc += std::log(std::abs(r * (1.0 - 2.0 * x)));
        x = logistic_step(x, r);
    }
    return acc / iters;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

std::vector<SweepPoint> window_sweep(const WindowModel& model, const Trajectory& truth,
                                     const ProbeSet& probes, const std::vector<int>& h_values,
                                     int n_seeds, int denoise_steps, uint64_t seed) {
    const auto& mc = model.config();
    if (h_values.empty() || n_seeds < 1)
        throw std::invalid_argument("window_sweep: h values and seeds must be non-empty");
    int h_max = 0;
    for (int h : h_values) {
        if (h < 1 || h > mc.history)
            throw std::invalid_argument("window_sweep: h=" + std::to_string(h) +
                                        " outside [1, model history]");
        h_max = std::max(h_max, h);
    }
    const int T = truth.frame_count();
    if (T < h_max + 1) throw std::invalid_argument("window_sweep: trajectory too short");

    MeasurementWindow stream = emit(truth, probes, 0, T);
    const int64_t HW = static_cast<int64_t>(truth.H) * truth.W;

    std::vector<SweepPoint> out;
    for (int h : h_values) {
        std::vector<double> seed_mse;
        for (int s = 0; s < n_seeds; ++s) {
            std::vector<double> errs(static_cast<size_t>(T - h_max + 1), 0.0);
            // frames [h_max-1, T-1]: every h is scored on the same frames
            parallel_for(T - h_max + 1, [&](int64_t idx) {
                const int t = h_max - 1 + static_cast<int>(idx);
                MeasurementWindow sub = stream.slice(t - h + 1, t + 1);
                const uint64_t wseed = derive_seed(seed, static_cast<uint64_t>(s),
                                                   static_cast<uint64_t>(t), 0x3377);
                auto window = fm_sample(model, sub, denoise_steps, wseed);
                const Field2D& est = window[static_cast<size_t>(mc.history - 1)];
                const auto& frame = truth.frames[static_cast<size_t>(t)];
                double acc = 0;
                for (int64_t i = 0; i < HW; ++i) {
                    const double du = frame[i] - est.u[i];
                    const double dv = frame[HW + i] - est.v[i];
                    acc += du * du + dv * dv;
                }
                errs[idx] = acc / (2.0 * HW);
            });
            double m = 0;
            for (double e : errs) m += e;
            seed_mse.push_back(m / errs.size());
        }
        SweepPoint pt;
        pt.h = h;
        for (double m : seed_mse) pt.mse_mean += m;
        pt.mse_mean /= n_seeds;
        double var = 0;
        for (double m : seed_mse) var += (m - pt.mse_mean) * (m - pt.mse_mean);
        pt.mse_std = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) : 0.0;
        out.push_back(pt);
    }
    return out;
}

DivergenceCurve logistic_counterexample(double eps, double r, int n_starts, int max_t,
                                        uint64_t seed) {
    if (eps < 0 || eps >= 0.05)
        throw std::invalid_argument("logistic_counterexample: eps must be in [0, 0.05)");
    DivergenceCurve dc;
    dc.eps = eps;
    dc.r = r;
    dc.lyapunov = logistic_lyapunov(r, 200000, seed);
    dc.predicted_divergence_time =
        eps > 0 ? std::log(0.1 / eps) / dc.lyapunov : std::numeric_limits<double>::infinity();
    dc.mean_abs_gap.assign(static_cast<size_t>(max_t), 0.0);

    Rng rng(derive_seed(seed, 0xD1BE));
    double time_acc = 0;
    int diverged = 0;
    for (int s = 0; s < n_starts; ++s) {
        double x = 0.05 + 0.9 * rng.uniform();
        for (int i = 0; i < 100; ++i) x = logistic_step(x, r);  // onto the attractor
        double xt = x, xb = x;
        int t_div = -1;
        for (int t = 0; t < max_t; ++t) {
            xt = logistic_step(xt, r);
            xb = r * xb * (1.0 - xb) + eps;  // the biased surrogate, measurements ignored
            const double gap = std::abs(xb - xt);
            dc.mean_abs_gap[static_cast<size_t>(t)] += gap / n_starts;
            if (t_div < 0 && gap > 0.1) t_div = t + 1;
        }
        if (t_div > 0) {
            time_acc += t_div;
            ++diverged;
        }
    }
    dc.measured_divergence_time =
        diverged == n_starts ? time_acc / n_starts : std::numeric_limits<double>::infinity();
    return dc;
}

}  // namespace paint
