#include "paint/dynsys.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace paint {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

std::string system_kind_name(SystemKind k) {
    switch (k) {
        case SystemKind::logistic: return "logistic";
        case SystemKind::lorenz: return "lorenz";
        case SystemKind::kolmogorov: return "kolmogorov";
    }
    return "?";
}

SystemKind system_kind_from_name(const std::string& name) {
    if (name == "logistic") return SystemKind::logistic;
    if (name == "lorenz") return SystemKind::lorenz;
    if (name == "kolmogorov") return SystemKind::kolmogorov;
    throw config_error("unknown system '" + name + "' (logistic|lorenz|kolmogorov)");
}

double SystemParams::conditioning_param() const {
    switch (kind) {
        case SystemKind::logistic: return r;
        case SystemKind::lorenz: return rho;
        case SystemKind::kolmogorov: return amp;
    }
    return 0;
}

void SystemParams::set_conditioning_param(double value) {
    switch (kind) {
        case SystemKind::logistic: r = value; break;
        case SystemKind::lorenz: rho = value; break;
        case SystemKind::kolmogorov: amp = value; break;
    }
}

void SystemParams::validate() const {
    switch (kind) {
        case SystemKind::logistic:
            if (r <= 0 || r > 4) throw config_error("logistic: r must be in (0,4]");
            break;
        case SystemKind::lorenz:
            if (dt_solver > 1e-2 || dt_solver <= 0)
                throw config_error("lorenz: dt_solver must be in (0, 1e-2]");
            if (sigma <= 0 || beta_l <= 0) throw config_error("lorenz: sigma, beta must be positive");
            break;
        case SystemKind::kolmogorov:
            if (!is_pow2(H) || !is_pow2(W))
                throw config_error("kolmogorov: grid must be a power of two, got " +
                                   std::to_string(H) + "x" + std::to_string(W));
            if (nu <= 0) throw config_error("kolmogorov: nu must be positive");
            if (amp <= 0) throw config_error("kolmogorov: forcing amplitude must be positive");
            if (k_f < 1 || k_f > std::min(H, W) / 3)
                throw config_error("kolmogorov: forcing wavenumber " + std::to_string(k_f) +
                                   " outside the dealiased band for " + std::to_string(H) + "x" +
                                   std::to_string(W));
            if (dt_solver <= 0) throw config_error("kolmogorov: dt_solver must be positive");
            break;
    }
}

Field2D Trajectory::field(int t) const {
    if (t < 0 || t >= frame_count())
        throw std::invalid_argument("Trajectory::field: frame " + std::to_string(t) +
                                    " out of range [0," + std::to_string(frame_count()) + ")");
    Field2D f(H, W);
    const auto& fr = frames[static_cast<size_t>(t)];
    std::copy(fr.begin(), fr.begin() + H * W, f.u.begin());
    std::copy(fr.begin() + H * W, fr.end(), f.v.begin());
    return f;
}

void Trajectory::push_field(const Field2D& f) {
    std::vector<double> fr(frame_len());
    std::copy(f.u.begin(), f.u.end(), fr.begin());
    std::copy(f.v.begin(), f.v.end(), fr.begin() + H * W);
    frames.push_back(std::move(fr));
}

// ---------------------------------------------------------------------------
// FFT
// ---------------------------------------------------------------------------

namespace {

// In-place radix-2 DIT along a strided line.
void fft_line(std::complex<double>* a, int n, int64_t stride, bool inverse) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i * stride], a[j * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 1.0 : -1.0) * kTwoPi / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                std::complex<double> x = a[(i + j) * stride];
                std::complex<double> y = a[(i + j + len / 2) * stride] * w;
                a[(i + j) * stride] = x + y;
                a[(i + j + len / 2) * stride] = x - y;
                w *= wl;
            }
        }
    }
}

void fft2_impl(std::vector<std::complex<double>>& a, int H, int W, bool inverse) {
    if (!is_pow2(H) || !is_pow2(W))
        throw std::invalid_argument("fft2: grid must be a power of two, got " + std::to_string(H) +
                                    "x" + std::to_string(W));
    if (a.size() != static_cast<size_t>(H) * W)
        throw std::invalid_argument("fft2: buffer size does not match grid");
    for (int y = 0; y < H; ++y) fft_line(a.data() + static_cast<int64_t>(y) * W, W, 1, inverse);
    for (int x = 0; x < W; ++x) fft_line(a.data() + x, H, W, inverse);
    if (inverse) {
        const double s = 1.0 / (static_cast<double>(H) * W);
        for (auto& z : a) z *= s;
    }
}

}  // namespace

void fft2(std::vector<std::complex<double>>& a, int H, int W) { fft2_impl(a, H, W, false); }
void ifft2(std::vector<std::complex<double>>& a, int H, int W) { fft2_impl(a, H, W, true); }

double max_spectral_divergence(const Field2D& f) {
    const int H = f.H, W = f.W;
    std::vector<std::complex<double>> uh(f.u.size()), vh(f.v.size());
    for (size_t i = 0; i < f.u.size(); ++i) {
        uh[i] = f.u[i];
        vh[i] = f.v[i];
    }
    fft2(uh, H, W);
    fft2(vh, H, W);
    const double scale = 1.0 / (static_cast<double>(H) * W);
    double worst = 0.0;
    for (int y = 0; y < H; ++y) {
        const double ky = wavenumber(y, H);
        for (int x = 0; x < W; ++x) {
            const double kx = wavenumber(x, W);
            const auto div = kx * uh[static_cast<size_t>(y) * W + x] +
                             ky * vh[static_cast<size_t>(y) * W + x];
            worst = std::max(worst, std::abs(div) * scale);
        }
    }
    return worst;
}

double kinetic_energy(const Field2D& f) {
    double e = 0;
    for (size_t i = 0; i < f.u.size(); ++i) e += 0.5 * (f.u[i] * f.u[i] + f.v[i] * f.v[i]);
    return e / static_cast<double>(f.u.size());
}

// ---------------------------------------------------------------------------
// Steppers
// ---------------------------------------------------------------------------

double logistic_step(double x, double r) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("logistic_step: x=" + std::to_string(x) + " outside [0,1]");
    if (!(r > 0.0 && r <= 4.0))
        throw std::invalid_argument("logistic_step: r=" + std::to_string(r) + " outside (0,4]");
    return r * x * (1.0 - x);
}

namespace {
std::array<double, 3> lorenz_rhs(const std::array<double, 3>& s, double sigma, double rho,
                                 double beta) {
    return {sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2]};
}
}  // namespace

std::array<double, 3> lorenz_step(const std::array<double, 3>& state, double dt, double sigma,
                                  double rho, double beta) {
    if (dt > 1e-2 || dt <= 0)
        throw std::invalid_argument("lorenz_step: dt must be in (0, 1e-2]");
    for (double c : state)
        if (!std::isfinite(c)) throw numeric_error("lorenz_step: non-finite state");
    auto k1 = lorenz_rhs(state, sigma, rho, beta);
    std::array<double, 3> s2, s3, s4;
    for (int i = 0; i < 3; ++i) s2[i] = state[i] + 0.5 * dt * k1[i];
    auto k2 = lorenz_rhs(s2, sigma, rho, beta);
    for (int i = 0; i < 3; ++i) s3[i] = state[i] + 0.5 * dt * k2[i];
    auto k3 = lorenz_rhs(s3, sigma, rho, beta);
    for (int i = 0; i < 3; ++i) s4[i] = state[i] + dt * k3[i];
    auto k4 = lorenz_rhs(s4, sigma, rho, beta);
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i)
        out[i] = state[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov flow
// ---------------------------------------------------------------------------

namespace {

using CVec = std::vector<std::complex<double>>;

struct Spectral {
    int H, W;
    std::vector<double> kx, ky;  // signed wavenumbers per column / row
    std::vector<double> k2;      // kx^2 + ky^2 per mode
    std::vector<char> dealias;   // 1 inside the 2/3 band
    CVec forcing;                // curl of A sin(k_f y) x_hat, spectral

    explicit Spectral(const SystemParams& p) : H(p.H), W(p.W) {
        kx.resize(W);
        ky.resize(H);
        for (int x = 0; x < W; ++x) kx[x] = wavenumber(x, W);
        for (int y = 0; y < H; ++y) ky[y] = wavenumber(y, H);
        k2.resize(static_cast<size_t>(H) * W);
        dealias.resize(k2.size());
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const size_t i = static_cast<size_t>(y) * W + x;
                k2[i] = kx[x] * kx[x] + ky[y] * ky[y];
                dealias[i] = (std::abs(kx[x]) <= W / 3.0 && std::abs(ky[y]) <= H / 3.0) ? 1 : 0;
            }
        // forcing curl in physical space, then transform once
        forcing.assign(k2.size(), 0.0);
        for (int y = 0; y < H; ++y) {
            const double fy = -p.amp * p.k_f * std::cos(p.k_f * kTwoPi * y / H);
            for (int x = 0; x < W; ++x) forcing[static_cast<size_t>(y) * W + x] = fy;
        }
        fft2(forcing, H, W);
        for (size_t i = 0; i < forcing.size(); ++i)
            if (!dealias[i]) forcing[i] = 0.0;
    }

    // velocity from vorticity via the streamfunction
    void velocity(const CVec& wh, CVec& uh, CVec& vh) const {
        uh.resize(wh.size());
        vh.resize(wh.size());
        const std::complex<double> im(0.0, 1.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const size_t i = static_cast<size_t>(y) * W + x;
                if (k2[i] == 0.0) {
                    uh[i] = vh[i] = 0.0;
                    continue;
                }
                const auto psi = wh[i] / k2[i];
                uh[i] = im * ky[y] * psi;
                vh[i] = -im * kx[x] * psi;
            }
    }

    // N(w) = -dealias(u . grad w) + forcing
    void nonlinear(const CVec& wh, CVec& out) const {
        const size_t n = wh.size();
        CVec uh, vh, wx(n), wy(n);
        velocity(wh, uh, vh);
        const std::complex<double> im(0.0, 1.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const size_t i = static_cast<size_t>(y) * W + x;
                const char d = dealias[i];
                wx[i] = d ? im * kx[x] * wh[i] : 0.0;
                wy[i] = d ? im * ky[y] * wh[i] : 0.0;
                if (!d) {
                    uh[i] = 0.0;
                    vh[i] = 0.0;
                }
            }
        ifft2(uh, H, W);
        ifft2(vh, H, W);
        ifft2(wx, H, W);
        ifft2(wy, H, W);
        out.resize(n);
        for (size_t i = 0; i < n; ++i)
            out[i] = uh[i].real() * wx[i].real() + vh[i].real() * wy[i].real();
        fft2(out, H, W);
        for (size_t i = 0; i < n; ++i) out[i] = dealias[i] ? -out[i] + forcing[i] : 0.0;
    }
};

}  // namespace

Field2D kolmogorov_step(const Field2D& state, double dt_solver, const SystemParams& p) {
    const int H = state.H, W = state.W;
    if (H != p.H || W != p.W)
        throw std::invalid_argument("kolmogorov_step: field grid does not match params");
    p.validate();

    double max_speed = 0.0;
    for (size_t i = 0; i < state.u.size(); ++i) {
        if (!std::isfinite(state.u[i]) || !std::isfinite(state.v[i]))
            throw numeric_error("kolmogorov_step: non-finite input state");
        max_speed =
            std::max(max_speed, std::sqrt(state.u[i] * state.u[i] + state.v[i] * state.v[i]));
    }
    const double dx = kTwoPi / std::max(H, W);
    const double cfl = max_speed * dt_solver / dx;
    if (cfl > 0.5)
        throw numeric_error("kolmogorov_step: CFL " + std::to_string(cfl) + " exceeds 0.5");

    const Spectral sp(p);
    const size_t n = state.u.size();

    // vorticity w = dv/dx - du/dy
    CVec uh(n), vh(n), wh(n);
    for (size_t i = 0; i < n; ++i) {
        uh[i] = state.u[i];
        vh[i] = state.v[i];
    }
    fft2(uh, H, W);
    fft2(vh, H, W);
    const std::complex<double> im(0.0, 1.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const size_t i = static_cast<size_t>(y) * W + x;
            wh[i] = im * sp.kx[x] * vh[i] - im * sp.ky[y] * uh[i];
            if (!sp.dealias[i]) wh[i] = 0.0;
        }

    // integrating-factor RK4: dw/dt = L w + N(w), L = -nu k^2 handled exactly
    std::vector<double> E(n), E2(n);
    for (size_t i = 0; i < n; ++i) {
        E[i] = std::exp(-p.nu * sp.k2[i] * dt_solver * 0.5);
        E2[i] = E[i] * E[i];
    }
    const double dt = dt_solver;
    CVec a, b, c, d, tmp(n);

    sp.nonlinear(wh, a);
    for (size_t i = 0; i < n; ++i) tmp[i] = E[i] * (wh[i] + 0.5 * dt * a[i]);
    sp.nonlinear(tmp, b);
    for (size_t i = 0; i < n; ++i) tmp[i] = E[i] * wh[i] + 0.5 * dt * b[i];
    sp.nonlinear(tmp, c);
    for (size_t i = 0; i < n; ++i) tmp[i] = E2[i] * wh[i] + dt * E[i] * c[i];
    sp.nonlinear(tmp, d);
    for (size_t i = 0; i < n; ++i)
        wh[i] = E2[i] * wh[i] + dt / 6.0 * (E2[i] * a[i] + 2.0 * E[i] * (b[i] + c[i]) + d[i]);

    // back to a divergence-free velocity
    sp.velocity(wh, uh, vh);
    ifft2(uh, H, W);
    ifft2(vh, H, W);
    Field2D out(H, W);
    for (size_t i = 0; i < n; ++i) {
        out.u[i] = uh[i].real();
        out.v[i] = vh[i].real();
        if (!std::isfinite(out.u[i]) || !std::isfinite(out.v[i]))
            throw numeric_error("kolmogorov_step: non-finite output (unstable step?)");
    }
    return out;
}

Field2D kolmogorov_initial_condition(const SystemParams& p) {
    // band-limited random vorticity, rescaled to unit rms velocity
    Rng rng(derive_seed(p.seed, 0xC0FFEE));
    const int H = p.H, W = p.W;
    CVec wh(static_cast<size_t>(H) * W);
    std::vector<double> noise(wh.size());
    for (auto& x : noise) x = rng.normal();
    for (size_t i = 0; i < wh.size(); ++i) wh[i] = noise[i];
    fft2(wh, H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const size_t i = static_cast<size_t>(y) * W + x;
            const double k = std::sqrt(static_cast<double>(wavenumber(x, W) * wavenumber(x, W) +
                                                           wavenumber(y, H) * wavenumber(y, H)));
            wh[i] *= (k >= 1.0 && k <= 5.0) ? 1.0 / k : 0.0;
        }
    Spectral sp(p);
    CVec uh, vh;
    sp.velocity(wh, uh, vh);
    ifft2(uh, H, W);
    ifft2(vh, H, W);
    Field2D f(H, W);
    for (size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = uh[i].real();
        f.v[i] = vh[i].real();
    }
    const double rms = std::sqrt(2.0 * kinetic_energy(f));
    if (rms > 0)
        for (size_t i = 0; i < f.u.size(); ++i) {
            f.u[i] /= rms;
            f.v[i] /= rms;
        }
    return f;
}

Trajectory simulate(const SystemParams& params, int n_frames, int burn_in, int stride) {
    if (n_frames < 1) throw std::invalid_argument("simulate: n_frames must be >= 1");
    if (burn_in < 0 || stride < 1)
        throw std::invalid_argument("simulate: burn_in >= 0 and stride >= 1 required");
    params.validate();

    Trajectory traj;
    traj.params = params;
    traj.dt = stride * params.dt_solver;

    switch (params.kind) {
        case SystemKind::logistic: {
            traj.H = traj.W = 1;
            Rng rng(derive_seed(params.seed, 1));
            double x = 0.05 + 0.9 * rng.uniform();
            for (int i = 0; i < burn_in; ++i) x = logistic_step(x, params.r);
            for (int f = 0; f < n_frames; ++f) {
                traj.frames.push_back({x, 0.0});
                if (f + 1 < n_frames)
                    for (int s = 0; s < stride; ++s) x = logistic_step(x, params.r);
            }
            traj.dt = stride;  // map time is discrete
            break;
        }
        case SystemKind::lorenz: {
            traj.H = 3;
            traj.W = 1;
            Rng rng(derive_seed(params.seed, 2));
            std::array<double, 3> s = {rng.normal(1.0, 2.0), rng.normal(1.0, 2.0),
                                       rng.normal(20.0, 5.0)};
            for (int i = 0; i < burn_in; ++i)
                s = lorenz_step(s, params.dt_solver, params.sigma, params.rho, params.beta_l);
            for (int f = 0; f < n_frames; ++f) {
                traj.frames.push_back({s[0], s[1], s[2], 0.0, 0.0, 0.0});
                if (f + 1 < n_frames)
                    for (int k = 0; k < stride; ++k)
                        s = lorenz_step(s, params.dt_solver, params.sigma, params.rho,
                                        params.beta_l);
            }
            break;
        }
        case SystemKind::kolmogorov: {
            traj.H = params.H;
            traj.W = params.W;
            Field2D f = kolmogorov_initial_condition(params);
            for (int i = 0; i < burn_in; ++i) f = kolmogorov_step(f, params.dt_solver, params);
            for (int fr = 0; fr < n_frames; ++fr) {
                traj.push_field(f);
                if (fr + 1 < n_frames)
                    for (int s = 0; s < stride; ++s)
                        f = kolmogorov_step(f, params.dt_solver, params);
            }
            // normalize by the time-mean rms velocity (the forcing-scale speed)
            double mean_rms = 0;
            for (int fr = 0; fr < traj.frame_count(); ++fr)
                mean_rms += std::sqrt(2.0 * kinetic_energy(traj.field(fr)));
            mean_rms /= traj.frame_count();
            if (mean_rms > 1e-12) {
                traj.norm_scale = mean_rms;
                for (auto& frame : traj.frames)
                    for (double& x : frame) x /= mean_rms;
            }
            break;
        }
    }
    return traj;
}

}  // namespace paint
