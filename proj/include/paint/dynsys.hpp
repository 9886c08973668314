#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "paint/common.hpp"

namespace paint {

/// Two-component velocity field on a regular H x W grid (row-major, y is the
/// row index). Domain is the [0, 2pi)^2 torus; H and W are powers of two.
struct Field2D {
    int H = 0, W = 0;
    std::vector<double> u, v;

    Field2D() = default;
    Field2D(int H, int W) : H(H), W(W), u(static_cast<size_t>(H) * W, 0.0), v(u) {}
    double& at_u(int y, int x) { return u[static_cast<size_t>(y) * W + x]; }
    double& at_v(int y, int x) { return v[static_cast<size_t>(y) * W + x]; }
    double at_u(int y, int x) const { return u[static_cast<size_t>(y) * W + x]; }
    double at_v(int y, int x) const { return v[static_cast<size_t>(y) * W + x]; }
};

enum class SystemKind { logistic, lorenz, kolmogorov };

std::string system_kind_name(SystemKind k);
SystemKind system_kind_from_name(const std::string& name);

/// Parameters of a ground-truth system. For the flow system the forcing
/// amplitude is the trajectory-conditioning parameter (the dataset axis).
struct SystemParams {
    SystemKind kind = SystemKind::kolmogorov;

    // logistic
    double r = 3.8;
    // lorenz
    double sigma = 10.0, rho = 28.0, beta_l = 8.0 / 3.0;
    // kolmogorov
    double nu = 0.02;
    int k_f = 4;
    double amp = 1.0;

    double dt_solver = 5e-3;
    int H = 32, W = 32;
    uint64_t seed = 0;

    /// The conditioning parameter for dataset splits (amp / rho / r).
    double conditioning_param() const;
    void set_conditioning_param(double value);

    void validate() const;  // throws config_error outside stable ranges
};

/// Ordered frames with constant spacing dt (in solver time units). Flow
/// frames hold u then v planes; d-dimensional ODE/map states are stored in
/// the u plane of an H=d, W=1 frame with the v plane zero.
struct Trajectory {
    SystemParams params;
    double dt = 0.0;
    int H = 1, W = 1;
    double norm_scale = 1.0;  // stored velocities were divided by this
    std::vector<std::vector<double>> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int64_t frame_len() const { return 2LL * H * W; }
    Field2D field(int t) const;
    void push_field(const Field2D& f);
};

// ---------------------------------------------------------------------------
// FFT (radix-2, power-of-two sizes). Forward is unnormalized; inverse scales
// by 1/(H*W), so ifft2(fft2(x)) == x and Parseval reads
// sum|x|^2 == (1/HW) sum|X|^2.
// ---------------------------------------------------------------------------

void fft2(std::vector<std::complex<double>>& a, int H, int W);
void ifft2(std::vector<std::complex<double>>& a, int H, int W);

/// Signed integer wavenumber for index j of an N-point transform.
inline int wavenumber(int j, int N) { return j <= N / 2 ? j : j - N; }

/// Largest spectral divergence magnitude |i kx u_hat + i ky v_hat| / (HW)
/// over all modes.
double max_spectral_divergence(const Field2D& f);

/// Spatial-mean kinetic energy (1/HW) sum 0.5 (u^2 + v^2).
double kinetic_energy(const Field2D& f);

// ---------------------------------------------------------------------------
// Steppers
// ---------------------------------------------------------------------------

/// One logistic-map iterate r*x*(1-x). Requires 0 <= x <= 1 and 0 < r <= 4.
double logistic_step(double x, double r);

/// One RK4 step of the Lorenz-63 vector field. Requires dt <= 1e-2.
std::array<double, 3> lorenz_step(const std::array<double, 3>& state, double dt,
                                  double sigma, double rho, double beta);

/// One step of the Kolmogorov-forced 2D incompressible flow: vorticity-form
/// pseudo-spectral scheme with 2/3-rule dealiasing, integrating-factor exact
/// viscosity, RK4 in time. The returned velocity derives from a streamfunction
/// and is spectrally divergence-free regardless of the input. Enforces
/// CFL = max|u| dt / dx <= 0.5.
Field2D kolmogorov_step(const Field2D& state, double dt_solver, const SystemParams& p);

/// Integrate from a seeded random initial condition, discard burn_in solver
/// steps, store every stride-th step. Flow frames are normalized by the
/// time-mean rms velocity (stored in norm_scale). Deterministic per seed.
Trajectory simulate(const SystemParams& params, int n_frames, int burn_in, int stride);

/// The seeded initial condition used by simulate (exposed for experiments).
Field2D kolmogorov_initial_condition(const SystemParams& p);

}  // namespace paint
