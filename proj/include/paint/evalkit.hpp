#pragma once

#include "paint/twin.hpp"

namespace paint {

/// Time-statistics of a flow sequence: per-pixel mean and variance over
/// time, and the mean kinetic energy spectrum E(k) binned into integer
/// wavenumber shells (|k| rounded to nearest). The binning satisfies
/// sum_k E(k) == spatial-mean kinetic energy averaged over frames.
struct FlowStats {
    Field2D time_mean;
    Field2D time_variance;
    std::vector<double> spectrum;  // E(k), shell index k
};

FlowStats flow_stats(const std::vector<Field2D>& frames);
FlowStats flow_stats(const Trajectory& traj);

/// Mean kinetic energy spectrum of a single field (no time averaging).
std::vector<double> energy_spectrum(const Field2D& f);

/// Reconstruction-vs-truth report: per-frame MSE and its least-squares
/// slope, plus the summary metrics. RMSE of the spectrum is taken over k
/// shells of the time-mean spectra.
struct DriftReport {
    std::vector<double> mse_t;
    double slope = 0;
    double mae_time_mean = 0;     // MAE of the time-mean field
    double mae_time_variance = 0; // MAE of the per-pixel time variance
    double mse_trajectory = 0;    // MSE of the whole sequence
    double rmse_spectrum = 0;     // RMSE over shells of time-mean E(k)
};

DriftReport drift_report(const std::vector<Field2D>& truth, const std::vector<Field2D>& est);

/// Ordinary least-squares slope of y against its index.
double ols_slope(const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Jacobian product series
// ---------------------------------------------------------------------------

/// Jacobians J_i of a step map along a recorded orbit, for i in [k+1, t],
/// with the spectral norm of each prefix product J_i ... J_{k+1}.
struct JacobianSeries {
    int dim = 0;
    std::vector<std::vector<double>> jacobians;  // row-major dim x dim
    std::vector<double> prefix_norms;
};

/// Analytic series for the logistic map: J(x) = r (1 - 2x).
JacobianSeries logistic_jacobian_series(const std::vector<double>& orbit, double r, int k, int t);

/// Finite-difference series for a small-dimension step map (e.g. one RK4
/// Lorenz step): central differences, step fd_eps.
using VecStepFn = std::function<std::vector<double>(const std::vector<double>&)>;
JacobianSeries jacobian_series_fd(const VecStepFn& step,
                                  const std::vector<std::vector<double>>& orbit, int k, int t,
                                  double fd_eps = 1e-6);

/// Matrix-free probe of the AR model's Jacobian product over a recorded
/// rollout: prefix spectral norms via power iteration (forward sweeps use
/// finite-difference JVPs, backward sweeps reverse-mode VJPs), differentiating
/// each step w.r.t. its most recent input frame with older context frozen at
/// the recorded values. jvp_vjp_rel_err reports |<w,Ju> - <J^T w,u>| /
/// |<w,Ju>| at the first step, an autodiff-vs-finite-difference consistency
/// figure.
struct ArJacobianProbe {
    std::vector<double> prefix_norms;
    double jvp_vjp_rel_err = 0;
};

ArJacobianProbe ar_jacobian_probe(const ARModel& model, const std::vector<Field2D>& rollout,
                                  const MeasurementWindow& stream, int k, int t,
                                  int power_iters = 8, uint64_t seed = 0);

/// Long-run Lyapunov estimate of the logistic map (time average of
/// log |r (1 - 2 x_t)| after a transient).
double logistic_lyapunov(double r, int iters = 100000, uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Theory-validation experiments
// ---------------------------------------------------------------------------

/// Reconstruction error as a function of the measurement window length, all
/// h values scored on the same frames (those estimable at the largest h).
struct SweepPoint {
    int h = 0;
    double mse_mean = 0;
    double mse_std = 0;  // over seeds
};

std::vector<SweepPoint> window_sweep(const WindowModel& model, const Trajectory& truth,
                                     const ProbeSet& probes, const std::vector<int>& h_values,
                                     int n_seeds, int denoise_steps, uint64_t seed);

/// Biased logistic map rolled against the true map from identical starts:
/// the mean first time |x_hat - x| exceeds 0.1, against the Lyapunov
/// prediction log(0.1/eps) / lambda. Divergence never happening within
/// max_t reports infinity.
struct DivergenceCurve {
    double eps = 0, r = 0;
    double lyapunov = 0;
    double measured_divergence_time = 0;
    double predicted_divergence_time = 0;
    std::vector<double> mean_abs_gap;  // per timestep, averaged over starts
};

DivergenceCurve logistic_counterexample(double eps, double r = 3.8, int n_starts = 200,
                                        int max_t = 2000, uint64_t seed = 0);

}  // namespace paint
