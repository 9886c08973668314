#pragma once

#include <functional>

#include "paint/generative.hpp"

namespace paint {

enum class TwinMode { sequence, sliding_single };

TwinMode twin_mode_from_name(const std::string& name);

/// Test-time reconstruction settings. history/forecast come from the model;
/// n_seeds > 1 enables ensemble statistics.
struct TwinConfig {
    TwinMode mode = TwinMode::sliding_single;
    int n_seeds = 10;
    int denoise_steps = 20;
    uint64_t seed = 0;
};

/// Reconstructed frames plus the absolute index of the first one.
struct Reconstruction {
    int t_first = 0;
    std::vector<Field2D> frames;
};

/// Sliding-window state estimation from a measurement stream. No estimate
/// ever feeds back as an input: each window is sampled from (measurements,
/// seed) alone, with the per-window seed derived from the absolute frame
/// index (so estimates are unchanged by measurements outside the window,
/// bit-exact at a fixed seed).
///
///   sliding_single: one estimate per frame t in [h-1, T-1], each from the
///                   window [t-h+1, t]; output length T-h+1.
///   sequence:       disjoint windows tiling from the stream start, each
///                   contributing its h measured-range frames; the final
///                   window also appends its n forecast frames. Trailing
///                   frames that do not fill a window are skipped.
Reconstruction reconstruct(const WindowModel& model, const MeasurementWindow& stream,
                           const TwinConfig& cfg);

/// Per-pixel mean and standard deviation over n_seeds reconstructions.
/// With n_seeds == 1 the std is identically zero.
struct EnsembleEstimate {
    int t_first = 0;
    std::vector<Field2D> mean;
    std::vector<Field2D> stddev;
    std::vector<Reconstruction> members;  // retained when keep_members
};

EnsembleEstimate ensemble(const WindowModel& model, const MeasurementWindow& stream,
                          const TwinConfig& cfg, bool keep_members = false);

/// Step closure for rollouts: maps (context frames, next-frame measurements)
/// to the next state estimate.
using NextFrameFn =
    std::function<Field2D(const std::vector<Field2D>&, const MeasurementWindow&)>;

/// Autoregressive rollout: T steps, each conditioned on the model's own
/// previous outputs and the true measurements of the target frame. Returns
/// the initial context followed by the T predictions. The stream's frame 0
/// aligns with the first context frame.
std::vector<Field2D> ar_rollout(const NextFrameFn& step, int context,
                                std::vector<Field2D> initial_context,
                                const MeasurementWindow& stream, int T);

std::vector<Field2D> ar_rollout(const ARModel& model, std::vector<Field2D> initial_context,
                                const MeasurementWindow& stream, int T);

/// Package reconstructed frames as a trajectory (for TrajectoryFile output).
Trajectory frames_to_trajectory(const std::vector<Field2D>& frames, const Trajectory& like);

}  // namespace paint
