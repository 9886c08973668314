#pragma once

#include <filesystem>
#include <optional>

#include "paint/dataio.hpp"
#include "paint/nn.hpp"

namespace paint {

/// Network and window geometry shared by both models.
struct ModelConfig {
    int grid_h = 32, grid_w = 32;
    int patch = 4;
    int dim = 64;
    int layers = 4;  // window model: alternating spatial/temporal blocks
    int heads = 2;
    int mlp_ratio = 4;
    int history = 8;   // measured frames per window (includes the current frame)
    int forecast = 4;  // unmeasured future frames per window
    int context = 2;   // AR model: ground-truth frames fed per step

    int window_frames() const { return history + forecast; }
    int tokens_per_frame() const { return (grid_h / patch) * (grid_w / patch); }
    void validate() const;
};

/// Common interface for the Euler sampler: predicts the interpolant velocity
/// at flow time tau given the state window and conditioning channels.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;
    virtual Tensor velocity(Tape& tape, const Tensor& x, const Tensor& cond, double tau) const = 0;
};

/// Generative window model: linear patch embedding, alternating
/// spatial/temporal attention blocks with flow-time conditioning, linear
/// patch de-embedding. Maps a (T,2,H,W) window plus (T,3,H,W) mask/value
/// channels to the (T,2,H,W) interpolant velocity.
class WindowModel : public VelocityModel {
public:
    WindowModel(const ModelConfig& cfg, uint64_t seed);

    Tensor forward(Tape& tape, const Tensor& x_tau, const Tensor& cond, double tau) const;
    Tensor velocity(Tape& tape, const Tensor& x, const Tensor& cond, double tau) const override {
        return forward(tape, x, cond, tau);
    }

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    int64_t parameter_count() const { return params_.scalar_count(); }

    void save(const std::filesystem::path& path) const;
    static WindowModel load(const std::filesystem::path& path);

private:
    ModelConfig cfg_;
    ParamStore params_;
    Linear embed_, tau_fc1_, tau_fc2_, head_;
    LayerNormParams final_ln_;
    Tensor pos_spatial_, pos_temporal_;
    std::vector<AttentionBlock> blocks_;
    void build(uint64_t seed);
};

/// Autoregressive baseline: predicts the next frame from `context`
/// ground-truth (or rolled-out) frames plus the next frame's mask/value
/// channels, using the same patch-attention family with spatial blocks only.
/// Sized to match the window model's parameter count.
class ARModel {
public:
    ARModel(const ModelConfig& cfg, uint64_t seed);

    /// prev: (context,2,H,W), cond: (1,3,H,W) for the target frame.
    Tensor forward(Tape& tape, const Tensor& prev, const Tensor& cond) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    int64_t parameter_count() const { return params_.scalar_count(); }

    void save(const std::filesystem::path& path) const;
    static ARModel load(const std::filesystem::path& path);

private:
    ModelConfig cfg_;
    ParamStore params_;
    Linear embed_, head_;
    LayerNormParams final_ln_;
    Tensor pos_spatial_;
    std::vector<AttentionBlock> blocks_;
    void build(uint64_t seed);
};

/// Per-pixel loss weights w = 1 + alpha * exp(-d^2 / (2 sigma^2)) with d the
/// Euclidean distance to the nearest probe. w >= 1, maximal at probe pixels.
struct SpatialWeightMap {
    int H = 0, W = 0;
    double alpha = 9.0, sigma = 2.0;
    std::vector<double> w;

    static SpatialWeightMap make(const ProbeSet& probes, int H, int W, double alpha = 9.0,
                                 double sigma = 2.0);
    Tensor tensor() const { return Tensor::from({H, W}, w); }
};

/// Data-coupled interpolant source x0: probe pixels of the measured frames
/// hold the measured values; all other pixels and all forecast frames hold
/// unit Gaussian noise. `history` counts the leading measured frames.
Tensor coupled_source(const MeasurementWindow& meas, int window_frames, int history, int grid_h,
                      int grid_w, uint64_t noise_seed);

/// Conditioning channels for a window: mask/value encoding over the measured
/// frames, zeros over the forecast frames.
Tensor window_conditioning(const MeasurementWindow& meas, int window_frames, int history,
                           int grid_h, int grid_w);

/// Flow-matching regression loss at flow time tau: builds
/// x_tau = (1-tau) x0 + tau x1 along the linear path and returns the
/// spatially weighted MSE between the predicted velocity and (x1 - x0).
Tensor fm_loss(Tape& tape, const WindowModel& model, const WindowSample& sample, double tau,
               uint64_t noise_seed, const SpatialWeightMap& weights);

/// Euler integration of dx/dtau = v(x, tau) from tau=0 to 1 in `steps` steps.
/// Throws numeric_error naming the failing step on non-finite intermediates.
Tensor euler_sample(const VelocityModel& model, Tensor x0, const Tensor& cond, int steps);

/// Draw one state window from measurements: data-coupled source at tau=0,
/// 20-step Euler by default. Deterministic per seed.
std::vector<Field2D> fm_sample(const WindowModel& model, const MeasurementWindow& measurements,
                               int steps, uint64_t seed);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int steps = 20000;
    int batch = 16;
    double lr_start = 5e-7, lr_peak = 1e-4, lr_end = 1e-5;
    double warmup_frac = 0.1;  // of total steps
    double weight_decay = 0.05;
    double loss_alpha = 9.0;  // spatial weight bump (probe pixels weigh 1+alpha)
    double loss_sigma = 2.0;  // bump radius in pixels
    int train_probes = 25;    // fresh random probes per element per step
    bool window_dropout = true;
    uint64_t seed = 0;
    int checkpoint_every = 2000;
    std::filesystem::path checkpoint_path;
    std::filesystem::path loss_csv_path;
    int resume_step = 0;  // continue a run from a loaded checkpoint
};

struct TrainStats {
    int steps_run = 0;
    double final_loss = 0;
};

/// Flow-matching training: per step, a fresh batch of window samples with
/// fresh random probes, tau ~ U[0,1] per element, AdamW with warmup+cosine.
/// Loss log rows are "step,lr,loss". Aborts with the step number on a
/// non-finite loss. Deterministic per (config, seed); resuming from a
/// checkpoint reproduces the uninterrupted run bit-exactly.
TrainStats train_paint(const DatasetManifest& data, WindowModel& model, AdamW& opt,
                       const TrainConfig& cfg);

/// Teacher-forced next-frame regression for the AR baseline (plain MSE).
TrainStats train_ar(const DatasetManifest& data, ARModel& model, AdamW& opt,
                    const TrainConfig& cfg);

/// Optimizer + live model checkpoint (params, optimizer moments, step).
void save_training_state(const std::filesystem::path& path, const ParamStore& model_params,
                         const AdamW& opt, int step, const ModelConfig& cfg, int model_kind);
int load_training_state(const std::filesystem::path& path, ParamStore& model_params, AdamW& opt);

/// Load every trajectory of a split into memory.
std::vector<Trajectory> load_split(const DatasetManifest& m, Split s);

}  // namespace paint
