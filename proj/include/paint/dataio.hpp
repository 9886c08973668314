#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "paint/dynsys.hpp"
#include "paint/sensing.hpp"

namespace paint {

/// Binary trajectory file, little-endian:
///   magic "PTRJ" | u32 version | u32 system id | u32 H | u32 W |
///   u32 n_frames | u32 reserved | f64 dt | f64 params[4] | u64 seed |
///   f64 norm_scale
/// (84-byte header), then n_frames * 2*H*W f64 per frame: the u plane
/// row-major, then the v plane. params slots: logistic (r,-,-,-),
/// lorenz (sigma,rho,beta,-), kolmogorov (nu,k_f,amp,-).
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

enum class Split { train, val, test };
std::string split_name(Split s);

struct ManifestEntry {
    std::string path;
    double param = 0;
    Split split = Split::train;
};

/// Plain-text manifest, one "path,param,split" line per trajectory.
/// Validation and test parameters always lie strictly inside the training
/// parameter range (no extrapolation).
struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> of(Split s) const;
    void validate_interpolation() const;  // throws if val/test touch the hull
};

/// Choose 1 val + 2 test parameters from the interior of the sorted list;
/// the rest train. Requires >= 4 distinct values. Deterministic per seed.
DatasetManifest make_splits(const std::vector<std::string>& paths,
                            const std::vector<double>& param_values, uint64_t seed);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// One training example: the target state window x over frames
/// [t-h+1, t+n] (h history frames including t, then n forecast frames) and
/// the measurements over the h history frames.
struct WindowSample {
    Tensor states;               // (h+n, 2, H, W)
    MeasurementWindow measurements;  // h frames, aligned with states[0..h)
    int history = 0, forecast = 0;
    double param = 0;
};

/// Extract a window sample ending its history at frame t. States are the
/// stored (already normalized) frames.
WindowSample extract_window(const Trajectory& traj, const ProbeSet& probes, int t, int history,
                            int forecast);

}  // namespace paint
