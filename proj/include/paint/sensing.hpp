#pragma once

#include <filesystem>
#include <vector>

#include "paint/dynsys.hpp"
#include "paint/tensor.hpp"

namespace paint {

enum class ProbeKind { random, grid, vertical };

ProbeKind probe_kind_from_name(const std::string& name);

/// Sensor locations on the grid. Positions are unique, in-bounds (row, col)
/// pairs; the inlet-analog probe sits at the forcing-dominant location.
struct ProbeSet {
    int grid_h = 0, grid_w = 0;
    std::vector<std::pair<int, int>> positions;
    bool includes_inlet_analog = false;

    int count() const { return static_cast<int>(positions.size()); }
    void validate() const;
};

/// The fixed probe marking the forcing-dominant location: the row where the
/// body force peaks first, at the domain's horizontal center.
std::pair<int, int> inlet_analog_position(int grid_h, int grid_w, int k_f);

/// Build a probe constellation.
///   random:   `count` unique uniform positions (training mode, no inlet)
///   grid:     evenly spaced count x count lattice, plus the inlet probe
///   vertical: `count` probes in the column at 3/4 of the width, plus inlet
ProbeSet sample_probes(ProbeKind kind, int count, int grid_h, int grid_w, int k_f, uint64_t seed);

/// Measurements m over frames [t_start, t_start + window_length):
/// values[(frame * n_probes + p) * 2 + {0,1}] = (u, v) at probe p.
struct MeasurementWindow {
    ProbeSet probe_set;
    int t_start = 0;
    int window_length = 0;
    std::vector<double> values;

    double u_at(int frame, int probe) const {
        return values[(static_cast<size_t>(frame) * probe_set.count() + probe) * 2];
    }
    double v_at(int frame, int probe) const {
        return values[(static_cast<size_t>(frame) * probe_set.count() + probe) * 2 + 1];
    }
    /// Sub-window view [frame_lo, frame_hi), re-based to t_start + frame_lo.
    MeasurementWindow slice(int frame_lo, int frame_hi) const;
};

/// Emit probe readings from a trajectory; noise_sigma > 0 adds seeded
/// Gaussian noise, 0 reads the simulation exactly.
MeasurementWindow emit(const Trajectory& traj, const ProbeSet& probes, int t_start,
                       int window_length, double noise_sigma = 0.0, uint64_t noise_seed = 0);

/// Per-frame (mask, u, v) channels scattered onto the grid: mask is 1 at
/// probe pixels, value channels are zero wherever the mask is zero.
/// Tensor shape (window_length, 3, H, W).
Tensor encode(const MeasurementWindow& mw, int grid_h, int grid_w);

/// Read probe values back out of an encoding (bit-exact round trip).
MeasurementWindow decode(const Tensor& enc, const ProbeSet& probes, int t_start);

/// Plain-text probe serialization: header "# grid HxW", one "row,col" line
/// per probe.
void save_probes(const std::filesystem::path& path, const ProbeSet& probes);
ProbeSet load_probes(const std::filesystem::path& path);

}  // namespace paint
