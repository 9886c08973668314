#include "paint/sensing.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace paint {

ProbeKind probe_kind_from_name(const std::string& name) {
    if (name == "random") return ProbeKind::random;
    if (name == "grid") return ProbeKind::grid;
    if (name == "vertical") return ProbeKind::vertical;
    throw config_error("unknown probe constellation '" + name + "' (random|grid|vertical)");
}

void ProbeSet::validate() const {
    if (positions.empty()) throw std::invalid_argument("ProbeSet: empty");
    std::set<std::pair<int, int>> seen;
    for (auto& [r, c] : positions) {
        if (r < 0 || r >= grid_h || c < 0 || c >= grid_w)
            throw std::invalid_argument("ProbeSet: position (" + std::to_string(r) + "," +
                                        std::to_string(c) + ") outside " + std::to_string(grid_h) +
                                        "x" + std::to_string(grid_w));
        if (!seen.insert({r, c}).second)
            throw std::invalid_argument("ProbeSet: duplicate position (" + std::to_string(r) + "," +
                                        std::to_string(c) + ")");
    }
}

std::pair<int, int> inlet_analog_position(int grid_h, int grid_w, int k_f) {
    // body force A sin(k_f y) peaks first at y = pi / (2 k_f), i.e. row H/(4 k_f)
    int row = grid_h / (4 * std::max(1, k_f));
    return {std::clamp(row, 0, grid_h - 1), grid_w / 2};
}

ProbeSet sample_probes(ProbeKind kind, int count, int grid_h, int grid_w, int k_f, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_probes: count must be >= 1");
    ProbeSet ps;
    ps.grid_h = grid_h;
    ps.grid_w = grid_w;
    switch (kind) {
        case ProbeKind::random: {
            if (count > grid_h * grid_w)
                throw std::invalid_argument("sample_probes: " + std::to_string(count) +
                                            " probes exceed " + std::to_string(grid_h * grid_w) +
                                            " grid cells");
            Rng rng(derive_seed(seed, 0x9B0BE5));
            std::set<std::pair<int, int>> taken;
            while (static_cast<int>(taken.size()) < count) {
                int r = static_cast<int>(rng.uniform_index(grid_h));
                int c = static_cast<int>(rng.uniform_index(grid_w));
                taken.insert({r, c});
            }
            ps.positions.assign(taken.begin(), taken.end());
            break;
        }
        case ProbeKind::grid: {
            if (count > grid_h || count > grid_w)
                throw std::invalid_argument("sample_probes: grid lattice " + std::to_string(count) +
                                            " per side exceeds the domain");
            for (int i = 0; i < count; ++i)
                for (int j = 0; j < count; ++j)
                    ps.positions.emplace_back((2 * i + 1) * grid_h / (2 * count),
                                              (2 * j + 1) * grid_w / (2 * count));
            ps.positions.push_back(inlet_analog_position(grid_h, grid_w, k_f));
            ps.includes_inlet_analog = true;
            break;
        }
        case ProbeKind::vertical: {
            if (count > grid_h)
                throw std::invalid_argument("sample_probes: vertical column of " +
                                            std::to_string(count) + " exceeds grid height");
            const int col = 3 * grid_w / 4;
            for (int i = 0; i < count; ++i)
                ps.positions.emplace_back((2 * i + 1) * grid_h / (2 * count), col);
            ps.positions.push_back(inlet_analog_position(grid_h, grid_w, k_f));
            ps.includes_inlet_analog = true;
            break;
        }
    }
    ps.validate();
    return ps;
}

MeasurementWindow MeasurementWindow::slice(int frame_lo, int frame_hi) const {
    if (frame_lo < 0 || frame_hi > window_length || frame_lo >= frame_hi)
        throw std::invalid_argument("MeasurementWindow::slice: [" + std::to_string(frame_lo) + "," +
                                    std::to_string(frame_hi) + ") outside window of " +
                                    std::to_string(window_length));
    MeasurementWindow out;
    out.probe_set = probe_set;
    out.t_start = t_start + frame_lo;
    out.window_length = frame_hi - frame_lo;
    const size_t per_frame = static_cast<size_t>(probe_set.count()) * 2;
    out.values.assign(values.begin() + frame_lo * per_frame, values.begin() + frame_hi * per_frame);
    return out;
}

MeasurementWindow emit(const Trajectory& traj, const ProbeSet& probes, int t_start,
                       int window_length, double noise_sigma, uint64_t noise_seed) {
    probes.validate();
    if (probes.grid_h != traj.H || probes.grid_w != traj.W)
        throw std::invalid_argument("emit: probe grid does not match trajectory grid");
    if (window_length < 1) throw std::invalid_argument("emit: window_length must be >= 1");
    if (t_start < 0 || t_start + window_length > traj.frame_count())
        throw std::invalid_argument("emit: window [" + std::to_string(t_start) + "," +
                                    std::to_string(t_start + window_length) + ") outside " +
                                    std::to_string(traj.frame_count()) + " frames");
    MeasurementWindow mw;
    mw.probe_set = probes;
    mw.t_start = t_start;
    mw.window_length = window_length;
    mw.values.resize(static_cast<size_t>(window_length) * probes.count() * 2);
    Rng rng(derive_seed(noise_seed, 0xE1117));
    const int HW = traj.H * traj.W;
    size_t k = 0;
    for (int f = 0; f < window_length; ++f) {
        const auto& frame = traj.frames[static_cast<size_t>(t_start + f)];
        for (auto& [r, c] : probes.positions) {
            const int idx = r * traj.W + c;
            double u = frame[idx];
            double v = frame[HW + idx];
            if (noise_sigma > 0) {
                u += noise_sigma * rng.normal();
                v += noise_sigma * rng.normal();
            }
            mw.values[k++] = u;
            mw.values[k++] = v;
        }
    }
    return mw;
}

Tensor encode(const MeasurementWindow& mw, int grid_h, int grid_w) {
    const auto& probes = mw.probe_set;
    for (auto& [r, c] : probes.positions)
        if (r >= grid_h || c >= grid_w)
            throw std::invalid_argument("encode: probe outside target grid");
    Tensor enc = Tensor::zeros({mw.window_length, 3, grid_h, grid_w});
    auto& d = enc.mutable_data();
    const int64_t HW = static_cast<int64_t>(grid_h) * grid_w;
    for (int f = 0; f < mw.window_length; ++f) {
        const int64_t base = static_cast<int64_t>(f) * 3 * HW;
        for (int p = 0; p < probes.count(); ++p) {
            const auto& [r, c] = probes.positions[static_cast<size_t>(p)];
            const int64_t px = static_cast<int64_t>(r) * grid_w + c;
            d[base + px] = 1.0;                      // mask channel
            d[base + HW + px] = mw.u_at(f, p);       // u values
            d[base + 2 * HW + px] = mw.v_at(f, p);   // v values
        }
    }
    return enc;
}

MeasurementWindow decode(const Tensor& enc, const ProbeSet& probes, int t_start) {
    if (enc.rank() != 4 || enc.shape()[1] != 3)
        throw std::invalid_argument("decode: expected (T,3,H,W) encoding, got " +
                                    shape_str(enc.shape()));
    const int T = enc.shape()[0], H = enc.shape()[2], W = enc.shape()[3];
    MeasurementWindow mw;
    mw.probe_set = probes;
    mw.t_start = t_start;
    mw.window_length = T;
    mw.values.resize(static_cast<size_t>(T) * probes.count() * 2);
    const auto d = enc.data();
    const int64_t HW = static_cast<int64_t>(H) * W;
    size_t k = 0;
    for (int f = 0; f < T; ++f) {
        const int64_t base = static_cast<int64_t>(f) * 3 * HW;
        for (auto& [r, c] : probes.positions) {
            const int64_t px = static_cast<int64_t>(r) * W + c;
            mw.values[k++] = d[base + HW + px];
            mw.values[k++] = d[base + 2 * HW + px];
        }
    }
    return mw;
}

void save_probes(const std::filesystem::path& path, const ProbeSet& probes) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    os << "# grid " << probes.grid_h << "x" << probes.grid_w << "\n";
    for (auto& [r, c] : probes.positions) os << r << "," << c << "\n";
    if (!os) throw io_error("write failed for '" + path.string() + "'");
}

ProbeSet load_probes(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open probe file '" + path.string() + "'");
    std::string header;
    std::getline(is, header);
    ProbeSet ps;
    if (sscanf(header.c_str(), "# grid %dx%d", &ps.grid_h, &ps.grid_w) != 2)
        throw io_error("probe file '" + path.string() + "': bad header '" + header + "'");
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        int r, c;
        if (sscanf(line.c_str(), "%d,%d", &r, &c) != 2)
            throw io_error("probe file '" + path.string() + "': bad line '" + line + "'");
        ps.positions.emplace_back(r, c);
    }
    ps.validate();
    return ps;
}

}  // namespace paint
