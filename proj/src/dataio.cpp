#include "paint/dataio.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace paint {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'R', 'J'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderBytes = 4 + 4 + 4 + 4 + 4 + 4 + 4 + 8 + 4 * 8 + 8 + 8;  // 84

void pack_params(const SystemParams& p, double out[4]) {
    out[0] = out[1] = out[2] = out[3] = 0;
    switch (p.kind) {
        case SystemKind::logistic: out[0] = p.r; break;
        case SystemKind::lorenz:
            out[0] = p.sigma;
            out[1] = p.rho;
            out[2] = p.beta_l;
            break;
        case SystemKind::kolmogorov:
            out[0] = p.nu;
            out[1] = p.k_f;
            out[2] = p.amp;
            break;
    }
}

void unpack_params(SystemParams& p, const double in[4]) {
    switch (p.kind) {
        case SystemKind::logistic: p.r = in[0]; break;
        case SystemKind::lorenz:
            p.sigma = in[0];
            p.rho = in[1];
            p.beta_l = in[2];
            break;
        case SystemKind::kolmogorov:
            p.nu = in[0];
            p.k_f = static_cast<int>(in[1]);
            p.amp = in[2];
            break;
    }
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    if (traj.frame_count() < 1) throw std::invalid_argument("write_trajectory: no frames");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");

    os.write(kMagic, 4);
    auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto w64 = [&](uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    auto wf = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };

    w32(kVersion);
    w32(static_cast<uint32_t>(traj.params.kind));
    w32(static_cast<uint32_t>(traj.H));
    w32(static_cast<uint32_t>(traj.W));
    w32(static_cast<uint32_t>(traj.frame_count()));
    w32(0);  // reserved
    wf(traj.dt);
    double ps[4];
    pack_params(traj.params, ps);
    for (double p : ps) wf(p);
    w64(traj.params.seed);
    wf(traj.norm_scale);

    for (const auto& frame : traj.frames)
        os.write(reinterpret_cast<const char*>(frame.data()),
                 static_cast<std::streamsize>(frame.size() * 8));
    if (!os) throw io_error("write failed for '" + path.string() + "'");
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open trajectory '" + path.string() + "'");

    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("'" + path.string() + "' is not a PTRJ trajectory (bad magic)");

    auto r32 = [&](const char* what) {
        uint32_t v;
        if (!is.read(reinterpret_cast<char*>(&v), 4))
            throw io_error("trajectory '" + path.string() + "': truncated header (" +
                           std::string(what) + ")");
        return v;
    };
    auto rf = [&](const char* what) {
        double v;
        if (!is.read(reinterpret_cast<char*>(&v), 8))
            throw io_error("trajectory '" + path.string() + "': truncated header (" +
                           std::string(what) + ")");
        return v;
    };

    const uint32_t version = r32("version");
    if (version != kVersion)
        throw io_error("trajectory version " + std::to_string(version) + " unsupported");

    Trajectory traj;
    const uint32_t system_id = r32("system id");
    if (system_id > 2) throw io_error("trajectory: unknown system id " + std::to_string(system_id));
    traj.params.kind = static_cast<SystemKind>(system_id);
    traj.H = static_cast<int>(r32("H"));
    traj.W = static_cast<int>(r32("W"));
    const uint32_t n_frames = r32("n_frames");
    r32("reserved");
    traj.dt = rf("dt");
    double ps[4];
    for (double& p : ps) p = rf("params");
    unpack_params(traj.params, ps);
    uint64_t seed;
    if (!is.read(reinterpret_cast<char*>(&seed), 8))
        throw io_error("trajectory '" + path.string() + "': truncated header (seed)");
    traj.params.seed = seed;
    traj.params.H = traj.H;
    traj.params.W = traj.W;
    traj.norm_scale = rf("norm_scale");

    const int64_t frame_len = 2LL * traj.H * traj.W;
    const auto file_size = std::filesystem::file_size(path);
    const uint64_t expected = kHeaderBytes + static_cast<uint64_t>(n_frames) * frame_len * 8;
    if (file_size != expected)
        throw io_error("trajectory '" + path.string() + "': expected " + std::to_string(expected) +
                       " bytes for " + std::to_string(n_frames) + " frames, file has " +
                       std::to_string(file_size));

    traj.frames.reserve(n_frames);
    for (uint32_t f = 0; f < n_frames; ++f) {
        std::vector<double> frame(static_cast<size_t>(frame_len));
        if (!is.read(reinterpret_cast<char*>(frame.data()), frame_len * 8))
            throw io_error("trajectory '" + path.string() + "': truncated at frame " +
                           std::to_string(f));
        traj.frames.push_back(std::move(frame));
    }
    return traj;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

static Split split_from_name(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw io_error("manifest: unknown split '" + s + "'");
}

std::vector<const ManifestEntry*> DatasetManifest::of(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (auto& e : entries)
        if (e.split == s) out.push_back(&e);
    return out;
}

void DatasetManifest::validate_interpolation() const {
    double lo = 1e300, hi = -1e300;
    for (auto& e : entries)
        if (e.split == Split::train) {
            lo = std::min(lo, e.param);
            hi = std::max(hi, e.param);
        }
    for (auto& e : entries)
        if (e.split != Split::train && (e.param <= lo || e.param >= hi))
            throw std::invalid_argument("manifest: " + split_name(e.split) + " param " +
                                        std::to_string(e.param) +
                                        " lies outside the training range (" + std::to_string(lo) +
                                        ", " + std::to_string(hi) + ")");
}

DatasetManifest make_splits(const std::vector<std::string>& paths,
                            const std::vector<double>& param_values, uint64_t seed) {
    if (paths.size() != param_values.size())
        throw std::invalid_argument("make_splits: paths and params differ in length");
    std::set<double> distinct(param_values.begin(), param_values.end());
    // 1 val + 2 test must fit strictly inside the range, so the two extremes
    // plus three interior values is the minimum
    if (distinct.size() < 5)
        throw std::invalid_argument("make_splits: need >= 5 distinct parameter values (2 range "
                                    "endpoints + 1 val + 2 test), got " +
                                    std::to_string(distinct.size()));

    // order by parameter; endpoints always train
    std::vector<size_t> order(paths.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return param_values[a] < param_values[b]; });

    std::vector<size_t> interior(order.begin() + 1, order.end() - 1);
    Rng rng(derive_seed(seed, 0x5B711));
    std::vector<size_t> picks;  // 1 val + 2 test, distinct interior slots
    while (picks.size() < 3) {
        size_t cand = interior[rng.uniform_index(interior.size())];
        if (std::find(picks.begin(), picks.end(), cand) == picks.end()) picks.push_back(cand);
    }

    DatasetManifest m;
    m.entries.resize(paths.size());
    for (size_t i = 0; i < paths.size(); ++i) {
        m.entries[i].path = paths[i];
        m.entries[i].param = param_values[i];
        m.entries[i].split = Split::train;
    }
    m.entries[picks[0]].split = Split::val;
    m.entries[picks[1]].split = Split::test;
    m.entries[picks[2]].split = Split::test;
    m.validate_interpolation();
    return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    for (auto& e : m.entries) {
        std::ostringstream line;
        line.precision(17);
        line << e.path << "," << e.param << "," << split_name(e.split);
        os << line.str() << "\n";
    }
    if (!os) throw io_error("write failed for '" + path.string() + "'");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open manifest '" + path.string() + "'");
    DatasetManifest m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto c1 = line.rfind(',');
        const auto c0 = c1 == std::string::npos ? c1 : line.rfind(',', c1 - 1);
        if (c0 == std::string::npos || c1 == std::string::npos)
            throw io_error("manifest: bad line '" + line + "'");
        ManifestEntry e;
        e.path = line.substr(0, c0);
        e.param = std::stod(line.substr(c0 + 1, c1 - c0 - 1));
        e.split = split_from_name(line.substr(c1 + 1));
        m.entries.push_back(e);
    }
    if (m.entries.empty()) throw io_error("manifest '" + path.string() + "' is empty");
    for (auto& e : m.entries)
        if (!std::filesystem::exists(e.path))
            throw io_error("manifest references missing file '" + e.path + "'");
    return m;
}

WindowSample extract_window(const Trajectory& traj, const ProbeSet& probes, int t, int history,
                            int forecast) {
    if (history < 1 || forecast < 0)
        throw std::invalid_argument("extract_window: history >= 1 and forecast >= 0 required");
    if (t - history < 0 || t + forecast >= traj.frame_count())
        throw std::invalid_argument("extract_window: window around t=" + std::to_string(t) +
                                    " (h=" + std::to_string(history) +
                                    ", n=" + std::to_string(forecast) + ") outside [0," +
                                    std::to_string(traj.frame_count()) + ")");

    // h history frames include the current frame t: states span [t-h+1, t+n]
    const int T = history + forecast;
    const int first = t - history + 1;
    WindowSample ws;
    ws.history = history;
    ws.forecast = forecast;
    ws.param = traj.params.conditioning_param();
    ws.states = Tensor::zeros({T, 2, traj.H, traj.W});
    auto& d = ws.states.mutable_data();
    const int64_t HW = static_cast<int64_t>(traj.H) * traj.W;
    for (int f = 0; f < T; ++f) {
        const auto& frame = traj.frames[static_cast<size_t>(first + f)];
        std::copy(frame.begin(), frame.begin() + HW, d.begin() + f * 2 * HW);
        std::copy(frame.begin() + HW, frame.end(), d.begin() + f * 2 * HW + HW);
    }
    ws.measurements = emit(traj, probes, first, history);
    return ws;
}

}  // namespace paint
