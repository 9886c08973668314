#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "paint/sensing.hpp"

using namespace paint;

namespace {
Trajectory tiny_flow_traj(int frames = 6, uint64_t seed = 3) {
    SystemParams p;
    p.kind = SystemKind::kolmogorov;
    p.H = p.W = 32;
    p.nu = 0.015;
    p.k_f = 4;
    p.amp = 1.8;
    p.dt_solver = 5e-3;
    p.seed = seed;
    return simulate(p, frames, 50, 5);
}
}  // namespace

TEST_CASE("grid constellation: 10x10 plus the inlet probe on 32x32 gives 101") {
    ProbeSet ps = sample_probes(ProbeKind::grid, 10, 32, 32, 4, 0);
    CHECK(ps.count() == 101);
    CHECK(ps.includes_inlet_analog);
    ps.validate();
}

TEST_CASE("vertical constellation: 25 probes in the 3/4-width column plus inlet") {
    ProbeSet ps = sample_probes(ProbeKind::vertical, 25, 32, 32, 4, 0);
    CHECK(ps.count() == 26);
    int at_col = 0;
    for (auto& [r, c] : ps.positions)
        if (c == 24) ++at_col;
    CHECK(at_col >= 25);  // inlet sits elsewhere (column 16)
    ps.validate();
}

TEST_CASE("random constellation: deterministic, unique, no inlet") {
    ProbeSet a = sample_probes(ProbeKind::random, 25, 32, 32, 4, 7);
    ProbeSet b = sample_probes(ProbeKind::random, 25, 32, 32, 4, 7);
    ProbeSet c = sample_probes(ProbeKind::random, 25, 32, 32, 4, 8);
    CHECK(a.count() == 25);
    CHECK(!a.includes_inlet_analog);
    CHECK(a.positions == b.positions);
    CHECK(a.positions != c.positions);
    a.validate();
}

TEST_CASE("random constellation: count above the grid size is rejected") {
    CHECK_THROWS_AS(sample_probes(ProbeKind::random, 17, 4, 4, 1, 0), std::invalid_argument);
}

TEST_CASE("emit: noiseless values equal the trajectory exactly") {
    Trajectory traj = tiny_flow_traj();
    ProbeSet ps = sample_probes(ProbeKind::random, 10, 32, 32, 4, 1);
    MeasurementWindow mw = emit(traj, ps, 1, 4);
    CHECK(mw.window_length == 4);
    for (int f = 0; f < 4; ++f)
        for (int p = 0; p < ps.count(); ++p) {
            auto [r, c] = ps.positions[p];
            CHECK(mw.u_at(f, p) == traj.frames[1 + f][r * 32 + c]);
            CHECK(mw.v_at(f, p) == traj.frames[1 + f][32 * 32 + r * 32 + c]);
        }
}

TEST_CASE("emit: Gaussian noise has the declared scale (Monte Carlo)") {
    Trajectory traj = tiny_flow_traj(2);
    ProbeSet ps = sample_probes(ProbeKind::random, 4, 32, 32, 4, 1);
    const double sigma = 0.1;
    const int draws = 10000;
    // per-probe deviation samples across repeated emissions
    for (int p = 0; p < ps.count(); ++p) {
        double acc = 0, acc2 = 0;
        for (int d = 0; d < draws; ++d) {
            MeasurementWindow mw = emit(traj, ps, 0, 1, sigma, static_cast<uint64_t>(d));
            auto [r, c] = ps.positions[p];
            const double dev = mw.u_at(0, p) - traj.frames[0][r * 32 + c];
            acc += dev;
            acc2 += dev * dev;
        }
        const double mean = acc / draws;
        const double std = std::sqrt(acc2 / draws - mean * mean);
        CHECK(std::abs(std - sigma) < 0.05 * sigma);
    }
}

TEST_CASE("emit: window out of range is rejected") {
    Trajectory traj = tiny_flow_traj(4);
    ProbeSet ps = sample_probes(ProbeKind::random, 4, 32, 32, 4, 1);
    CHECK_THROWS_AS(emit(traj, ps, 2, 4), std::invalid_argument);
    CHECK_THROWS_AS(emit(traj, ps, -1, 2), std::invalid_argument);
}

TEST_CASE("encode: mask sum equals probe count per frame; values zero off-mask") {
    Trajectory traj = tiny_flow_traj(3);
    ProbeSet ps = sample_probes(ProbeKind::random, 25, 32, 32, 4, 5);
    MeasurementWindow mw = emit(traj, ps, 0, 3);
    Tensor enc = encode(mw, 32, 32);
    REQUIRE(enc.shape() == Shape{3, 3, 32, 32});
    const int64_t HW = 32 * 32;
    for (int f = 0; f < 3; ++f) {
        double mask_sum = 0;
        for (int64_t i = 0; i < HW; ++i) {
            const double m = enc.data()[f * 3 * HW + i];
            mask_sum += m;
            if (m == 0.0) {
                CHECK(enc.data()[f * 3 * HW + HW + i] == 0.0);
                CHECK(enc.data()[f * 3 * HW + 2 * HW + i] == 0.0);
            }
        }
        CHECK(mask_sum == 25.0);
    }
}

TEST_CASE("encode/decode: bit-exact round trip at probe pixels") {
    Trajectory traj = tiny_flow_traj(3);
    ProbeSet ps = sample_probes(ProbeKind::grid, 10, 32, 32, 4, 0);
    MeasurementWindow mw = emit(traj, ps, 0, 3);
    MeasurementWindow back = decode(encode(mw, 32, 32), ps, 0);
    REQUIRE(back.values.size() == mw.values.size());
    for (size_t i = 0; i < mw.values.size(); ++i) CHECK(back.values[i] == mw.values[i]);
}

TEST_CASE("encode: zero measurements leave value channels zero, mask intact") {
    ProbeSet ps = sample_probes(ProbeKind::random, 5, 16, 16, 4, 2);
    MeasurementWindow mw;
    mw.probe_set = ps;
    mw.window_length = 2;
    mw.values.assign(2 * 5 * 2, 0.0);
    Tensor enc = encode(mw, 16, 16);
    const int64_t HW = 256;
    double mask_sum = 0, val_sum = 0;
    for (int f = 0; f < 2; ++f)
        for (int64_t i = 0; i < HW; ++i) {
            mask_sum += enc.data()[f * 3 * HW + i];
            val_sum += std::abs(enc.data()[f * 3 * HW + HW + i]);
            val_sum += std::abs(enc.data()[f * 3 * HW + 2 * HW + i]);
        }
    CHECK(mask_sum == 10.0);
    CHECK(val_sum == 0.0);
}

TEST_CASE("probe set text serialization round trip") {
    ProbeSet ps = sample_probes(ProbeKind::vertical, 25, 32, 32, 4, 0);
    auto path = std::filesystem::temp_directory_path() / "paint_probes.txt";
    save_probes(path, ps);
    ProbeSet back = load_probes(path);
    CHECK(back.grid_h == 32);
    CHECK(back.grid_w == 32);
    CHECK(back.positions == ps.positions);
    std::filesystem::remove(path);
}

TEST_CASE("measurement window slice re-bases correctly") {
    Trajectory traj = tiny_flow_traj(6);
    ProbeSet ps = sample_probes(ProbeKind::random, 6, 32, 32, 4, 3);
    MeasurementWindow mw = emit(traj, ps, 0, 6);
    MeasurementWindow s = mw.slice(2, 5);
    CHECK(s.t_start == 2);
    CHECK(s.window_length == 3);
    for (int f = 0; f < 3; ++f)
        for (int p = 0; p < ps.count(); ++p) CHECK(s.u_at(f, p) == mw.u_at(f + 2, p));
}
