#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "paint/dataio.hpp"

using namespace paint;

namespace {
Trajectory tiny_flow_traj(int frames = 8, uint64_t seed = 3) {
    SystemParams p;
    p.kind = SystemKind::kolmogorov;
    p.H = p.W = 32;
    p.nu = 0.015;
    p.k_f = 4;
    p.amp = 1.8;
    p.dt_solver = 5e-3;
    p.seed = seed;
    return simulate(p, frames, 40, 5);
}

std::filesystem::path tmp(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("trajectory file: bit-identical round trip") {
    Trajectory traj = tiny_flow_traj();
    auto path = tmp("paint_traj_rt.ptrj");
    write_trajectory(path, traj);
    Trajectory back = read_trajectory(path);
    CHECK(back.H == traj.H);
    CHECK(back.W == traj.W);
    CHECK(back.dt == traj.dt);
    CHECK(back.norm_scale == traj.norm_scale);
    CHECK(back.params.kind == SystemKind::kolmogorov);
    CHECK(back.params.amp == traj.params.amp);
    CHECK(back.params.nu == traj.params.nu);
    CHECK(back.params.seed == traj.params.seed);
    REQUIRE(back.frame_count() == traj.frame_count());
    for (int f = 0; f < traj.frame_count(); ++f)
        for (int64_t i = 0; i < traj.frame_len(); ++i)
            CHECK(back.frames[f][i] == traj.frames[f][i]);
    std::filesystem::remove(path);
}

TEST_CASE("trajectory file: payload size is header + n_frames*2*H*W*8") {
    Trajectory traj = tiny_flow_traj(5);
    auto path = tmp("paint_traj_size.ptrj");
    write_trajectory(path, traj);
    CHECK(std::filesystem::file_size(path) == 84u + 5u * 2 * 32 * 32 * 8);
    std::filesystem::remove(path);
}

TEST_CASE("trajectory file: truncation error names expected and actual bytes") {
    Trajectory traj = tiny_flow_traj(4);
    auto path = tmp("paint_traj_trunc.ptrj");
    write_trajectory(path, traj);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 100);
    try {
        read_trajectory(path);
        FAIL("expected throw");
    } catch (const io_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find(std::to_string(full)) != std::string::npos);
        CHECK(msg.find(std::to_string(full - 100)) != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("trajectory file: bad magic is rejected") {
    auto path = tmp("paint_traj_magic.ptrj");
    std::ofstream(path, std::ios::binary) << "JUNKJUNKJUNK";
    CHECK_THROWS_AS(read_trajectory(path), io_error);
    std::filesystem::remove(path);
}

TEST_CASE("make_splits: 18 params give 15/1/2 with interior val and test") {
    std::vector<std::string> paths;
    std::vector<double> params;
    for (int i = 0; i < 18; ++i) {
        paths.push_back("traj_" + std::to_string(i) + ".ptrj");
        params.push_back(700.0 + 100.0 * i);
    }
    DatasetManifest m = make_splits(paths, params, 123);
    CHECK(m.of(Split::train).size() == 15);
    CHECK(m.of(Split::val).size() == 1);
    CHECK(m.of(Split::test).size() == 2);
    // endpoints always train
    for (auto& e : m.entries)
        if (e.param == 700.0 || e.param == 2400.0) CHECK(e.split == Split::train);
    m.validate_interpolation();
}

TEST_CASE("make_splits: deterministic per seed") {
    std::vector<std::string> paths;
    std::vector<double> params;
    for (int i = 0; i < 8; ++i) {
        paths.push_back("t" + std::to_string(i));
        params.push_back(1.6 + 0.1 * i);
    }
    DatasetManifest a = make_splits(paths, params, 9);
    DatasetManifest b = make_splits(paths, params, 9);
    for (size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].split == b.entries[i].split);
}

TEST_CASE("make_splits: rejects too few distinct params") {
    // 1 val + 2 test cannot sit strictly inside a 4-value range
    CHECK_THROWS_AS(make_splits({"a", "b", "c"}, {1.0, 2.0, 3.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_splits({"a", "b", "c", "d"}, {1.0, 2.0, 3.0, 4.0}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_splits({"a", "b", "c", "d", "e"}, {1.0, 1.0, 2.0, 3.0, 4.0}, 0),
                    std::invalid_argument);
}

TEST_CASE("manifest: save/load round trip and missing-file validation") {
    Trajectory traj = tiny_flow_traj(3);
    auto t0 = tmp("paint_m0.ptrj");
    auto t1 = tmp("paint_m1.ptrj");
    auto t2 = tmp("paint_m2.ptrj");
    auto t3 = tmp("paint_m3.ptrj");
    auto t4 = tmp("paint_m4.ptrj");
    for (auto& p : {t0, t1, t2, t3, t4}) write_trajectory(p, traj);

    DatasetManifest m = make_splits(
        {t0.string(), t1.string(), t2.string(), t3.string(), t4.string()},
        {1.0, 2.0, 3.0, 4.0, 5.0}, 5);
    auto mpath = tmp("paint_manifest.txt");
    save_manifest(mpath, m);
    DatasetManifest back = load_manifest(mpath);
    REQUIRE(back.entries.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(back.entries[i].path == m.entries[i].path);
        CHECK(back.entries[i].param == m.entries[i].param);
        CHECK(back.entries[i].split == m.entries[i].split);
    }

    std::filesystem::remove(t4);
    CHECK_THROWS_AS(load_manifest(mpath), io_error);
    for (auto& p : {t0, t1, t2, t3, mpath}) std::filesystem::remove(p);
}

TEST_CASE("extract_window: h history frames include t, plus n forecast frames") {
    Trajectory traj = tiny_flow_traj(20);
    ProbeSet ps = sample_probes(ProbeKind::random, 8, 32, 32, 4, 1);

    WindowSample ws = extract_window(traj, ps, 10, 8, 4);
    CHECK(ws.states.shape() == Shape{12, 2, 32, 32});
    CHECK(ws.measurements.window_length == 8);
    CHECK(ws.measurements.t_start == 3);  // 10 - 8 + 1

    // paper-scale window: 16 + 8 = 24 frames
    WindowSample big = extract_window(traj, ps, 16, 16, 3);
    CHECK(big.states.shape()[0] == 19);

    // pure filtering sample
    WindowSample filt = extract_window(traj, ps, 10, 8, 0);
    CHECK(filt.states.shape()[0] == 8);
}

TEST_CASE("extract_window: measurements align with states at probe pixels") {
    Trajectory traj = tiny_flow_traj(16);
    ProbeSet ps = sample_probes(ProbeKind::random, 12, 32, 32, 4, 2);
    WindowSample ws = extract_window(traj, ps, 9, 6, 2);
    const int64_t HW = 32 * 32;
    for (int f = 0; f < ws.history; ++f)
        for (int p = 0; p < ps.count(); ++p) {
            auto [r, c] = ps.positions[p];
            CHECK(ws.measurements.u_at(f, p) == ws.states.data()[(f * 2 + 0) * HW + r * 32 + c]);
            CHECK(ws.measurements.v_at(f, p) == ws.states.data()[(f * 2 + 1) * HW + r * 32 + c]);
        }
}

TEST_CASE("extract_window: out-of-range windows are rejected") {
    Trajectory traj = tiny_flow_traj(10);
    ProbeSet ps = sample_probes(ProbeKind::random, 4, 32, 32, 4, 1);
    CHECK_THROWS_AS(extract_window(traj, ps, 3, 8, 0), std::invalid_argument);
    CHECK_THROWS_AS(extract_window(traj, ps, 8, 4, 4), std::invalid_argument);
}
