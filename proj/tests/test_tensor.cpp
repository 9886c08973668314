#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "paint/nn.hpp"
#include "paint/tensor.hpp"

using namespace paint;

namespace {

// ---------------------------------------------------------------------------
// Finite-difference oracle: central differences, step 1e-5. Independent of
// the tape's backward path; every layer type is checked against it.
// ---------------------------------------------------------------------------

template <class F>
void grad_check(F&& f, std::vector<Tensor> inputs, double tol = 1e-4) {
    for (auto& t : inputs) t.set_requires_grad(true);

    Tape tape;
    Tensor loss = f(tape, inputs);
    for (auto& t : inputs) t.zero_grad();
    tape.backward(loss);

    const double h = 1e-5;
    for (auto& t : inputs) {
        REQUIRE(t.has_grad());
        auto& vals = t.mutable_data();
        const auto& g = t.grad();
        for (size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + h;
            Tape t1;
            const double fp = f(t1, inputs).item();
            vals[i] = orig - h;
            Tape t2;
            const double fm = f(t2, inputs).item();
            vals[i] = orig;
            const double fd = (fp - fm) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
            CHECK(std::abs(fd - g[i]) / denom < tol);
        }
    }
}

Tensor rand_t(Shape shape, Rng& rng) { return Tensor::randn(std::move(shape), rng, 1.0); }

}  // namespace

TEST_CASE("matmul identity returns operand") {
    Rng rng(7);
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.mutable_data()[i * 3 + i] = 1.0;
    Tensor a = rand_t({3, 3}, rng);
    Tape tape;
    Tensor out = tape.matmul(eye, a);
    for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-14));
}

TEST_CASE("softmax of zeros is uniform") {
    Tape tape;
    Tensor out = tape.softmax(Tensor::zeros({3}));
    for (int i = 0; i < 3; ++i) CHECK(out.data()[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("layernorm of a constant vector reduces to beta") {
    Tape tape;
    Tensor x = Tensor::full({4}, 3.25);
    Tensor gamma = Tensor::full({4}, 2.0);
    Tensor beta = Tensor::from({4}, {0.1, 0.2, 0.3, 0.4});
    Tensor out = tape.layernorm(x, gamma, beta);
    for (int i = 0; i < 4; ++i) CHECK(out.data()[i] == doctest::Approx(beta.data()[i]));
}

TEST_CASE("backward of sum gives all-ones") {
    Tensor x = Tensor::from({4}, {1, 2, 3, 4}, true);
    Tape tape;
    tape.backward(tape.sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum(x*x) at [1,2] gives [2,4]") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tape tape;
    tape.backward(tape.sum(tape.mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tape tape;
    Tensor y = tape.mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("shape mismatch errors name the op and shapes") {
    Tape tape;
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        tape.matmul(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("non-finite forward output raises numeric_error") {
    Tape tape;
    Tensor a = Tensor::full({2, 2}, 1e200);
    CHECK_THROWS_AS(tape.matmul(a, a), numeric_error);
}

TEST_CASE("gradcheck: every layer type vs central finite differences, 10 seeds") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);

        grad_check([](Tape& t, std::vector<Tensor>& in) { return t.sum(t.matmul(in[0], in[1])); },
                   {rand_t({4, 3}, rng), rand_t({3, 5}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.add(in[0], in[1]), t.sub(in[0], in[2])));
            },
            {rand_t({2, 3, 4}, rng), rand_t({4}, rng), rand_t({3, 4}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.sum(t.mul(t.softmax(in[0]), in[1]));
            },
            {rand_t({3, 5}, rng), rand_t({3, 5}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.layernorm(in[0], in[1], in[2]), in[3]));
            },
            {rand_t({4, 6}, rng), rand_t({6}, rng), rand_t({6}, rng), rand_t({4, 6}, rng)});

        grad_check([](Tape& t, std::vector<Tensor>& in) { return t.sum(t.gelu(in[0])); },
                   {rand_t({3, 4}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.attention(in[0], in[1], in[2], 2), in[3]));
            },
            {rand_t({2, 5, 8}, rng), rand_t({2, 5, 8}, rng), rand_t({2, 5, 8}, rng),
             rand_t({2, 5, 8}, rng)});

        // linear patch embedding = patchify + matmul
        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.sum(t.matmul(t.patchify(in[0], 2), in[1]));
            },
            {rand_t({2, 3, 4, 4}, rng), rand_t({12, 5}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.unpatchify(in[0], 1, 2, 4, 4, 2), in[1]));
            },
            {rand_t({4, 8}, rng), rand_t({1, 2, 4, 4}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.reshape(in[0], {6, 2}), in[1]));
            },
            {rand_t({3, 4}, rng), rand_t({6, 2}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.concat_channels(in[0], in[1]), in[2]));
            },
            {rand_t({2, 2, 2, 2}, rng), rand_t({2, 1, 2, 2}, rng), rand_t({2, 3, 2, 2}, rng)});

        grad_check(
            [](Tape& t, std::vector<Tensor>& in) {
                return t.mean(t.mul(t.transpose01(in[0]), in[1]));
            },
            {rand_t({3, 4, 2}, rng), rand_t({4, 3, 2}, rng)});

        grad_check([](Tape& t, std::vector<Tensor>& in) { return t.mean(t.scale(in[0], -1.7)); },
                   {rand_t({5}, rng)});
    }
}

TEST_CASE("gradcheck: random 3-layer MLP, every parameter") {
    for (uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(derive_seed(99, seed));
        ParamStore ps;
        Linear l1 = Linear::make(ps, "l1", 6, 12, rng);
        Linear l2 = Linear::make(ps, "l2", 12, 12, rng);
        Linear l3 = Linear::make(ps, "l3", 12, 1, rng);
        Tensor x = rand_t({4, 6}, rng);
        Tensor target = rand_t({4, 1}, rng);

        auto f = [&](Tape& t, std::vector<Tensor>&) {
            Tensor h1 = t.gelu(l1.apply(t, x));
            Tensor h2 = t.gelu(l2.apply(t, h1));
            Tensor d = t.sub(l3.apply(t, h2), target);
            return t.mean(t.mul(d, d));
        };
        std::vector<Tensor> params;
        for (auto& [_, p] : ps.items()) params.push_back(p);
        grad_check(f, params);
    }
}

TEST_CASE("forward and backward are bit-deterministic") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        ParamStore ps;
        AttentionBlock blk = AttentionBlock::make(ps, "b", 8, 2, 4, rng);
        Tensor x = Tensor::randn({2, 5, 8}, rng, 1.0);
        Tape tape;
        Tensor out = blk.apply(tape, x);
        Tensor loss = tape.mean(tape.mul(out, out));
        ps.zero_grads();
        tape.backward(loss);
        std::vector<double> result = {loss.item()};
        for (auto& [_, p] : ps.items())
            result.insert(result.end(), p.grad().begin(), p.grad().end());
        return result;
    };
    auto a = run(42), b = run(42);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

TEST_CASE("adamw: zero grad and zero decay leaves params unchanged") {
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::from({3}, {1.0, -2.0, 0.5}));
    p.grad();  // zero gradient
    AdamW opt(0.0);
    opt.step(ps, 1e-3);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);
    CHECK(p.data()[2] == 0.5);
}

TEST_CASE("adamw: single-step closed form on a scalar") {
    // One update at p=1, g=1, beta=(0.9, 0.999), eps=1e-8, lr=0.01, wd=0:
    //   m = 0.1, v = 1e-3, mhat = 1, vhat = 1
    //   p' = 1 - lr * 1 / (sqrt(1) + eps)
    const double lr = 0.01, eps = 1e-8;
    const double m = 0.1, v = 1e-3;
    const double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
    const double expected = 1.0 - lr * (mhat / (std::sqrt(vhat) + eps));

    ParamStore ps;
    Tensor p = ps.add("p", Tensor::scalar(1.0));
    p.grad()[0] = 1.0;
    AdamW opt(0.0);
    opt.step(ps, lr);
    CHECK(p.data()[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw: decoupled decay shrinks params by lr*wd*p at zero grad") {
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::scalar(2.0));
    p.grad();
    AdamW opt(0.05);
    opt.step(ps, 0.1);
    CHECK(p.data()[0] == doctest::Approx(2.0 - 0.1 * 0.05 * 2.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// LrSchedule
// ---------------------------------------------------------------------------

TEST_CASE("lr schedule endpoints and shape") {
    LrSchedule s{5e-7, 1e-4, 1e-5, 100, 1000};
    CHECK(s.at(0) == doctest::Approx(5e-7));
    CHECK(s.at(100) == doctest::Approx(1e-4));
    CHECK(s.at(1000) == doctest::Approx(1e-5));
    // linear warmup
    CHECK(s.at(50) == doctest::Approx(5e-7 + (1e-4 - 5e-7) * 0.5));
    // monotone decay after the peak, positive everywhere
    double prev = s.at(100);
    for (int t = 101; t <= 1100; ++t) {
        const double lr = s.at(t);
        CHECK(lr > 0.0);
        CHECK(lr <= prev + 1e-18);
        prev = lr;
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(5);
    ParamStore ps;
    ps.add("layer.weight", Tensor::randn({4, 3}, rng));
    ps.add("layer.bias", Tensor::randn({3}, rng));

    auto path = std::filesystem::temp_directory_path() / "paint_test_ckpt.ptnt";
    save_checkpoint(path, ps);
    ParamStore loaded = load_checkpoint(path);

    REQUIRE(loaded.items().size() == 2);
    for (size_t i = 0; i < ps.items().size(); ++i) {
        CHECK(loaded.items()[i].first == ps.items()[i].first);
        REQUIRE(loaded.items()[i].second.shape() == ps.items()[i].second.shape());
        for (int64_t j = 0; j < ps.items()[i].second.size(); ++j)
            CHECK(loaded.items()[i].second.data()[j] == ps.items()[i].second.data()[j]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects bad magic and truncation") {
    auto path = std::filesystem::temp_directory_path() / "paint_test_bad.ptnt";
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(path), io_error);

    Rng rng(5);
    ParamStore ps;
    ps.add("w", Tensor::randn({8, 8}, rng));
    save_checkpoint(path, ps);
    auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 16);
    try {
        load_checkpoint(path);
        FAIL("expected throw");
    } catch (const io_error& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("optimizer state survives a checkpoint round trip") {
    Rng rng(11);
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::randn({4}, rng));
    AdamW opt(0.05);
    for (int i = 0; i < 3; ++i) {
        for (auto& g : p.grad()) g = 0.3;
        opt.step(ps, 1e-3);
        p.zero_grad();
    }

    ParamStore state;
    opt.save_state(state, ps);
    AdamW restored(0.05);
    restored.load_state(state, ps);
    CHECK(restored.step_count() == 3);

    // identical subsequent trajectories
    ParamStore ps2;
    Tensor p2 = ps2.add("p", Tensor::from({4}, std::vector<double>(p.data().begin(), p.data().end())));
    for (int i = 0; i < 2; ++i) {
        for (auto& g : p.grad()) g = -0.1;
        for (auto& g : p2.grad()) g = -0.1;
        opt.step(ps, 2e-3);
        restored.step(ps2, 2e-3);
        p.zero_grad();
        p2.zero_grad();
    }
    for (int i = 0; i < 4; ++i) CHECK(p.data()[i] == p2.data()[i]);
}
