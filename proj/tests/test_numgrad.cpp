#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "fd_oracle.hpp"
#include "lfs/checkpoint.hpp"
#include "lfs/init.hpp"
#include "lfs/optim.hpp"
#include "lfs/rng.hpp"
#include "lfs/tape.hpp"

using namespace lfs;
using namespace lfs::numgrad;

TEST_CASE("quadratic loss gradient") {
    ParamStore store;
    store.add("x", Array({2}, {1.0, 2.0}));
    Tape t(&store);
    auto x = t.param("x");
    auto loss = t.sum(t.mul(x, x));
    const double v = t.backward(loss);
    CHECK(v == doctest::Approx(5.0));
    CHECK(store.grad("x").data[0] == doctest::Approx(2.0));
    CHECK(store.grad("x").data[1] == doctest::Approx(4.0));
}

TEST_CASE("non-participating parameter has exactly zero gradient") {
    ParamStore store;
    store.add("w", Array::full({3, 3}, 0.7));
    store.add("u", Array({1}, {2.0}));
    Tape t(&store);
    (void)t.param("w");
    auto u = t.param("u");
    auto loss = t.add_scalar(t.scale(t.sum(u), 0.0), 5.0);
    const double v = t.backward(loss);
    CHECK(v == doctest::Approx(5.0));
    for (double g : store.grad("w").data) CHECK(g == 0.0);
}

TEST_CASE("two-layer MLP matches central finite differences") {
    Rng rng(7);
    ParamStore store;
    store.add("w1", orthogonal(8, 6, rng));
    store.add("b1", Array::zeros({6}));
    store.add("w2", orthogonal(6, 3, rng));
    store.add("b2", Array::zeros({3}));
    // nonzero biases so their gradients are exercised from a non-symmetric point
    for (auto& v : store.value("b1").data) v = 0.1 * rng.normal();
    for (auto& v : store.value("b2").data) v = 0.1 * rng.normal();
    Array x = gaussian({4, 8}, rng);
    Array tgt = gaussian({4, 3}, rng);

    auto loss_fn = [&]() {
        Tape t(&store);
        auto h = t.relu(t.affine(t.input(x), t.param("w1"), t.param("b1")));
        auto y = t.affine(h, t.param("w2"), t.param("b2"));
        auto d = t.sub(y, t.input(tgt));
        return t.scalar(t.mean(t.mul(d, d)));
    };
    store.zero_grads();
    {
        Tape t(&store);
        auto h = t.relu(t.affine(t.input(x), t.param("w1"), t.param("b1")));
        auto y = t.affine(h, t.param("w2"), t.param("b2"));
        auto d = t.sub(y, t.input(tgt));
        t.backward(t.mean(t.mul(d, d)));
    }
    auto rep = fd::compare_gradients(store, {"w1", "b1", "w2", "b2"}, loss_fn);
    CHECK_MESSAGE(rep.max_rel_err < 1e-4, "worst at ", rep.worst);
}

// every supported primitive against the finite-difference oracle
TEST_CASE("primitive gradients match finite differences over random trials") {
    Rng rng(123);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ParamStore store;
        store.add("a", gaussian({3, 4}, rng));
        store.add("b", gaussian({3, 4}, rng));
        store.add("w", gaussian({4, 5}, rng));
        store.add("v1", gaussian({6}, rng));
        store.add("v2", gaussian({6}, rng));
        store.add("cw", gaussian({2, 3, 3, 3}, rng, 0.5));
        store.add("cb", gaussian({2}, rng, 0.1));
        Array img = gaussian({2, 3, 6, 6}, rng);
        const int mode = trial % 5;

        auto build = [&](Tape& t) {
            auto a = t.param("a");
            auto b = t.param("b");
            switch (mode) {
                case 0: {
                    auto y = t.mul(t.add(a, b), t.sub(a, t.scale(b, 0.5)));
                    auto z = t.tanh_(t.add_scalar(y, 0.1));
                    return t.mean(t.mul(z, z));
                }
                case 1: {
                    auto y = t.relu(t.matmul(a, t.param("w")));
                    auto s = t.softmax(y, 0.7);
                    return t.mean(t.mul(s, s));
                }
                case 2: {
                    auto n = t.l2_normalize(a);
                    auto e = t.exp_(t.scale(n, 0.3));
                    auto l = t.log_(t.add_scalar(e, 1.0));
                    return t.sum(t.row_sum(l));
                }
                case 3: {
                    auto d = t.dot(t.param("v1"), t.param("v2"));
                    auto m = t.minimum(a, b);
                    auto cc = t.concat_cols(m, t.clamp(b, -0.5, 0.5));
                    return t.add(t.mean(cc), t.scale(d, 0.01));
                }
                default: {
                    auto c = t.conv2d(t.input(img), t.param("cw"), t.param("cb"), 2, 1);
                    auto f = t.reshape(c, {2, 2 * 3 * 3});
                    auto h = t.relu(f);
                    return t.mean(t.mul(h, h));
                }
            }
        };
        auto loss_fn = [&]() {
            Tape t(&store);
            return t.scalar(build(t));
        };
        store.zero_grads();
        {
            Tape t(&store);
            t.backward(build(t));
        }
        auto rep = fd::compare_gradients(store, {"a", "b", "w", "v1", "v2", "cw", "cb"}, loss_fn);
        worst = std::max(worst, rep.max_rel_err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("conv2d strided valid convolution matches hand computation") {
    ParamStore store;
    // 1x1x3x3 input, 1x1x2x2 kernel of ones, stride 1, no pad
    store.add("w", Array({1, 1, 2, 2}, {1.0, 1.0, 1.0, 1.0}));
    store.add("b", Array({1}, {0.5}));
    Array x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tape t(&store);
    auto y = t.conv2d(t.input(x), t.param("w"), t.param("b"), 1, 0);
    const Array& Y = t.val(y);
    REQUIRE(Y.shape == std::vector<int>({1, 1, 2, 2}));
    CHECK(Y.data[0] == doctest::Approx(1 + 2 + 4 + 5 + 0.5));
    CHECK(Y.data[1] == doctest::Approx(2 + 3 + 5 + 6 + 0.5));
    CHECK(Y.data[2] == doctest::Approx(4 + 5 + 7 + 8 + 0.5));
    CHECK(Y.data[3] == doctest::Approx(5 + 6 + 8 + 9 + 0.5));
}

TEST_CASE("l2_normalize examples") {
    ParamStore store;
    store.add("v", Array({2}, {3.0, 4.0}));
    Tape t(&store);
    auto y = t.l2_normalize(t.param("v"));
    CHECK(t.val(y).data[0] == doctest::Approx(0.6));
    CHECK(t.val(y).data[1] == doctest::Approx(0.8));

    // unit vector unchanged
    auto u = t.l2_normalize(t.input(Array({2}, {0.6, 0.8})));
    CHECK(t.val(u).data[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(t.val(u).data[1] == doctest::Approx(0.8).epsilon(1e-12));

    // random 128-dim vector has unit norm afterwards
    Rng rng(5);
    Array big = gaussian({128}, rng);
    auto n = t.l2_normalize(t.input(big));
    double s = 0.0;
    for (double x : t.val(n).data) s += x * x;
    CHECK(std::fabs(std::sqrt(s) - 1.0) < 1e-12);

    // idempotence within 1e-12
    auto nn = t.l2_normalize(n);
    for (size_t i = 0; i < t.val(n).data.size(); ++i)
        CHECK(std::fabs(t.val(nn).data[i] - t.val(n).data[i]) < 1e-12);

    CHECK_THROWS_AS((void)t.l2_normalize(t.input(Array::zeros({4}))), Error);
}

TEST_CASE("softmax with temperature") {
    Tape t;
    // equal scores: uniform over P entries
    auto u = t.softmax(t.input(Array::full({5}, 3.3)), 0.1);
    for (double p : t.val(u).data) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));

    // scores (2,0), tau=1
    auto p = t.softmax(t.input(Array({2}, {2.0, 0.0})), 1.0);
    const double e2 = std::exp(2.0);
    CHECK(t.val(p).data[0] == doctest::Approx(e2 / (e2 + 1.0)));
    CHECK(t.val(p).data[1] == doctest::Approx(1.0 / (e2 + 1.0)));
    CHECK(t.val(p).data[0] == doctest::Approx(0.8808).epsilon(1e-4));

    // low-temperature limit
    auto q = t.softmax(t.input(Array({2}, {2.0, 0.0})), 0.01);
    CHECK(t.val(q).data[0] > 0.999999);

    CHECK_THROWS_AS((void)t.softmax(t.input(Array({2}, {1.0, 2.0})), 0.0), Error);
    CHECK_THROWS_AS((void)t.softmax(t.input(Array({2}, {1.0, 2.0})), -1.0), Error);
}

TEST_CASE("softmax row-sum and shift invariance properties") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Array s = gaussian({4, 9}, rng, 3.0);
        Tape t;
        auto p = t.softmax(t.input(s), 0.5);
        Array shifted = s;
        const double c = rng.uniform(-5.0, 5.0);
        for (auto& v : shifted.data) v += c;
        auto p2 = t.softmax(t.input(shifted), 0.5);
        for (int r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (int j = 0; j < 9; ++j) sum += t.val(p).data[static_cast<size_t>(r) * 9 + j];
            CHECK(std::fabs(sum - 1.0) < 1e-10);
        }
        for (size_t i = 0; i < s.data.size(); ++i) CHECK(std::fabs(t.val(p).data[i] - t.val(p2).data[i]) < 1e-10);
    }
}

TEST_CASE("purity: identical inputs give bit-identical outputs") {
    Rng rng(99);
    Array x = gaussian({3, 7}, rng);
    auto run = [&]() {
        Tape t;
        auto y = t.softmax(t.l2_normalize(t.tanh_(t.input(x))), 0.3);
        return t.val(y).data;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("shape mismatch errors name both shapes") {
    Tape t;
    auto a = t.input(Array::zeros({2, 3}));
    auto b = t.input(Array::zeros({3, 2}));
    try {
        (void)t.add(a, b);
        FAIL("expected a shape error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(3,2)") != std::string::npos);
    }
}

TEST_CASE("checked mode flags non-finite intermediates and names the op") {
    Tape t(nullptr, true, true);
    auto x = t.input(Array({2}, {700.0, 800.0}));
    try {
        (void)t.exp_(x);  // overflows to inf
        FAIL("expected checked-mode failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("exp") != std::string::npos);
    }
    // unchecked tape lets it pass
    Tape t2(nullptr, true, false);
    CHECK_NOTHROW((void)t2.exp_(t2.input(Array({2}, {700.0, 800.0}))));
}

TEST_CASE("log clamps at 1e-12 and counts diagnostics") {
    Tape t;
    auto y = t.log_(t.input(Array({3}, {1.0, 0.0, 2.0})));
    CHECK(t.log_clamp_count() == 1);
    CHECK(t.val(y).data[1] == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("orthogonal init produces orthonormal columns") {
    Rng rng(3);
    Array w = orthogonal(8, 4, rng);
    for (int c1 = 0; c1 < 4; ++c1)
        for (int c2 = 0; c2 <= c1; ++c2) {
            double d = 0.0;
            for (int r = 0; r < 8; ++r) d += w.data[static_cast<size_t>(r) * 4 + c1] * w.data[static_cast<size_t>(r) * 4 + c2];
            CHECK(std::fabs(d - (c1 == c2 ? 1.0 : 0.0)) < 1e-10);
        }
}

TEST_CASE("adam minimizes a quadratic") {
    ParamStore store;
    store.add("x", Array({2}, {5.0, -3.0}));
    Adam opt(&store, {"x"}, 0.05);
    for (int i = 0; i < 2000; ++i) {
        store.zero_grads();
        Tape t(&store);
        auto x = t.param("x");
        t.backward(t.sum(t.mul(x, x)));
        opt.step();
    }
    CHECK(std::fabs(store.value("x").data[0]) < 1e-3);
    CHECK(std::fabs(store.value("x").data[1]) < 1e-3);
}

TEST_CASE("checkpoint round-trips parameters bit-exactly") {
    Rng rng(21);
    ParamStore a;
    a.add("conv_w", gaussian({4, 2, 3, 3}, rng));
    a.add("fc_b", gaussian({7}, rng));
    ParamStore b;
    b.add("proto", gaussian({5, 8}, rng));

    const std::string path = "ckpt_test.lfsc";
    save_checkpoint(path, {{"a/", &a}, {"b/", &b}});

    ParamStore a2;
    a2.add("conv_w", Array::zeros({4, 2, 3, 3}));
    a2.add("fc_b", Array::zeros({7}));
    ParamStore b2;
    b2.add("proto", Array::zeros({5, 8}));
    load_checkpoint(path, {{"a/", &a2}, {"b/", &b2}});

    for (size_t i = 0; i < a.value("conv_w").data.size(); ++i)
        CHECK(a.value("conv_w").data[i] == a2.value("conv_w").data[i]);
    for (size_t i = 0; i < b.value("proto").data.size(); ++i)
        CHECK(b.value("proto").data[i] == b2.value("proto").data[i]);

    // shape mismatch on load is an error
    ParamStore bad;
    bad.add("conv_w", Array::zeros({4, 2, 3, 2}));
    bad.add("fc_b", Array::zeros({7}));
    CHECK_THROWS_AS(load_checkpoint(path, {{"a/", &bad}}), Error);
    std::remove(path.c_str());
}

TEST_CASE("matmul_nt forward equals matmul with explicit transpose and grads pass FD") {
    Rng rng(31);
    ParamStore store;
    store.add("a", gaussian({3, 4}, rng));
    store.add("b", gaussian({5, 4}, rng));
    auto build = [&](Tape& t) {
        auto y = t.matmul_nt(t.param("a"), t.param("b"));
        auto s = t.softmax(y, 0.5);
        return t.mean(t.mul(s, y));
    };
    // forward check against manual transpose
    {
        Tape t(&store);
        auto y = t.matmul_nt(t.param("a"), t.param("b"));
        const Array& A = store.value("a");
        const Array& B = store.value("b");
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k)
                    s += A.data[static_cast<size_t>(i) * 4 + k] * B.data[static_cast<size_t>(j) * 4 + k];
                CHECK(t.val(y).data[static_cast<size_t>(i) * 5 + j] == doctest::Approx(s).epsilon(1e-12));
            }
    }
    store.zero_grads();
    {
        Tape t(&store);
        t.backward(build(t));
    }
    auto loss_fn = [&]() {
        Tape t(&store);
        return t.scalar(build(t));
    };
    auto rep = fd::compare_gradients(store, {"a", "b"}, loss_fn);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("tape gradient accumulates when a parameter is used twice") {
    ParamStore store;
    store.add("x", Array({1}, {3.0}));
    Tape t(&store);
    auto x = t.param("x");
    // f(x) = x*x + 2x ->  f' = 2x + 2 = 8
    auto loss = t.add(t.mul(x, x), t.scale(x, 2.0));
    t.backward(t.sum(loss));
    CHECK(store.grad("x").data[0] == doctest::Approx(8.0));
}
