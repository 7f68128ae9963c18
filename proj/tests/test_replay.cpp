#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lfs/replay.hpp"

using namespace lfs;
using namespace lfs::replay;
using framekit::Frame;
using framekit::Observation;
using framekit::SyntheticPair;

namespace {

Observation make_obs(int64_t t, double fill, bool synthetic = false) {
    Frame f1(8, 8, 1, t - 2), f2(8, 8, 1, t - 1), f3(8, 8, 1, t);
    for (auto* f : {&f1, &f2, &f3})
        for (auto& v : f->px) v = fill;
    Observation o = framekit::stack_frames(f1, f2, f3);
    o.synthetic = synthetic;
    return o;
}

Transition make_transition(int64_t t, double fill) {
    Transition tr;
    tr.prev = make_obs(t, fill);
    tr.next = make_obs(t + 1, fill);
    tr.action = {0.1, -0.2};
    tr.reward = fill;
    tr.done = false;
    return tr;
}

}  // namespace

TEST_CASE("push grows the buffer up to capacity then evicts the oldest") {
    RingBuffer<Transition> buf(5);
    buf.push(make_transition(2, 0.0));
    CHECK(buf.size() == 1);
    for (int i = 1; i <= 5; ++i) buf.push(make_transition(2 + i, static_cast<double>(i) / 10));
    CHECK(buf.size() == 5);
    // the first item (reward 0.0) must be gone
    bool found = false;
    for (int i = 0; i < buf.size(); ++i)
        if (buf.at(i).reward == 0.0) found = true;
    CHECK(!found);
}

TEST_CASE("default capacity of 40000 applies to both buffers via the config default") {
    // the table default; construction at this capacity must work
    RingBuffer<Transition> rl(40000);
    RingBuffer<SyntheticPair> aux(40000);
    CHECK(rl.capacity() == 40000);
    CHECK(aux.capacity() == 40000);
}

TEST_CASE("sampling a single-item buffer with replacement returns that item repeatedly") {
    RingBuffer<Transition> buf(4);
    buf.push(make_transition(2, 0.7));
    Rng rng(3);
    auto batch = buf.sample_batch(3, rng);
    REQUIRE(batch.size() == 3);
    for (const auto& tr : batch) CHECK(tr.reward == 0.7);
}

TEST_CASE("sampling an empty buffer fails with a defer instruction") {
    RingBuffer<Transition> buf(4);
    Rng rng(3);
    try {
        (void)buf.sample_batch(2, rng);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("defer") != std::string::npos);
    }
}

TEST_CASE("empirical sampling frequencies are uniform (chi-square within 3 sigma)") {
    const int n = 20;
    RingBuffer<Transition> buf(n);
    for (int i = 0; i < n; ++i) buf.push(make_transition(2 + i, static_cast<double>(i)));
    Rng rng(11);
    const int draws = 100000;
    std::vector<int> counts(n, 0);
    for (int d = 0; d < draws; ++d) counts[static_cast<size_t>(buf.sample_indices(1, rng)[0])]++;
    // chi-square with n-1 dof: mean n-1, variance 2(n-1)
    double chi2 = 0.0;
    const double expect = static_cast<double>(draws) / n;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    const double dof = n - 1;
    CHECK(chi2 < dof + 3.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("type segregation: B_rl rejects synthetic observations, B_a rejects real pairs") {
    RingBuffer<Transition> rl(4);
    Transition bad = make_transition(3, 0.5);
    bad.prev.synthetic = true;
    CHECK_THROWS_AS(rl.push(bad), Error);

    Transition gap = make_transition(3, 0.5);
    gap.next.t = 10;
    CHECK_THROWS_AS(rl.push(gap), Error);

    RingBuffer<SyntheticPair> aux(4);
    SyntheticPair good;
    good.prev = make_obs(5, 0.2, true);
    good.next = make_obs(6, 0.2, true);
    CHECK_NOTHROW(aux.push(good));
    SyntheticPair wrong;
    wrong.prev = make_obs(5, 0.2, false);
    wrong.next = make_obs(6, 0.2, true);
    CHECK_THROWS_AS(aux.push(wrong), Error);
}

TEST_CASE("buffer contents and samples are deterministic functions of inputs and seed") {
    auto run = [&]() {
        RingBuffer<Transition> buf(8);
        Rng rng(77);
        std::vector<double> trace;
        for (int i = 0; i < 30; ++i) {
            buf.push(make_transition(2 + i, static_cast<double>(i)));
            if (buf.size() >= 3)
                for (const auto& tr : buf.sample_batch(3, rng)) trace.push_back(tr.reward);
        }
        return trace;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
