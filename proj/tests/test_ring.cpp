#include "aqsim/ring.hpp"
#include "aqsim/engine.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace aqsim;

TEST_CASE("compute_ring_params evaluates the window formula") {
    const auto p = compute_ring_params(0.75, 8, 3, 0.9);
    CHECK(p.W == 211);
    CHECK(p.R == Catch::Approx(0.9375));
    CHECK(p.epsilon == Catch::Approx(0.25));
    CHECK(p.ghosts_per_hop() == static_cast<std::int64_t>(std::floor(3 * 0.75 * 211)));
    CHECK_THROWS_AS(compute_ring_params(0.75, 8, 3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(compute_ring_params(1.0, 8, 3, 0.9), std::invalid_argument);
}

TEST_CASE("W shrinks as beta approaches 1") {
    const auto a = compute_ring_params(0.75, 8, 3, 0.5);
    const auto b = compute_ring_params(0.75, 8, 3, 0.99);
    CHECK(b.W < a.W);
}

TEST_CASE("single rings are link disjoint and paths are valid") {
    const auto ring = make_parallel_ring(5, 3);
    CHECK(ring.net.link_count() == 15);
    std::set<LinkId> seen;
    for (int j = 1; j <= 3; ++j)
        for (int h = 0; h < 5; ++h) {
            const LinkId e = ring.link_id(h, j);
            CHECK(ring.ring_of(e) == j);
            CHECK(ring.hop_of(e) == h);
            CHECK_FALSE(seen.count(e));
            seen.insert(e);
        }
    const Path p = ring_path(ring, 3, 1, 2);  // wraps around
    CHECK_NOTHROW(validate_path(ring.net, p));
    CHECK(p.size() == 3);
    CHECK(ring.net.link(p.links.front()).tail == 3);
    CHECK(ring.net.link(p.links.back()).head == 1);
}

TEST_CASE("ring_hops wraps modulo n") {
    CHECK(ring_hops(4, 2, 1) == std::vector<int>{2, 3, 0});
    CHECK(ring_hops(4, 0, 1) == std::vector<int>{0});
    CHECK_THROWS_AS(ring_hops(4, 1, 1), std::invalid_argument);
}

TEST_CASE("route_random: c = 1 always picks ring 1") {
    RandomRingRouter router(1, 7);
    for (int i = 0; i < 32; ++i) CHECK(router.route() == 1);
}

TEST_CASE("route_random uniformity (statistical)") {
    RandomRingRouter router(3, 1234);
    const int N = 100000;
    std::map<int, int> freq;
    for (int i = 0; i < N; ++i) ++freq[router.route()];
    const double expect = N / 3.0;
    const double sigma = std::sqrt(N * (1.0 / 3.0) * (2.0 / 3.0));
    for (int j = 1; j <= 3; ++j) {
        CHECK(std::abs(freq[j] - expect) <= 3.0 * sigma);
    }
}

TEST_CASE("offline derandomization keeps every load under (1-eps^2)W") {
    const auto ring = make_parallel_ring(8, 3);
    const auto params = compute_ring_params(0.75, 8, 3, 0.9);
    std::mt19937_64 rng(5);
    const auto cap = static_cast<std::int64_t>(std::floor(params.load_bound()));
    for (int iter = 0; iter < 4; ++iter) {
        const auto trace = gen_ring_trace(ring, params, 1, rng());
        std::vector<std::pair<NodeId, NodeId>> pkts;
        for (const auto& ev : trace.events) pkts.emplace_back(ev.src, ev.dst);
        RingDecisionStats st;
        const auto rings = route_offline_derand(ring, params, pkts, &st);
        REQUIRE(rings.size() == pkts.size());
        CHECK(st.h_monotone);
        CHECK(st.log_h_start <= std::log(params.beta) + 1e-9);
        CHECK(st.max_link_load <= cap);
        const auto loads = ring_loads(ring, pkts, rings);
        CHECK(*std::max_element(loads.begin(), loads.end()) == st.max_link_load);
    }
}

TEST_CASE("offline single packet takes the lowest ring") {
    const auto ring = make_parallel_ring(8, 3);
    const auto params = compute_ring_params(0.75, 8, 3, 0.9);
    std::vector<std::pair<NodeId, NodeId>> pkts{{0, 4}};
    const auto rings = route_offline_derand(ring, params, pkts);
    CHECK(rings == std::vector<int>{1});
}

TEST_CASE("online router: ghost swaps are exactly neutral and loads stay bounded") {
    const auto ring = make_parallel_ring(8, 3);
    const auto params = compute_ring_params(0.75, 8, 3, 0.9);
    const auto cap = static_cast<std::int64_t>(std::floor(params.load_bound()));
    OnlineRingRouter router(ring, params);
    std::mt19937_64 rng(17);
    const auto trace = gen_ring_trace(ring, params, 3, rng());
    for (const auto& ev : trace.events) {
        const int ring_choice = router.route(ev.t, ev.src, ev.dst);
        CHECK(ring_choice >= 1);
        CHECK(ring_choice <= 3);
    }
    router.advance_to(3 * params.W);
    REQUIRE(router.completed_intervals().size() >= 3);
    for (const auto& st : router.completed_intervals()) {
        CHECK(st.h_monotone);
        CHECK(st.max_ghost_swap_delta <= 1e-12);
        CHECK(st.max_link_load <= cap);
        CHECK(st.log_h_start <= std::log(params.beta) + 1e-9);
    }
}

TEST_CASE("online router flags inadmissible streams by ghost underflow") {
    const auto ring = make_parallel_ring(4, 2);
    const auto params = compute_ring_params(0.5, 4, 2, 0.9);
    OnlineRingRouter router(ring, params);
    const std::int64_t ghosts = params.ghosts_per_hop();
    bool threw = false;
    for (std::int64_t i = 0; i <= ghosts; ++i) {
        try {
            router.route(0, 0, 1);
        } catch (const std::runtime_error&) {
            threw = true;
            break;
        }
    }
    CHECK(threw);
}

TEST_CASE("empty interval: ghosts discarded, zero load") {
    const auto ring = make_parallel_ring(8, 3);
    const auto params = compute_ring_params(0.75, 8, 3, 0.9);
    OnlineRingRouter router(ring, params);
    const auto st = router.finish_interval();
    CHECK(st.max_link_load == 0);
    CHECK(st.log_h_end <= st.log_h_start);  // discarding ghosts can only shrink h
}

TEST_CASE("stability: greedy schedulers stay bounded on online-derandomized paths") {
    const auto ring = make_parallel_ring(8, 3);
    const auto params = compute_ring_params(0.75, 8, 3, 0.9);
    const std::int64_t intervals = 10;
    std::mt19937_64 rng(23);
    const auto trace = gen_ring_trace(ring, params, intervals, rng(), 0.8);

    for (auto rule : {SchedRule::FIFO, SchedRule::NTG}) {
        OnlineRingRouter router(ring, params);
        EngineOptions opts;
        opts.rule = rule;
        Engine eng(ring.net, opts);
        std::size_t next = 0;
        int id = 0;
        std::vector<std::int64_t> interval_peak(static_cast<std::size_t>(intervals), 0);
        for (Step s = 0; s < intervals * params.W; ++s) {
            while (next < trace.events.size() && trace.events[next].t == s) {
                const auto& ev = trace.events[next];
                const int ring_choice = router.route(ev.t, ev.src, ev.dst);
                SimPacket p;
                p.id = id++;
                p.inject_time = ev.t;
                p.src = ev.src;
                p.dst = ev.dst;
                p.path = ring_path(ring, ev.src, ev.dst, ring_choice).links;
                eng.inject(std::move(p));
                ++next;
            }
            eng.step();
            auto& peak = interval_peak[static_cast<std::size_t>(s / params.W)];
            peak = std::max(peak, eng.total_queued());
        }
        // bounded: the per-interval peak sequence must not grow monotonically
        bool strictly_increasing = true;
        for (std::size_t k = 1; k < interval_peak.size(); ++k)
            if (interval_peak[k] <= interval_peak[k - 1]) strictly_increasing = false;
        CHECK_FALSE(strictly_increasing);
    }
}
