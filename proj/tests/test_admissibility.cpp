#include "aqsim/admissibility.hpp"
#include "aqsim/adversary.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace aqsim;

namespace {

Network single_link() { return build_network(std::vector<LinkSpec>{{0, 1, "e"}}); }

TraceEvent ev(Step t, const Path& p) {
    return TraceEvent{t, 0, 1, p};
}

// Brute-force load count over all integer windows, for cross-checking the
// pair-scan in check_strong.
std::int64_t brute_worst_excess(const InjectionTrace& trace, std::int64_t w, double r, double& excess) {
    excess = -1e300;
    std::int64_t worst_load = 0;
    const Step H = trace.horizon();
    std::map<LinkId, std::vector<Step>> times;
    for (const auto& e : trace.events)
        for (LinkId l : e.path->links) times[l].push_back(e.t);
    for (auto& [l, v] : times) std::sort(v.begin(), v.end());
    for (const auto& [l, v] : times) {
        for (Step T = w; T <= std::max<Step>(w, H); ++T)
            for (Step t = 0; t < std::max<Step>(1, H); ++t) {
                std::int64_t load = 0;
                for (Step s : v)
                    if (s >= t && s < t + T) ++load;
                const double ex = static_cast<double>(load) - static_cast<double>(T) * r;
                if (ex > excess) {
                    excess = ex;
                    worst_load = load;
                }
            }
    }
    return worst_load;
}

}  // namespace

TEST_CASE("weak_to_strong_params") {
    auto [w1, r1] = weak_to_strong_params(10, 0.5);
    CHECK(w1 == 40);
    CHECK(r1 == Catch::Approx(0.75));
    auto [w2, r2] = weak_to_strong_params(1, 0.2);
    CHECK(w2 == 1);
    CHECK(r2 == Catch::Approx(0.6));
    CHECK_THROWS_AS(weak_to_strong_params(10, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(weak_to_strong_params(10, 1.5), std::invalid_argument);
}

TEST_CASE("weak_to_strong_params identity w'(1-r')/w >= 2r") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> rd(0.05, 0.95);
    for (int i = 0; i < 200; ++i) {
        const double r = rd(rng);
        const std::int64_t w = 1 + static_cast<std::int64_t>(rng() % 50);
        auto [wp, rp] = weak_to_strong_params(w, r);
        CHECK(static_cast<double>(wp) * (1.0 - rp) / static_cast<double>(w) >= 2.0 * r - 1e-12);
    }
}

TEST_CASE("check_strong examples") {
    const Network net = single_link();
    const Path p{{0}};
    SECTION("one packet within bound") {
        InjectionTrace tr{{ev(0, p)}};
        auto rep = check_strong(tr, 2, 0.6);
        CHECK(rep.admissible);
        CHECK(rep.worst_load == 1);
        CHECK(rep.bound == Catch::Approx(1.2));
    }
    SECTION("two packets exceed T*r") {
        InjectionTrace tr{{ev(0, p), ev(1, p)}};
        auto rep = check_strong(tr, 2, 0.6);
        CHECK_FALSE(rep.admissible);
        CHECK(rep.worst_load == 2);
        CHECK(rep.worst_link == 0);
    }
    SECTION("empty trace admissible") {
        InjectionTrace tr;
        auto rep = check_strong(tr, 2, 0.6);
        CHECK(rep.admissible);
        CHECK(rep.worst_link == -1);
    }
    SECTION("missing path names the event") {
        InjectionTrace tr{{TraceEvent{0, 0, 1, std::nullopt}}};
        CHECK_THROWS_WITH(check_strong(tr, 2, 0.6), Catch::Matchers::ContainsSubstring("event 0"));
    }
}

TEST_CASE("check_weak examples") {
    const Network net = single_link();
    const Path p{{0}};
    SECTION("one per window is fine when wr >= 1") {
        InjectionTrace tr{{ev(0, p), ev(2, p)}};
        auto rep = check_weak(tr, 2, 0.6);
        CHECK(rep.admissible);
    }
    SECTION("two in one window with wr < 2") {
        InjectionTrace tr{{ev(0, p), ev(0, p)}};
        auto rep = check_weak(tr, 2, 0.6);
        CHECK_FALSE(rep.admissible);
        CHECK(rep.worst_load == 2);
        CHECK(rep.worst_window_start == 0);
        CHECK(rep.worst_window_length == 2);
    }
}

TEST_CASE("strong worst report matches brute force") {
    std::mt19937_64 rng(0xBEEF);
    for (int iter = 0; iter < 40; ++iter) {
        std::vector<LinkSpec> spec{{0, 1, "a"}, {1, 2, "b"}, {0, 1, "c"}};
        const Network net = build_network(spec);
        InjectionTrace tr;
        const int k = 2 + static_cast<int>(rng() % 8);
        for (int i = 0; i < k; ++i) {
            Path p;
            switch (rng() % 3) {
                case 0: p = Path{{0, 1}}; break;
                case 1: p = Path{{2, 1}}; break;
                default: p = Path{{1}}; break;
            }
            tr.events.push_back(TraceEvent{static_cast<Step>(rng() % 12), 0, 2, p});
        }
        std::stable_sort(tr.events.begin(), tr.events.end(),
                         [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
        const std::int64_t w = 1 + static_cast<std::int64_t>(rng() % 4);
        const double r = 0.3 + 0.1 * static_cast<double>(rng() % 5);
        auto rep = check_strong(tr, w, r);
        double brute_excess;
        const std::int64_t brute_load = brute_worst_excess(tr, w, r, brute_excess);
        CHECK(rep.excess() == Catch::Approx(brute_excess).margin(1e-12));
        CHECK(rep.worst_load == brute_load);
        CHECK(rep.admissible == (brute_excess <= 1e-12));
    }
}

TEST_CASE("Lemma 1 forward: strong implies weak") {
    std::mt19937_64 rng(11);
    std::vector<LinkSpec> spec{{0, 1, "a"}, {1, 2, "b"}, {2, 3, "c"}, {0, 2, "d"}};
    const Network net = build_network(spec);
    int strong_seen = 0;
    RandomAdversaryOptions sparse;
    sparse.picks_per_window = 1;
    sparse.max_batch = 1;
    sparse.window_density = 0.5;
    for (int iter = 0; iter < 300; ++iter) {
        auto tr = gen_random_admissible(net, 6, 0.2, 60, rng(), sparse);
        if (check_strong(tr, 6, 0.5).admissible) {
            ++strong_seen;
            CHECK(check_weak(tr, 6, 0.5).admissible);
        }
    }
    CHECK(strong_seen > 20);
}

TEST_CASE("Lemma 1 converse: weak implies strong at converted params") {
    std::mt19937_64 rng(12);
    std::vector<LinkSpec> spec{{0, 1, "a"}, {1, 2, "b"}, {2, 0, "c"}, {1, 0, "d"}, {2, 1, "e"}};
    const Network net = build_network(spec);
    const std::int64_t w = 8;
    const double r = 0.5;
    auto [wp, rp] = weak_to_strong_params(w, r);
    for (int iter = 0; iter < 300; ++iter) {
        auto tr = gen_random_admissible(net, w, r, 160, rng());
        REQUIRE(check_weak(tr, w, r).admissible);  // by construction
        CHECK(check_strong(tr, wp, rp).admissible);
    }
}
