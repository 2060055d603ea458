#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "aqsim/model.hpp"

namespace aqsim {

// A ring of n nodes with c parallel directed links per hop. The c links of
// hop i (node i -> i+1 mod n) carry ring labels 1..c; the links labeled j
// across all hops form the j-th single ring, and distinct single rings are
// link disjoint.
struct ParallelRing {
    Network net;
    int n = 0;
    int c = 0;

    LinkId link_id(int hop, int ring) const { return hop * c + ring - 1; }
    int hop_of(LinkId e) const { return static_cast<int>(e) / c; }
    int ring_of(LinkId e) const { return static_cast<int>(e) % c + 1; }
};

inline ParallelRing make_parallel_ring(int n, int c) {
    if (n < 2 || c < 1) throw std::invalid_argument("ring needs n >= 2, c >= 1");
    std::vector<LinkSpec> spec;
    for (int hop = 0; hop < n; ++hop)
        for (int ring = 1; ring <= c; ++ring)
            spec.push_back({hop, (hop + 1) % n, "r" + std::to_string(ring) + "h" + std::to_string(hop)});
    ParallelRing pr;
    pr.net = build_network(n, spec);
    pr.n = n;
    pr.c = c;
    return pr;
}

struct RingParams {
    double r = 0.0;
    double epsilon = 0.0;  // 1 - r
    double beta = 0.0;
    int n = 0;
    int c = 0;
    std::int64_t W = 0;
    double R = 0.0;  // 1 - epsilon^2

    std::int64_t ghosts_per_hop() const {
        return static_cast<std::int64_t>(std::floor(static_cast<double>(c) * r * static_cast<double>(W)));
    }
    double load_bound() const { return R * static_cast<double>(W); }  // (1+eps) r W
};

inline RingParams compute_ring_params(double r, int n, int c, double beta) {
    if (!(r > 0.0) || r >= 1.0) throw std::invalid_argument("r must be in (0,1)");
    if (!(beta > 0.0) || beta >= 1.0) throw std::invalid_argument("beta must be in (0,1)");
    if (n < 2 || c < 1) throw std::invalid_argument("bad ring shape");
    RingParams p;
    p.r = r;
    p.epsilon = 1.0 - r;
    p.beta = beta;
    p.n = n;
    p.c = c;
    p.W = static_cast<std::int64_t>(std::ceil(
        3.0 / (r * p.epsilon * p.epsilon) * std::log(static_cast<double>(n) * c / beta)));
    p.R = 1.0 - p.epsilon * p.epsilon;
    return p;
}

// Hops crossed by a packet from a to b: a, a+1, ..., b-1 (mod n).
inline std::vector<int> ring_hops(int n, NodeId a, NodeId b) {
    if (a == b) throw std::invalid_argument("ring packet needs src != dst");
    std::vector<int> hops;
    for (int h = a; h != b; h = (h + 1) % n) hops.push_back(h);
    return hops;
}

inline Path ring_path(const ParallelRing& ring, NodeId a, NodeId b, int ring_label) {
    Path p;
    for (int h : ring_hops(ring.n, a, b)) p.links.push_back(ring.link_id(h, ring_label));
    return p;
}

// Uniform independent single-ring choice, seeded.
class RandomRingRouter {
public:
    RandomRingRouter(int c, std::uint64_t seed) : c_(c), rng_(seed) {}
    int route() { return 1 + static_cast<int>(rng_() % static_cast<std::uint64_t>(c_)); }

private:
    int c_;
    std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Derandomized ring choice via the method of conditional expectations
// ---------------------------------------------------------------------------

// Per-link state is a pair of integer counts: decided packets on the link
// and undecided packets that could cross it. The estimator in log space is
//   log h = logsumexp_e [ n_e log(1+eps) + u_e log(1+eps/c)
//                          - (1+eps) r W log(1+eps) ].
// An undecided packet contributes its true factor expectation 1 + eps/c on
// every parallel link of each hop it crosses, so deciding the minimizing
// ring never increases h. Ghost swaps leave (n_e, u_e) untouched and are
// therefore exactly neutral.
class RingDerandomizer {
public:
    RingDerandomizer(const ParallelRing& ring, const RingParams& params)
        : ring_(&ring), params_(params) {
        n_dec_.assign(static_cast<std::size_t>(ring.net.link_count()), 0);
        undec_.assign(static_cast<std::size_t>(ring.net.link_count()), 0);
        log_dec_ = std::log1p(params.epsilon);
        log_undec_ = std::log1p(params.epsilon / static_cast<double>(params.c));
        offset_ = (1.0 + params.epsilon) * params.r * static_cast<double>(params.W) * log_dec_;
    }

    void add_undecided_hops(std::span<const int> hops, std::int64_t count = 1) {
        for (int h : hops)
            for (int ring = 1; ring <= params_.c; ++ring)
                undec_[static_cast<std::size_t>(ring_->link_id(h, ring))] += count;
    }

    void remove_undecided_hops(std::span<const int> hops, std::int64_t count = 1) {
        for (int h : hops)
            for (int ring = 1; ring <= params_.c; ++ring) {
                auto& u = undec_[static_cast<std::size_t>(ring_->link_id(h, ring))];
                u -= count;
                if (u < 0) throw std::logic_error("undecided count went negative");
            }
    }

    void clear_undecided() { std::fill(undec_.begin(), undec_.end(), 0); }

    double log_h() const {
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> ls(n_dec_.size());
        for (std::size_t i = 0; i < n_dec_.size(); ++i) {
            ls[i] = static_cast<double>(n_dec_[i]) * log_dec_ + static_cast<double>(undec_[i]) * log_undec_ -
                    offset_;
            mx = std::max(mx, ls[i]);
        }
        double s = 0.0;
        for (double v : ls) s += std::exp(v - mx);
        return mx + std::log(s);
    }

    // Move one undecided packet with these hops to a decided ring chosen to
    // minimize h; ties take the lowest ring label.
    int decide(std::span<const int> hops) {
        remove_undecided_hops(hops);
        int best = 1;
        double best_h = std::numeric_limits<double>::infinity();
        for (int ring = 1; ring <= params_.c; ++ring) {
            apply_decided(hops, ring, +1);
            const double h = log_h();
            apply_decided(hops, ring, -1);
            if (h < best_h) {
                best_h = h;
                best = ring;
            }
        }
        apply_decided(hops, best, +1);
        return best;
    }

    std::int64_t decided_load(LinkId e) const { return n_dec_[static_cast<std::size_t>(e)]; }
    std::int64_t max_decided_load() const { return *std::max_element(n_dec_.begin(), n_dec_.end()); }

    void reset() {
        std::fill(n_dec_.begin(), n_dec_.end(), 0);
        std::fill(undec_.begin(), undec_.end(), 0);
    }

private:
    void apply_decided(std::span<const int> hops, int ring, std::int64_t delta) {
        for (int h : hops) n_dec_[static_cast<std::size_t>(ring_->link_id(h, ring))] += delta;
    }

    const ParallelRing* ring_;
    RingParams params_;
    std::vector<std::int64_t> n_dec_;
    std::vector<std::int64_t> undec_;
    double log_dec_ = 0.0, log_undec_ = 0.0, offset_ = 0.0;
};

struct RingDecisionStats {
    bool h_monotone = true;
    double max_h_increase = -std::numeric_limits<double>::infinity();
    double max_ghost_swap_delta = 0.0;
    double log_h_start = 0.0;
    double log_h_end = 0.0;
    std::int64_t max_link_load = 0;
    std::vector<std::int64_t> loads;
};

// Offline mode: the W-interval's packets are all known (held until the
// interval's last step); route them in order.
inline std::vector<int> route_offline_derand(const ParallelRing& ring, const RingParams& params,
                                             std::span<const std::pair<NodeId, NodeId>> packets,
                                             RingDecisionStats* stats = nullptr) {
    RingDerandomizer d(ring, params);
    std::vector<std::vector<int>> hops;
    hops.reserve(packets.size());
    for (const auto& [a, b] : packets) {
        hops.push_back(ring_hops(ring.n, a, b));
        d.add_undecided_hops(hops.back());
    }
    RingDecisionStats st;
    st.log_h_start = d.log_h();
    double prev = st.log_h_start;
    std::vector<int> rings;
    rings.reserve(packets.size());
    for (const auto& h : hops) {
        rings.push_back(d.decide(h));
        const double now = d.log_h();
        st.max_h_increase = std::max(st.max_h_increase, now - prev);
        if (now > prev + 1e-12) st.h_monotone = false;
        prev = now;
    }
    st.log_h_end = prev;
    st.max_link_load = packets.empty() ? 0 : d.max_decided_load();
    for (LinkId e = 0; e < ring.net.link_count(); ++e) st.loads.push_back(d.decided_load(e));
    if (stats) *stats = st;
    return rings;
}

// Online mode: ghosts stand in for future packets. Every injection swaps
// ghosts (one per crossed hop) for the real packet, then fixes its ring.
class OnlineRingRouter {
public:
    OnlineRingRouter(const ParallelRing& ring, const RingParams& params)
        : ring_(&ring), params_(params), derand_(ring, params) {
        start_interval();
    }

    // Packets must arrive in non-decreasing time order.
    int route(Step time, NodeId src, NodeId dst) {
        advance_to(time);
        const auto hops = ring_hops(ring_->n, src, dst);
        for (int h : hops) {
            auto& g = ghosts_[static_cast<std::size_t>(h)];
            if (g <= 0)
                throw std::runtime_error("ghost pool underflow at hop " + std::to_string(h) +
                                         ": injections are not (w,r)-admissible");
            --g;
        }
        // the swap replaces ghosts by the packet hop for hop; per-link
        // undecided counts are untouched, so h is exactly unchanged
        const double before = derand_.log_h();
        derand_.remove_undecided_hops(hops);
        derand_.add_undecided_hops(hops);
        const double after = derand_.log_h();
        stats_.max_ghost_swap_delta = std::max(stats_.max_ghost_swap_delta, std::abs(after - before));

        const int ring = derand_.decide(hops);
        const double now = derand_.log_h();
        stats_.max_h_increase = std::max(stats_.max_h_increase, now - prev_log_h_);
        if (now > prev_log_h_ + 1e-12) stats_.h_monotone = false;
        prev_log_h_ = now;
        return ring;
    }

    void advance_to(Step time) {
        const std::int64_t target = time / params_.W;
        while (interval_ < target) finish_interval();
    }

    // Close the current interval: discard ghosts (h can only drop), record
    // loads, reset for the next interval.
    RingDecisionStats finish_interval() {
        derand_.clear_undecided();
        const double after_discard = derand_.log_h();
        if (after_discard > prev_log_h_ + 1e-12) stats_.h_monotone = false;
        stats_.log_h_end = after_discard;
        stats_.max_link_load = derand_.max_decided_load();
        for (LinkId e = 0; e < ring_->net.link_count(); ++e) stats_.loads.push_back(derand_.decided_load(e));
        completed_.push_back(stats_);
        RingDecisionStats out = stats_;
        ++interval_;
        start_interval();
        return out;
    }

    std::int64_t interval_index() const { return interval_; }
    const std::vector<RingDecisionStats>& completed_intervals() const { return completed_; }
    std::int64_t ghosts_remaining(int hop) const { return ghosts_[static_cast<std::size_t>(hop)]; }
    double current_log_h() const { return derand_.log_h(); }

private:
    void start_interval() {
        derand_.reset();
        ghosts_.assign(static_cast<std::size_t>(ring_->n), params_.ghosts_per_hop());
        std::vector<int> all_hops(static_cast<std::size_t>(ring_->n));
        for (int h = 0; h < ring_->n; ++h) all_hops[static_cast<std::size_t>(h)] = h;
        derand_.add_undecided_hops(all_hops, params_.ghosts_per_hop());
        stats_ = RingDecisionStats{};
        stats_.log_h_start = derand_.log_h();
        prev_log_h_ = stats_.log_h_start;
    }

    const ParallelRing* ring_;
    RingParams params_;
    RingDerandomizer derand_;
    std::vector<std::int64_t> ghosts_;
    std::int64_t interval_ = 0;
    RingDecisionStats stats_;
    double prev_log_h_ = 0.0;
    std::vector<RingDecisionStats> completed_;
};

// ---------------------------------------------------------------------------
// Ring adversary (admissible by construction)
// ---------------------------------------------------------------------------

// Per W-interval, per hop, at most c*floor(r*W) crossings: splitting each
// hop's packets evenly across the c rings then stays within floor(r*W) per
// link, so admissible paths exist.
inline InjectionTrace gen_ring_trace(const ParallelRing& ring, const RingParams& params,
                                     std::int64_t intervals, std::uint64_t seed,
                                     double utilization = 0.9) {
    std::mt19937_64 rng(seed);
    const auto budget = static_cast<std::int64_t>(
        std::floor(static_cast<double>(ring.c) * std::floor(params.r * static_cast<double>(params.W)) *
                   utilization));
    InjectionTrace trace;
    std::vector<std::int64_t> used(static_cast<std::size_t>(ring.n), 0);
    for (std::int64_t iv = 0; iv < intervals; ++iv) {
        std::fill(used.begin(), used.end(), 0);
        for (int attempt = 0; attempt < 64 * ring.n; ++attempt) {
            const NodeId a = static_cast<NodeId>(rng() % static_cast<std::uint64_t>(ring.n));
            const int span = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(ring.n - 1));
            const NodeId b = static_cast<NodeId>((a + span) % ring.n);
            const auto hops = ring_hops(ring.n, a, b);
            std::int64_t room = budget;
            for (int h : hops) room = std::min(room, budget - used[static_cast<std::size_t>(h)]);
            if (room <= 0) continue;
            const std::int64_t count = 1 + static_cast<std::int64_t>(
                                               rng() % static_cast<std::uint64_t>(std::min<std::int64_t>(room, 8)));
            for (std::int64_t k = 0; k < count; ++k) {
                TraceEvent ev;
                ev.t = iv * params.W + static_cast<Step>(rng() % static_cast<std::uint64_t>(params.W));
                ev.src = a;
                ev.dst = b;
                trace.events.push_back(std::move(ev));
            }
            for (int h : hops) used[static_cast<std::size_t>(h)] += count;
        }
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
    return trace;
}

// Loads from an explicit assignment, per link, one W-interval.
inline std::vector<std::int64_t> ring_loads(const ParallelRing& ring,
                                            std::span<const std::pair<NodeId, NodeId>> packets,
                                            std::span<const int> rings) {
    std::vector<std::int64_t> loads(static_cast<std::size_t>(ring.net.link_count()), 0);
    for (std::size_t i = 0; i < packets.size(); ++i)
        for (int h : ring_hops(ring.n, packets[i].first, packets[i].second))
            ++loads[static_cast<std::size_t>(ring.link_id(h, rings[i]))];
    return loads;
}

}  // namespace aqsim
