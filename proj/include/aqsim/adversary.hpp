#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "aqsim/admissibility.hpp"
#include "aqsim/engine.hpp"
#include "aqsim/model.hpp"
#include "aqsim/shortest_path.hpp"
#include "aqsim/source_routing.hpp"

namespace aqsim {

// ---------------------------------------------------------------------------
// Random weakly admissible adversary (test harness)
// ---------------------------------------------------------------------------

struct RandomAdversaryOptions {
    int path_pool = 12;          // candidate paths sampled up front
    int picks_per_window = 3;    // path draws attempted per window
    int max_batch = 3;           // packets per draw
    double window_density = 1.0; // probability a window gets injections at all
};

// Emits a path-annotated trace that is weakly (w,r)-admissible by
// construction: within each partition window every link carries at most
// floor(w*r) paths.
inline InjectionTrace gen_random_admissible(const Network& net, std::int64_t w, double r, Step horizon,
                                            std::uint64_t seed, RandomAdversaryOptions opts = {}) {
    if (!(r > 0.0) || r >= 1.0) throw std::invalid_argument("gen_random_admissible requires 0 < r < 1");
    if (w < 1) throw std::invalid_argument("window must be >= 1");
    std::mt19937_64 rng(seed);
    const auto budget = static_cast<std::int64_t>(std::floor(static_cast<double>(w) * r));
    InjectionTrace trace;
    if (budget == 0 || net.node_count() < 2) return trace;

    std::uniform_int_distribution<int> vd(0, net.node_count() - 1);
    std::uniform_real_distribution<double> wd(0.01, 1.0);
    std::vector<Path> pool;
    std::vector<double> weights(static_cast<std::size_t>(net.link_count()));
    for (int attempt = 0; attempt < 8 * opts.path_pool && static_cast<int>(pool.size()) < opts.path_pool;
         ++attempt) {
        NodeId s = vd(rng), d = vd(rng);
        if (s == d) continue;
        for (double& x : weights) x = wd(rng);
        auto p = shortest_path(net, weights, s, d);
        if (!p || p->empty()) continue;
        if (std::find(pool.begin(), pool.end(), *p) == pool.end()) pool.push_back(std::move(*p));
    }
    if (pool.empty()) return trace;

    std::vector<std::int64_t> used(static_cast<std::size_t>(net.link_count()), 0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (Step win = 0; win * w < horizon; ++win) {
        std::fill(used.begin(), used.end(), 0);
        if (u01(rng) > opts.window_density) continue;
        for (int pick = 0; pick < opts.picks_per_window; ++pick) {
            const Path& p = pool[rng() % pool.size()];
            std::int64_t room = budget;
            for (LinkId e : p.links) room = std::min(room, budget - used[static_cast<std::size_t>(e)]);
            if (room <= 0) continue;
            const std::int64_t count = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(
                                               std::min<std::int64_t>(room, opts.max_batch)));
            for (std::int64_t k = 0; k < count; ++k) {
                TraceEvent ev;
                ev.t = win * w + static_cast<Step>(rng() % static_cast<std::uint64_t>(w));
                ev.src = net.link(p.links.front()).tail;
                ev.dst = net.link(p.links.back()).head;
                ev.path = p;
                trace.events.push_back(std::move(ev));
            }
            for (LinkId e : p.links) used[static_cast<std::size_t>(e)] += count;
        }
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
    return trace;
}

// ---------------------------------------------------------------------------
// Network G and the instability constructions
// ---------------------------------------------------------------------------

// Two symmetric halves. In half j: e_j: v_j->w_j, then a fork f_j: w_j->u_j
// and f'_j: w_j->u'_j, rejoining the other half via g_j: u_j->v_{1-j} and
// g'_j: u'_j->v_{1-j}. This is the minimal topology under which every step
// of the instability argument is well-typed; the growth rates it produces
// match the claimed bounds, which is what validates the reconstruction.
struct NetworkG {
    Network net;
    NodeId v[2], w[2], u[2], up[2];
    LinkId e[2], f[2], fp[2], g[2], gp[2];
};

inline NetworkG make_network_g() {
    NetworkG G;
    G.v[0] = 0; G.w[0] = 1; G.u[0] = 2; G.up[0] = 3;
    G.v[1] = 4; G.w[1] = 5; G.u[1] = 6; G.up[1] = 7;
    std::vector<LinkSpec> spec;
    for (int j = 0; j < 2; ++j) {
        spec.push_back({G.v[j], G.w[j], "e" + std::to_string(j)});
        spec.push_back({G.w[j], G.u[j], "f" + std::to_string(j)});
        spec.push_back({G.w[j], G.up[j], "f'" + std::to_string(j)});
        spec.push_back({G.u[j], G.v[1 - j], "g" + std::to_string(j)});
        spec.push_back({G.up[j], G.v[1 - j], "g'" + std::to_string(j)});
    }
    G.net = build_network(8, spec);
    for (int j = 0; j < 2; ++j) {
        G.e[j] = 5 * j;
        G.f[j] = 5 * j + 1;
        G.fp[j] = 5 * j + 2;
        G.g[j] = 5 * j + 3;
        G.gp[j] = 5 * j + 4;
    }
    return G;
}

struct InstabilityOptions {
    double r = 0.95;
    std::int64_t s0 = 1000;
    int phases = 5;
    bool ntg = false;          // drop subphase (3); requires r > 1/sqrt(2)
    bool use_router = true;    // false: simulate along the adversary's nominal paths
    // Router configuration. Short routing phases keep the congestion view
    // fresh across the adversary's phases, which keeps the fork split
    // balanced; the growth bound is insensitive to the rest.
    double route_r = 0.5;
    double route_R = 0.75;
    std::int64_t route_w = 2;
    std::int64_t queue_cap = 8'000'000;
};

struct PhaseRecord {
    int index = 0;
    int half = 0;
    Step start_step = 0;
    Step end_step = 0;
    std::int64_t s_start = 0;   // measured carried-over set at phase start
    std::int64_t x_count = 0;
    std::int64_t y_count = 0;
    std::int64_t x_prime = 0;
    std::int64_t z_count = 0;
    std::int64_t total_queue_end = 0;
};

struct InstabilityResult {
    std::vector<PhaseRecord> phases;
    std::vector<std::int64_t> s_series;      // s at start of phase 1,2,... plus one final measurement
    std::vector<std::int64_t> queue_series;  // total queue at each phase end
    InjectionTrace trace;                    // everything injected, with nominal admissible paths
    std::vector<std::pair<Step, Step>> phase_bounds;
    Step burst_step = 0;
};

namespace detail {

// Token-paced injection times: k-th packet of a rate-r stream starting at
// `start` goes in at start + ceil((k+1)/r) - 1, giving floor(r*len) packets
// within len steps.
class RateStream {
public:
    RateStream(NodeId src, NodeId dst, Path nominal, Step start, Step len, double r)
        : src_(src), dst_(dst), nominal_(std::move(nominal)), start_(start), len_(len), r_(r) {}

    bool due(Step now) const {
        if (now < start_ || now >= start_ + len_) return false;
        const double next = std::ceil(static_cast<double>(k_ + 1) / r_) - 1.0;
        return static_cast<Step>(next) == now - start_;
    }

    void advance() { ++k_; }
    NodeId src() const { return src_; }
    NodeId dst() const { return dst_; }
    const Path& nominal() const { return nominal_; }
    std::int64_t emitted() const { return k_; }

private:
    NodeId src_, dst_;
    Path nominal_;
    Step start_, len_;
    double r_;
    std::int64_t k_ = 0;
};

}  // namespace detail

// Runs the phase construction coupled to a live simulation: subphase lengths
// and the subphase-(3) duration react to the realized |X|, |Y| and |X'| of
// the run, mirroring the proof's adaptive adversary.
class InstabilityExperiment {
public:
    InstabilityExperiment(const NetworkG& G, InstabilityOptions opts)
        : G_(&G), opts_(opts) {
        if (!(opts.r > 0.0) || opts.r >= 1.0) throw std::invalid_argument("instability requires r < 1");
        if (opts.ntg && !(opts.r > 1.0 / std::sqrt(2.0)))
            throw std::invalid_argument("NTG instability requires r > 1/sqrt(2)");
        if (!opts.ntg && opts.r < 0.9)
            throw std::invalid_argument("FIFO instability construction requires r >= 0.9");
        EngineOptions eopts;
        eopts.rule = opts.ntg ? SchedRule::NTG : SchedRule::FIFO;
        eopts.queue_cap = opts.queue_cap;
        engine_ = std::make_unique<Engine>(G.net, eopts);
        if (opts_.use_router) {
            router_ = std::make_unique<SourceRouter>(
                G.net, compute_routing_params(opts_.route_r, opts_.route_R, opts_.route_w,
                                              G.net.link_count(), RoutingVariant::PerPacket));
        }
    }

    InstabilityResult run() {
        InstabilityResult res;
        inject_burst(res);
        engine_->step();
        int half = 0;
        for (int j = 1; j <= opts_.phases; ++j) {
            const std::int64_t s = measure_carryover(half);
            res.s_series.push_back(s);
            if (s < 8) break;  // construction has collapsed; growth assertions will fail upstream
            PhaseRecord rec;
            rec.index = j;
            rec.half = half;
            rec.start_step = engine_->now();
            rec.s_start = s;
            run_phase(half, s, rec, res);
            rec.end_step = engine_->now();
            rec.total_queue_end = engine_->total_queued();
            res.queue_series.push_back(rec.total_queue_end);
            res.phase_bounds.emplace_back(rec.start_step, rec.end_step);
            res.phases.push_back(rec);
            half = 1 - half;
            if (engine_->cap_exceeded()) break;
        }
        res.s_series.push_back(measure_carryover(half));
        std::stable_sort(res.trace.events.begin(), res.trace.events.end(),
                         [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
        return res;
    }

    const Engine& engine() const { return *engine_; }

private:
    void inject_burst(InstabilityResult& res) {
        res.burst_step = engine_->now();
        const Path nominal{{G_->e[0], G_->f[0]}};
        for (std::int64_t k = 0; k < opts_.s0; ++k)
            emit(G_->v[0], G_->u[0], nominal, res);
    }

    // S for the next phase. FIFO: packets with destination u_h sitting in
    // e_h's queue. NTG: packets destined u_h anywhere that have not yet
    // crossed e_h (they only need to cross it during the first s steps).
    std::int64_t measure_carryover(int half) const {
        const NodeId target = G_->u[half];
        const LinkId gate = G_->e[half];
        if (!opts_.ntg) return engine_->count_queued(gate, target);
        return engine_->count_live([&](const SimPacket& p) {
            if (p.control || p.dst != target) return false;
            for (std::size_t k = static_cast<std::size_t>(p.pos); k < p.path.size(); ++k)
                if (p.path[k] == gate) return true;
            return false;
        });
    }

    void run_phase(int h, std::int64_t s, PhaseRecord& rec, InstabilityResult& res) {
        const int o = 1 - h;
        const Path x_nominal{{G_->e[h], G_->fp[h], G_->gp[h], G_->e[o], G_->f[o]}};
        const Path y_nominal{{G_->e[h], G_->f[h], G_->g[h], G_->e[o], G_->f[o]}};
        const Path w1_nominal{{G_->f[h]}};
        const Path w2_nominal{{G_->fp[h]}};
        const Path z_nominal{{G_->e[o], G_->f[o]}};

        // (1) s steps: X at v_h -> u_o held behind S at e_h; single-hop
        // injections at w_h mix with S at f_h.
        Step start = engine_->now();
        detail::RateStream sx(G_->v[h], G_->u[o], x_nominal, start, s, opts_.r);
        detail::RateStream sw1(G_->w[h], G_->u[h], w1_nominal, start, s, opts_.r);
        const auto sub1_ids = run_streams({&sx, &sw1}, s, res);
        rec.x_count = sx.emitted();

        // (2) |X| steps: Y held behind X at e_h; injections toward u'_h
        // delay the X packets that take the f' branch.
        const std::int64_t L2 = rec.x_count;
        start = engine_->now();
        detail::RateStream sy(G_->v[h], G_->u[o], y_nominal, start, L2, opts_.r);
        detail::RateStream sw2(G_->w[h], G_->up[h], w2_nominal, start, L2, opts_.r);
        run_streams({&sy, &sw2}, L2, res);
        rec.y_count = sy.emitted();

        rec.x_prime = count_x_prime(sub1_ids, G_->v[h], G_->u[o]);

        if (!opts_.ntg) {
            // (3) |X'| + |Y| steps: X' and Y drain toward v_o while rate-r
            // injections at v_o pile onto e_o.
            const std::int64_t L3 = rec.x_prime + rec.y_count;
            start = engine_->now();
            detail::RateStream sz(G_->v[o], G_->u[o], z_nominal, start, L3, opts_.r);
            run_streams({&sz}, L3, res);
            rec.z_count = sz.emitted();
        }
    }

    // X packets that have not yet crossed the f-fork (still at e_h, f_h or
    // f'_h). The id range covers all of subphase (1); src/dst separate X
    // from the single-hop blockers injected alongside it.
    std::int64_t count_x_prime(const std::pair<int, int>& sub1_ids, NodeId src, NodeId dst) const {
        return engine_->count_live([&](const SimPacket& p) {
            return !p.control && p.id >= sub1_ids.first && p.id < sub1_ids.second && p.src == src &&
                   p.dst == dst && p.pos <= 1;
        });
    }

    std::pair<int, int> run_streams(std::vector<detail::RateStream*> streams, Step len,
                                    InstabilityResult& res) {
        const int first_id = next_id_;
        for (Step k = 0; k < len; ++k) {
            for (detail::RateStream* st : streams) {
                while (st->due(engine_->now())) {
                    emit(st->src(), st->dst(), st->nominal(), res);
                    st->advance();
                }
            }
            engine_->step();
            if (engine_->cap_exceeded()) break;
        }
        return {first_id, next_id_};
    }

    void emit(NodeId src, NodeId dst, const Path& nominal, InstabilityResult& res) {
        const Step now = engine_->now();
        SimPacket p;
        p.id = next_id_++;
        p.inject_time = now;
        p.src = src;
        p.dst = dst;
        if (opts_.use_router) {
            p.path = router_->route_at(now, src, dst).links;
        } else {
            p.path = nominal.links;
        }
        engine_->inject(std::move(p));
        TraceEvent ev;
        ev.t = now;
        ev.src = src;
        ev.dst = dst;
        ev.path = nominal;
        res.trace.events.push_back(std::move(ev));
    }

    const NetworkG* G_;
    InstabilityOptions opts_;
    std::unique_ptr<Engine> engine_;
    std::unique_ptr<SourceRouter> router_;
    int next_id_ = 0;
};

inline InstabilityResult run_instability(const NetworkG& G, const InstabilityOptions& opts) {
    InstabilityExperiment exp(G, opts);
    return exp.run();
}

// Standalone trace export using the analytic lower bounds for the set sizes
// (no coupling to a simulation). Suitable for feeding other schedulers or
// the CLI; the adaptive run above is what the growth assertions use.
inline InstabilityResult gen_instability_trace(const NetworkG& G, const InstabilityOptions& opts) {
    InstabilityResult res;
    const double r = opts.r;
    Step now = 0;
    const Path burst_nominal{{G.e[0], G.f[0]}};
    for (std::int64_t k = 0; k < opts.s0; ++k)
        res.trace.events.push_back(TraceEvent{now, G.v[0], G.u[0], burst_nominal});
    res.burst_step = now;
    now += 1;
    double s = static_cast<double>(opts.s0);
    int h = 0;
    for (int j = 1; j <= opts.phases; ++j) {
        const int o = 1 - h;
        const Step start = now;
        res.s_series.push_back(static_cast<std::int64_t>(s));
        const auto emit_stream = [&](NodeId src, NodeId dst, const Path& nominal, Step st, Step len) {
            std::int64_t count = 0;
            for (std::int64_t k = 0;; ++k) {
                const Step at = st + static_cast<Step>(std::ceil(static_cast<double>(k + 1) / r)) - 1;
                if (at >= st + len) break;
                res.trace.events.push_back(TraceEvent{at, src, dst, nominal});
                ++count;
            }
            return count;
        };
        const Path x_nom{{G.e[h], G.fp[h], G.gp[h], G.e[o], G.f[o]}};
        const Path y_nom{{G.e[h], G.f[h], G.g[h], G.e[o], G.f[o]}};
        const auto s_int = static_cast<Step>(s);
        const std::int64_t X = emit_stream(G.v[h], G.u[o], x_nom, now, s_int);
        emit_stream(G.w[h], G.u[h], Path{{G.f[h]}}, now, s_int);
        now += s_int;
        const std::int64_t Y = emit_stream(G.v[h], G.u[o], y_nom, now, X);
        emit_stream(G.w[h], G.up[h], Path{{G.fp[h]}}, now, X);
        now += X;
        std::int64_t s_next;
        if (!opts.ntg) {
            const auto xp = static_cast<std::int64_t>(
                std::floor(static_cast<double>(X) * r / (1.0 + r)));
            const Step L3 = xp + Y;
            const std::int64_t Z = emit_stream(G.v[o], G.u[o], Path{{G.e[o], G.f[o]}}, now, L3);
            now += L3;
            s_next = Z;
        } else {
            const auto xp = static_cast<std::int64_t>(std::floor(r * static_cast<double>(X)));
            s_next = xp + Y;
        }
        res.phase_bounds.emplace_back(start, now);
        s = static_cast<double>(s_next);
        h = o;
    }
    res.s_series.push_back(static_cast<std::int64_t>(s));
    std::stable_sort(res.trace.events.begin(), res.trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
    return res;
}

}  // namespace aqsim
