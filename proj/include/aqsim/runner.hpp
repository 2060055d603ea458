#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aqsim/engine.hpp"
#include "aqsim/model.hpp"
#include "aqsim/source_routing.hpp"

namespace aqsim {

// ---------------------------------------------------------------------------
// Routing experiments (router only, no queue simulation)
// ---------------------------------------------------------------------------

struct RoutingExperimentReport {
    std::vector<PhaseDiagnostics> phases;
    InjectionTrace annotated;  // router-assigned paths, when retained
    bool theorem1_ok = true;   // per-link phase load <= t * w * R
    bool d_step_ok = true;     // D_i <= D_{i-1} / (1 - r mu), 1e-9 slack
    bool dt_ok = true;         // D_t <= 1, 1e-9 slack
};

// Routes a (src,dst) trace through the protocol and completes the phase the
// last event falls in, so Theorem-1 accounting applies to every phase.
inline RoutingExperimentReport route_trace_experiment(const Network& net, const InjectionTrace& trace,
                                                      const RoutingParams& params,
                                                      bool keep_annotated = false,
                                                      SourceRouterOptions opts = {}) {
    SourceRouter router(net, params, opts);
    RoutingExperimentReport rep;
    for (const TraceEvent& ev : trace.events) {
        Path p = router.route_at(ev.t, ev.src, ev.dst);
        if (keep_annotated) {
            TraceEvent out = ev;
            out.path = std::move(p);
            rep.annotated.events.push_back(std::move(out));
        }
    }
    router.finish_phase();
    rep.phases = router.completed_phases();
    const double cap = static_cast<double>(params.t) * static_cast<double>(params.w) * params.R;
    const double step_cap = -std::log1p(-params.r * params.mu) + 1e-9;
    for (const PhaseDiagnostics& d : rep.phases) {
        if (static_cast<double>(d.max_load) > cap) rep.theorem1_ok = false;
        if (d.max_log_D_step > step_cap) rep.d_step_ok = false;
        if (d.log_D_end > 1e-9) rep.dt_ok = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// In-band concrete mode: control packets ride the simulated network
// ---------------------------------------------------------------------------

struct InbandConcreteReport {
    RoutingExperimentReport routing;
    std::int64_t windows = 0;
    std::int64_t max_control_per_window = 0;
    bool control_counts_ok = true;  // <= n^2 + mn per window
    bool control_timing_ok = true;  // forward within tau, broadcast within 2 tau
    std::int64_t data_delivered = 0;
    std::int64_t control_delivered = 0;
    std::int64_t max_total_queue = 0;
};

// Runs the in-band variant with its control packets contending for links
// under strict priority. Congestion updates still land at window boundaries;
// what the simulation verifies is that every control packet completes in
// time for that to be legitimate.
inline InbandConcreteReport run_inband_concrete(const Network& net, const InjectionTrace& trace,
                                                const RoutingParams& params, SchedRule rule,
                                                Step horizon = 0) {
    if (params.variant != RoutingVariant::InBand)
        throw std::invalid_argument("concrete mode runs the in-band variant");
    validate_inband_concrete(params, net.node_count(), net.link_count());
    const std::int64_t tau = inband_tau(net.node_count(), net.link_count());

    SourceRouter router(net, params);
    EngineOptions eopts;
    eopts.rule = rule;
    Engine eng(net, eopts);
    InbandConcreteReport rep;

    struct PendingControl {
        int engine_id;
        Step injected;
        bool forward;
    };
    std::vector<PendingControl> pending;
    std::size_t next_ev = 0;
    int next_id = 0;
    int next_control_id = -1;  // control ids run negative to stay apart
    Step end = std::max<Step>(horizon, trace.events.empty() ? 0 : trace.events.back().t + 1);

    auto flush_window = [&](Step boundary) {
        auto plan = router.control_plan();
        rep.max_control_per_window =
            std::max(rep.max_control_per_window, static_cast<std::int64_t>(plan.size()));
        const auto n = static_cast<std::int64_t>(net.node_count());
        const auto m = static_cast<std::int64_t>(net.link_count());
        if (static_cast<std::int64_t>(plan.size()) > n * n + m * n) rep.control_counts_ok = false;
        for (const ControlPacket& cp : plan) {
            const int cid = next_control_id--;
            SimPacket sp;
            sp.id = cid;
            sp.inject_time = boundary;
            sp.src = cp.src;
            sp.dst = cp.dst;
            sp.path = cp.path.links;
            sp.control = true;
            eng.inject(std::move(sp));
            pending.push_back(PendingControl{cid, boundary, cp.forward});
        }
        ++rep.windows;
        router.advance_to(boundary);
    };

    for (Step s = 0; s < end || eng.total_queued() > 0; ++s) {
        if (s > 0 && s % params.w == 0 && s <= end) flush_window(s);
        while (next_ev < trace.events.size() && trace.events[next_ev].t == s) {
            const TraceEvent& ev = trace.events[next_ev];
            SimPacket sp;
            sp.id = next_id++;
            sp.inject_time = s;
            sp.src = ev.src;
            sp.dst = ev.dst;
            sp.path = router.route_at(s, ev.src, ev.dst).links;
            eng.inject(std::move(sp));
            ++next_ev;
        }
        eng.step();
        rep.max_total_queue = std::max(rep.max_total_queue, eng.total_queued());
        if (s > 4 * end) break;  // drain guard
    }
    router.finish_phase();
    rep.routing.phases = router.completed_phases();

    for (const Delivery& d : eng.deliveries()) {
        if (d.control)
            ++rep.control_delivered;
        else
            ++rep.data_delivered;
    }
    // match deliveries by id for the timing check
    std::map<int, Step> delivered_at;
    for (const Delivery& d : eng.deliveries())
        if (d.control) delivered_at[d.id] = d.deliver_step;
    for (const PendingControl& pc : pending) {
        auto it = delivered_at.find(pc.engine_id);
        if (it == delivered_at.end()) {
            rep.control_timing_ok = false;
            continue;
        }
        const Step limit = pc.injected + (pc.forward ? tau : 2 * tau);
        if (it->second > limit) rep.control_timing_ok = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Trace-driven simulation (the `simulate` CLI entry)
// ---------------------------------------------------------------------------

struct SimReport {
    int exit_code = 0;  // 0 ok, 2 invariant violation, 3 queue cap reached
    std::string error;
    std::int64_t injected = 0;
    std::int64_t delivered = 0;
    std::int64_t max_total_queue = 0;
    std::vector<std::int64_t> per_link_max_queue;
    std::vector<Delivery> deliveries;
    std::vector<std::int64_t> total_series;
    std::vector<PhaseDiagnostics> routing_phases;
};

struct SimSetup {
    SchedRule rule = SchedRule::FIFO;
    std::optional<RoutingParams> router;  // absent: use the trace's own paths
    Step horizon = 0;
    std::int64_t queue_cap = -1;
    bool record_totals = false;
    bool keep_deliveries = true;
};

inline SimReport run_simulation(const Network& net, const InjectionTrace& trace, const SimSetup& setup) {
    SimReport rep;
    EngineOptions eopts;
    eopts.rule = setup.rule;
    eopts.queue_cap = setup.queue_cap;
    eopts.record_total_series = setup.record_totals;
    Engine eng(net, eopts);
    std::optional<SourceRouter> router;
    if (setup.router) router.emplace(net, *setup.router);

    try {
        std::size_t next = 0;
        int id = 0;
        while (next < trace.events.size() || eng.total_queued() > 0 || eng.now() < setup.horizon) {
            while (next < trace.events.size() && trace.events[next].t == eng.now()) {
                const TraceEvent& ev = trace.events[next];
                SimPacket p;
                p.id = id++;
                p.inject_time = ev.t;
                p.src = ev.src;
                p.dst = ev.dst;
                if (router) {
                    p.path = router->route_at(ev.t, ev.src, ev.dst).links;
                } else {
                    if (!ev.path)
                        throw std::invalid_argument("event " + std::to_string(next) +
                                                    " has no path and no router is configured");
                    p.path = ev.path->links;
                }
                eng.inject(std::move(p));
                ++next;
            }
            eng.step();
            rep.max_total_queue = std::max(rep.max_total_queue, eng.total_queued());
            if (eng.cap_exceeded()) {
                rep.exit_code = 3;
                rep.error = "total queue exceeded the configured cap";
                break;
            }
        }
    } catch (const std::invalid_argument&) {
        throw;  // malformed input, not an engine invariant violation
    } catch (const std::logic_error& e) {
        rep.exit_code = 2;
        rep.error = e.what();
    }
    if (router) {
        router->finish_phase();
        rep.routing_phases = router->completed_phases();
    }
    rep.injected = eng.injected_count();
    rep.delivered = eng.delivered_count();
    for (LinkId e = 0; e < net.link_count(); ++e) rep.per_link_max_queue.push_back(eng.max_queue(e));
    if (setup.keep_deliveries) rep.deliveries = eng.deliveries();
    rep.total_series = eng.total_series();
    return rep;
}

}  // namespace aqsim
