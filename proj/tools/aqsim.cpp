// Command-line front end: admissibility checks, the three routing variants,
// the deadline scheduler, adversary generators, ring routing and the
// trace-driven simulator.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "aqsim/admissibility.hpp"
#include "aqsim/adversary.hpp"
#include "aqsim/deadline.hpp"
#include "aqsim/engine.hpp"
#include "aqsim/model.hpp"
#include "aqsim/ring.hpp"
#include "aqsim/runner.hpp"
#include "aqsim/source_routing.hpp"
#include "aqsim/trace_io.hpp"

using namespace aqsim;
using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    return out;
}

json report_json(const AdmissibilityReport& rep) {
    json j;
    j["admissible"] = rep.admissible;
    j["worst_link"] = rep.worst_link;
    j["worst_window"] = {rep.worst_window_start, rep.worst_window_length};
    j["worst_load"] = rep.worst_load;
    j["bound"] = rep.bound;
    return j;
}

int cmd_admissibility(const std::string& trace_file, std::int64_t w, double r, bool weak) {
    const auto trace = load_trace_jsonl(trace_file);
    const auto rep = weak ? check_weak(trace, w, r) : check_strong(trace, w, r);
    std::cout << report_json(rep).dump() << "\n";
    return 0;
}

int cmd_route(const std::string& net_file, const std::string& trace_file, double r, double R,
              std::int64_t w, const std::string& variant_name, const std::string& out_file,
              const std::string& diag_file) {
    const Network net = load_network_json(net_file);
    const auto trace = load_trace_jsonl(trace_file);
    RoutingVariant variant = RoutingVariant::PerPacket;
    if (variant_name == "batched") variant = RoutingVariant::Batched;
    else if (variant_name == "inband") variant = RoutingVariant::InBand;
    else if (variant_name != "perpacket") throw std::invalid_argument("unknown variant " + variant_name);
    const auto params = compute_routing_params(r, R, w, net.link_count(), variant);

    SourceRouterOptions opts;
    opts.keep_window_series = !diag_file.empty();
    const auto rep = route_trace_experiment(net, trace, params, true, opts);

    if (out_file.empty()) {
        for (const TraceEvent& ev : rep.annotated.events) write_trace_event(std::cout, ev);
    } else {
        auto out = open_out(out_file);
        for (const TraceEvent& ev : rep.annotated.events) write_trace_event(out, ev);
    }
    if (!diag_file.empty()) {
        auto out = open_out(diag_file);
        out << "phase,window,D,log_D,phase_max_load\n";
        for (const PhaseDiagnostics& d : rep.phases)
            for (std::size_t i = 0; i < d.log_D_per_window.size(); ++i)
                out << d.phase_index << "," << (i + 1) << "," << std::exp(d.log_D_per_window[i]) << ","
                    << d.log_D_per_window[i] << "," << d.max_load << "\n";
    }
    std::cerr << "phases=" << rep.phases.size() << " theorem1=" << (rep.theorem1_ok ? "ok" : "VIOLATED")
              << " d_step=" << (rep.d_step_ok ? "ok" : "VIOLATED")
              << " d_t=" << (rep.dt_ok ? "ok" : "VIOLATED") << "\n";
    return rep.theorem1_ok && rep.d_step_ok && rep.dt_ok ? 0 : 2;
}

int cmd_schedule(const std::string& net_file, const std::string& trace_file, double epsilon,
                 const std::string& mode, std::int64_t T, std::int64_t M, std::uint64_t seed, int dmax,
                 const std::string& out_file, const std::string& cert_file) {
    const Network net = load_network_json(net_file);
    const auto trace = load_trace_jsonl(trace_file);
    if (dmax <= 0) dmax = net.link_count();  // safe upper bound: paths are link-simple
    SchedulerParams params = (T > 0 && M > 0)
                                 ? manual_scheduler_params(epsilon, net.link_count(), 1, dmax, T, M)
                                 : compute_scheduler_params(epsilon, net.link_count(), 1, dmax);

    std::vector<Packet> packets;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const TraceEvent& ev = trace.events[i];
        if (!ev.path) throw std::invalid_argument("event " + std::to_string(i) + " has no path");
        validate_path(net, *ev.path);
        Packet p;
        p.id = static_cast<int>(i);
        p.inject_time = ev.t;
        p.source = ev.src;
        p.dest = ev.dst;
        p.path = ev.path;
        packets.push_back(std::move(p));
    }

    // assign per M-interval
    json cert;
    cert["T"] = params.T;
    cert["M"] = params.M;
    bool condition_ok = true;
    bool beta_ok = true;
    bool h_ok = true;
    std::map<std::int64_t, std::vector<std::size_t>> by_gamma;
    for (std::size_t i = 0; i < packets.size(); ++i)
        by_gamma[interval_index(packets[i].inject_time, params.M)].push_back(i);
    auto intervals = json::array();
    for (auto& [gamma, idxs] : by_gamma) {
        std::vector<Packet> group;
        for (auto i : idxs) group.push_back(packets[i]);
        json ji;
        ji["gamma"] = gamma;
        ji["packets"] = group.size();
        const auto beta = compute_beta(group, params);
        ji["beta_sum_ok"] = beta.sum_ok;
        ji["beta_worst_sum"] = beta.worst_sum;
        beta_ok = beta_ok && beta.sum_ok;
        if (mode == "derand") {
            const auto certs = assign_deadlines_derandomized(group, params);
            auto jg = json::array();
            for (const auto& c : certs) {
                jg.push_back({{"initial_link", c.e0},
                              {"packets", c.packets},
                              {"h_start", c.h_start},
                              {"h_final", c.h_final},
                              {"monotone", c.monotone},
                              {"eq9", c.eq9_holds}});
                h_ok = h_ok && c.h_final < 1.0 && c.monotone;
            }
            ji["groups"] = std::move(jg);
        } else if (mode == "random") {
            assign_deadlines_random(group, params, seed + static_cast<std::uint64_t>(gamma));
        } else {
            throw std::invalid_argument("mode must be random or derand");
        }
        const auto cond = verify_deadline_condition(group, params.T);
        ji["condition_ok"] = cond.ok;
        ji["worst_link"] = cond.worst_link;
        ji["worst_window_start"] = cond.worst_window_start;
        ji["worst_count"] = cond.worst_count;
        condition_ok = condition_ok && cond.ok;
        intervals.push_back(std::move(ji));
        for (std::size_t k = 0; k < idxs.size(); ++k) packets[idxs[k]] = group[k];
    }
    cert["intervals"] = std::move(intervals);
    cert["condition_ok"] = condition_ok;
    cert["beta_ok"] = beta_ok;
    if (mode == "derand") cert["h_ok"] = h_ok;

    const auto run = run_edf_schedule(net, packets, params);
    cert["deadlines_met"] = run.deadlines_met;
    cert["within_2M"] = run.within_2M;
    cert["max_delay"] = run.max_delay;

    {
        std::ostream* out = &std::cout;
        std::ofstream file;
        if (!out_file.empty()) {
            file = open_out(out_file);
            out = &file;
        }
        *out << "packet,inject,arrival,delay\n";
        for (const Delivery& d : run.deliveries)
            *out << d.id << "," << d.inject_time << "," << d.deliver_step << "," << d.delay() << "\n";
    }
    if (!cert_file.empty()) {
        auto out = open_out(cert_file);
        out << cert.dump(2) << "\n";
    } else {
        std::cerr << cert.dump() << "\n";
    }
    return run.deadlines_met && run.within_2M ? 0 : 2;
}

int cmd_adversary(const std::string& kind, double r, std::int64_t s0, int phases,
                  const std::string& out_file, const std::string& net_file, std::int64_t w,
                  Step horizon, std::uint64_t seed, const std::string& net_out) {
    if (kind == "random") {
        if (net_file.empty()) throw std::invalid_argument("--kind random needs --net");
        const Network net = load_network_json(net_file);
        const auto trace = gen_random_admissible(net, w, r, horizon, seed);
        save_trace_jsonl(trace, out_file);
        std::cerr << "events=" << trace.events.size() << "\n";
        return 0;
    }
    const auto G = make_network_g();
    InstabilityOptions opts;
    opts.r = r;
    opts.s0 = s0;
    opts.phases = phases;
    opts.ntg = (kind == "ntg-g");
    if (!opts.ntg && kind != "fifo-g") throw std::invalid_argument("unknown adversary kind " + kind);
    const auto res = gen_instability_trace(G, opts);
    save_trace_jsonl(res.trace, out_file);
    if (!net_out.empty()) save_network_json(G.net, net_out);
    json j;
    j["events"] = res.trace.events.size();
    j["s_series"] = res.s_series;
    std::cerr << j.dump() << "\n";
    return 0;
}

int cmd_ring(int n, int c, double r, double beta, const std::string& mode,
             const std::string& trace_file, std::uint64_t seed, const std::string& assign_file,
             const std::string& loads_file) {
    const auto ring = make_parallel_ring(n, c);
    const auto params = compute_ring_params(r, n, c, beta);
    const auto trace = load_trace_jsonl(trace_file);
    const auto cap = static_cast<std::int64_t>(std::floor(params.R * static_cast<double>(params.W)));

    std::vector<int> rings(trace.events.size(), 0);
    struct Interval {
        std::int64_t max_load = 0;
        double log_h_start = std::numeric_limits<double>::quiet_NaN();
        double log_h_end = std::numeric_limits<double>::quiet_NaN();
    };
    std::map<std::int64_t, Interval> intervals;

    if (mode == "online") {
        OnlineRingRouter router(ring, params);
        for (std::size_t i = 0; i < trace.events.size(); ++i)
            rings[i] = router.route(trace.events[i].t, trace.events[i].src, trace.events[i].dst);
        if (!trace.events.empty()) router.advance_to((trace.events.back().t / params.W + 1) * params.W);
        std::int64_t idx = 0;
        for (const auto& st : router.completed_intervals()) {
            intervals[idx++] = Interval{st.max_link_load, st.log_h_start, st.log_h_end};
        }
    } else {
        // group events per interval
        std::map<std::int64_t, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < trace.events.size(); ++i)
            groups[trace.events[i].t / params.W].push_back(i);
        if (mode == "offline") {
            for (auto& [iv, idxs] : groups) {
                std::vector<std::pair<NodeId, NodeId>> pkts;
                for (auto i : idxs) pkts.emplace_back(trace.events[i].src, trace.events[i].dst);
                RingDecisionStats st;
                const auto assigned = route_offline_derand(ring, params, pkts, &st);
                for (std::size_t k = 0; k < idxs.size(); ++k) rings[idxs[k]] = assigned[k];
                intervals[iv] = Interval{st.max_link_load, st.log_h_start, st.log_h_end};
            }
        } else if (mode == "random") {
            RandomRingRouter router(c, seed);
            for (std::size_t i = 0; i < trace.events.size(); ++i) rings[i] = router.route();
            for (auto& [iv, idxs] : groups) {
                std::vector<std::pair<NodeId, NodeId>> pkts;
                std::vector<int> rs;
                for (auto i : idxs) {
                    pkts.emplace_back(trace.events[i].src, trace.events[i].dst);
                    rs.push_back(rings[i]);
                }
                const auto loads = ring_loads(ring, pkts, rs);
                intervals[iv] = Interval{*std::max_element(loads.begin(), loads.end())};
            }
        } else {
            throw std::invalid_argument("mode must be random, offline or online");
        }
    }

    {
        std::ostream* out = &std::cout;
        std::ofstream file;
        if (!assign_file.empty()) {
            file = open_out(assign_file);
            out = &file;
        }
        *out << "t,src,dst,ring\n";
        for (std::size_t i = 0; i < trace.events.size(); ++i)
            *out << trace.events[i].t << "," << trace.events[i].src << "," << trace.events[i].dst << ","
                 << rings[i] << "\n";
    }
    if (!loads_file.empty()) {
        auto out = open_out(loads_file);
        out << "interval,max_load,cap,log_h_start,log_h_end\n";
        for (const auto& [iv, st] : intervals)
            out << iv << "," << st.max_load << "," << cap << "," << st.log_h_start << "," << st.log_h_end
                << "\n";
    }
    return 0;
}

int cmd_simulate(const std::string& config_file, const std::string& sched_override) {
    std::ifstream in(config_file);
    if (!in) throw std::runtime_error("cannot open config: " + config_file);
    json cfg;
    in >> cfg;
    if (!sched_override.empty()) cfg["scheduler"] = sched_override;

    const Network net = load_network_json(cfg.at("network").get<std::string>());
    InjectionTrace trace;
    const auto& jt = cfg.at("trace");
    if (jt.is_string()) {
        trace = load_trace_jsonl(jt.get<std::string>());
    } else if (jt.contains("random")) {
        const auto& jr = jt.at("random");
        trace = gen_random_admissible(net, jr.at("w").get<std::int64_t>(), jr.at("r").get<double>(),
                                      jr.at("horizon").get<Step>(), jr.value("seed", std::uint64_t{0}));
    } else {
        throw std::invalid_argument("trace must be a file name or a {\"random\": ...} generator");
    }

    SimSetup setup;
    setup.rule = sched_rule_from_string(cfg.value("scheduler", std::string("fifo")));
    setup.horizon = cfg.value("horizon", static_cast<Step>(0));
    setup.queue_cap = cfg.value("queue_cap", static_cast<std::int64_t>(-1));
    const auto outputs = cfg.value("outputs", json::object());
    setup.record_totals = outputs.contains("totals");

    bool concrete = false;
    std::optional<RoutingParams> rparams;
    if (cfg.contains("router") && !cfg.at("router").is_null()) {
        const auto& jr = cfg.at("router");
        RoutingVariant variant = RoutingVariant::PerPacket;
        const auto vname = jr.value("variant", std::string("perpacket"));
        if (vname == "batched") variant = RoutingVariant::Batched;
        else if (vname == "inband") variant = RoutingVariant::InBand;
        else if (vname != "perpacket") throw std::invalid_argument("unknown router variant " + vname);
        rparams = compute_routing_params(jr.at("r").get<double>(), jr.at("R").get<double>(),
                                         jr.at("w").get<std::int64_t>(), net.link_count(), variant);
        concrete = jr.value("concrete", false);
        if (concrete) validate_inband_concrete(*rparams, net.node_count(), net.link_count());
    }

    json summary;
    int code = 0;
    if (concrete) {
        const auto rep = run_inband_concrete(net, trace, *rparams, setup.rule, setup.horizon);
        summary["windows"] = rep.windows;
        summary["max_control_per_window"] = rep.max_control_per_window;
        summary["control_counts_ok"] = rep.control_counts_ok;
        summary["control_timing_ok"] = rep.control_timing_ok;
        summary["data_delivered"] = rep.data_delivered;
        summary["control_delivered"] = rep.control_delivered;
        summary["max_total_queue"] = rep.max_total_queue;
        code = rep.control_counts_ok && rep.control_timing_ok ? 0 : 2;
    } else {
        setup.router = rparams;
        const auto rep = run_simulation(net, trace, setup);
        summary["injected"] = rep.injected;
        summary["delivered"] = rep.delivered;
        summary["max_total_queue"] = rep.max_total_queue;
        summary["per_link_max_queue"] = rep.per_link_max_queue;
        summary["exit_code"] = rep.exit_code;
        if (!rep.error.empty()) summary["error"] = rep.error;
        if (outputs.contains("delays")) {
            auto out = open_out(outputs.at("delays").get<std::string>());
            out << "packet,inject,arrival,delay\n";
            for (const Delivery& d : rep.deliveries)
                out << d.id << "," << d.inject_time << "," << d.deliver_step << "," << d.delay() << "\n";
        }
        if (outputs.contains("totals")) {
            auto out = open_out(outputs.at("totals").get<std::string>());
            out << "step,total_queue\n";
            for (std::size_t s = 0; s < rep.total_series.size(); ++s)
                out << s << "," << rep.total_series[s] << "\n";
        }
        code = rep.exit_code;
    }
    if (outputs.contains("summary")) {
        auto out = open_out(outputs.at("summary").get<std::string>());
        out << summary.dump(2) << "\n";
    } else {
        std::cout << summary.dump() << "\n";
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial queueing: source routing, scheduling and stability experiments"};
    app.require_subcommand(1);

    // admissibility
    auto* adm = app.add_subcommand("admissibility", "check (w,r)-admissibility of a path-annotated trace");
    std::string adm_trace;
    std::int64_t adm_w = 1;
    double adm_r = 0.5;
    bool adm_weak = false;
    adm->add_option("--trace", adm_trace)->required();
    adm->add_option("--w", adm_w)->required();
    adm->add_option("--r", adm_r)->required();
    adm->add_flag("--weak", adm_weak, "check the fixed-partition notion");

    // route
    auto* rt = app.add_subcommand("route", "assign congestion-minimizing paths to a trace");
    std::string rt_net, rt_trace, rt_variant = "perpacket", rt_out, rt_diag;
    double rt_r = 0.5, rt_R = 0.75;
    std::int64_t rt_w = 50;
    rt->add_option("--net", rt_net)->required();
    rt->add_option("--trace", rt_trace)->required();
    rt->add_option("--r", rt_r)->required();
    rt->add_option("--R", rt_R)->required();
    rt->add_option("--w", rt_w)->required();
    rt->add_option("--variant", rt_variant)->check(CLI::IsMember({"perpacket", "batched", "inband"}));
    rt->add_option("--out", rt_out, "annotated trace (JSONL); stdout if omitted");
    rt->add_option("--diag", rt_diag, "phase diagnostics CSV");

    // schedule
    auto* sc = app.add_subcommand("schedule", "deadline scheduling with EDF service");
    std::string sc_net, sc_trace, sc_mode = "derand", sc_out, sc_cert;
    double sc_eps = 0.5;
    std::int64_t sc_T = 0, sc_M = 0;
    std::uint64_t sc_seed = 0;
    int sc_dmax = 0;
    sc->add_option("--net", sc_net)->required();
    sc->add_option("--trace", sc_trace)->required();
    sc->add_option("--epsilon", sc_eps)->required();
    sc->add_option("--mode", sc_mode)->check(CLI::IsMember({"random", "derand"}));
    sc->add_option("--T", sc_T);
    sc->add_option("--M", sc_M);
    sc->add_option("--seed", sc_seed);
    sc->add_option("--dmax", sc_dmax);
    sc->add_option("--out", sc_out, "per-packet delays CSV; stdout if omitted");
    sc->add_option("--cert", sc_cert, "condition certificate JSON; stderr if omitted");

    // adversary
    auto* ad = app.add_subcommand("adversary", "generate injection traces");
    std::string ad_kind = "random", ad_out, ad_net, ad_net_out;
    double ad_r = 0.5;
    std::int64_t ad_s0 = 1000, ad_w = 10;
    int ad_phases = 5;
    Step ad_horizon = 1000;
    std::uint64_t ad_seed = 0;
    ad->add_option("--kind", ad_kind)->check(CLI::IsMember({"random", "fifo-g", "ntg-g"}));
    ad->add_option("--r", ad_r)->required();
    ad->add_option("--s0", ad_s0);
    ad->add_option("--phases", ad_phases);
    ad->add_option("--out", ad_out)->required();
    ad->add_option("--net", ad_net, "network file (random kind)");
    ad->add_option("--w", ad_w, "window (random kind)");
    ad->add_option("--horizon", ad_horizon, "steps (random kind)");
    ad->add_option("--seed", ad_seed);
    ad->add_option("--net-out", ad_net_out, "write the instability network G");

    // ring
    auto* rg = app.add_subcommand("ring", "source routing on a ring with parallel links");
    int rg_n = 8, rg_c = 3;
    double rg_r = 0.75, rg_beta = 0.9;
    std::string rg_mode = "online", rg_trace, rg_assign, rg_loads;
    std::uint64_t rg_seed = 0;
    rg->add_option("--n", rg_n)->required();
    rg->add_option("--c", rg_c)->required();
    rg->add_option("--r", rg_r)->required();
    rg->add_option("--beta", rg_beta)->required();
    rg->add_option("--mode", rg_mode)->check(CLI::IsMember({"random", "offline", "online"}));
    rg->add_option("--trace", rg_trace)->required();
    rg->add_option("--seed", rg_seed);
    rg->add_option("--assign", rg_assign, "ring assignment CSV; stdout if omitted");
    rg->add_option("--loads", rg_loads, "per-interval load maxima CSV");

    // simulate
    auto* sim = app.add_subcommand("simulate", "trace-driven simulation from a JSON config");
    std::string sim_config, sim_sched;
    sim->add_option("--config", sim_config)->required();
    sim->add_option("--sched", sim_sched, "override the config's scheduler rule")
        ->check(CLI::IsMember({"fifo", "lifo", "ntg", "ftg", "lis", "sis", "edf"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (adm->parsed()) return cmd_admissibility(adm_trace, adm_w, adm_r, adm_weak);
        if (rt->parsed()) return cmd_route(rt_net, rt_trace, rt_r, rt_R, rt_w, rt_variant, rt_out, rt_diag);
        if (sc->parsed())
            return cmd_schedule(sc_net, sc_trace, sc_eps, sc_mode, sc_T, sc_M, sc_seed, sc_dmax, sc_out,
                                sc_cert);
        if (ad->parsed())
            return cmd_adversary(ad_kind, ad_r, ad_s0, ad_phases, ad_out, ad_net, ad_w, ad_horizon, ad_seed,
                                 ad_net_out);
        if (rg->parsed())
            return cmd_ring(rg_n, rg_c, rg_r, rg_beta, rg_mode, rg_trace, rg_seed, rg_assign, rg_loads);
        if (sim->parsed()) return cmd_simulate(sim_config, sim_sched);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
