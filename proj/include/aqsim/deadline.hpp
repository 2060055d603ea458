#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "aqsim/engine.hpp"
#include "aqsim/model.hpp"

namespace aqsim {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct SchedulerParams {
    double epsilon = 0.0;  // 1 - r
    int m = 0;
    std::int64_t w = 0;
    int d_max = 0;
    std::int64_t T = 0;
    std::int64_t M = 0;

    std::int64_t draw_span() const { return M - (static_cast<std::int64_t>(d_max) + 1) * T; }
};

// T and M define each other implicitly; iterate from M = max(w,1) upward.
// Both maps are monotone, so the sequence climbs to the least fixed point.
inline SchedulerParams compute_scheduler_params(double epsilon, int m, std::int64_t w, int d_max) {
    if (!(epsilon > 0.0) || epsilon >= 1.0) throw std::invalid_argument("epsilon must be in (0,1)");
    if (m < 1 || w < 1 || d_max < 1) throw std::invalid_argument("m, w, d_max must be >= 1");
    SchedulerParams p;
    p.epsilon = epsilon;
    p.m = m;
    p.w = w;
    p.d_max = d_max;

    const double t_coef = 36.0 * static_cast<double>(m) / (epsilon * epsilon * epsilon);
    const double m_coef = (1.0 - epsilon / 2.0) / (epsilon / 6.0) * static_cast<double>(d_max + 1);
    std::int64_t M = std::max<std::int64_t>(w, 1);
    std::int64_t T = 0;
    bool stable = false;
    for (int iter = 0; iter < 1000; ++iter) {
        const auto T_next = static_cast<std::int64_t>(
            std::ceil(t_coef * std::log(2.0 * static_cast<double>(M) * m * m)));
        const auto M_next = std::max<std::int64_t>(
            static_cast<std::int64_t>(std::ceil(m_coef * static_cast<double>(T_next))), w);
        if (T_next == T && M_next == M) {
            stable = true;
            break;
        }
        T = T_next;
        M = M_next;
    }
    if (!stable) throw std::runtime_error("scheduler parameter iteration did not converge");
    p.T = T;
    p.M = M;
    if (p.M - static_cast<std::int64_t>(p.d_max) * p.T <= p.M / 2 + p.T)
        throw std::logic_error("deadline draw interval is empty");
    return p;
}

// Certificate mode: caller-chosen T and M. Only the draw interval needs to
// be valid; Lemma 2's conclusion depends on the realized deadline counts,
// not on how T and M were produced.
inline SchedulerParams manual_scheduler_params(double epsilon, int m, std::int64_t w, int d_max,
                                               std::int64_t T, std::int64_t M) {
    if (!(epsilon > 0.0) || epsilon >= 1.0) throw std::invalid_argument("epsilon must be in (0,1)");
    if (m < 1 || w < 1 || d_max < 1 || T < 1 || M < 1) throw std::invalid_argument("bad parameter");
    SchedulerParams p{epsilon, m, w, d_max, T, M};
    if (p.draw_span() <= 0) throw std::invalid_argument("T, M leave no room for the deadline draw");
    return p;
}

// Packets injected during [(gamma-1)M, gamma M) are scheduled during the
// next M-interval; gamma >= 1 for injections at t >= 0.
inline std::int64_t interval_index(Step inject_time, std::int64_t M) { return inject_time / M + 1; }

struct DrawInterval {
    Step lo = 0;  // gamma*M + T
    Step hi = 0;  // (gamma+1)*M - d_max*T, exclusive
    std::int64_t span() const { return hi - lo; }
};

inline DrawInterval deadline_draw_interval(std::int64_t gamma, const SchedulerParams& p) {
    DrawInterval d;
    d.lo = gamma * p.M + p.T;
    d.hi = (gamma + 1) * p.M - static_cast<std::int64_t>(p.d_max) * p.T;
    if (d.span() <= 0) throw std::logic_error("empty draw interval");
    return d;
}

namespace detail {

inline void check_deadline_preconditions(std::span<const Packet> pkts, const SchedulerParams& p,
                                         std::int64_t& gamma_out) {
    std::int64_t gamma = -1;
    for (const Packet& pk : pkts) {
        if (!pk.path) throw std::invalid_argument("packet " + std::to_string(pk.id) + " has no path");
        if (path_length(*pk.path) > p.d_max)
            throw std::invalid_argument("packet " + std::to_string(pk.id) + " path longer than d_max");
        if (path_length(*pk.path) < 1)
            throw std::invalid_argument("packet " + std::to_string(pk.id) + " has an empty path");
        const std::int64_t g = interval_index(pk.inject_time, p.M);
        if (gamma < 0) gamma = g;
        if (g != gamma) throw std::invalid_argument("packets span multiple M-intervals");
    }
    gamma_out = gamma;
}

inline void fill_deadlines(Packet& pk, Step tau0, std::int64_t T) {
    pk.deadlines.clear();
    for (int k = 0; k < path_length(*pk.path); ++k) pk.deadlines.push_back(tau0 + static_cast<Step>(k) * T);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Randomized assignment
// ---------------------------------------------------------------------------

// tau_0 uniform on the integer points of [gamma*M + T, (gamma+1)M - d_max*T);
// subsequent deadlines are tau_0 + k*T. Seeded and reproducible.
inline void assign_deadlines_random(std::span<Packet> pkts, const SchedulerParams& p, std::uint64_t seed) {
    if (pkts.empty()) return;
    std::int64_t gamma = 0;
    detail::check_deadline_preconditions({pkts.data(), pkts.size()}, p, gamma);
    const DrawInterval d = deadline_draw_interval(gamma, p);
    std::mt19937_64 rng(seed);
    for (Packet& pk : pkts) {
        const Step tau0 = d.lo + static_cast<Step>(rng() % static_cast<std::uint64_t>(d.span()));
        detail::fill_deadlines(pk, tau0, p.T);
    }
}

// ---------------------------------------------------------------------------
// Beta and the deadline-load condition
// ---------------------------------------------------------------------------

struct BetaInfo {
    // beta[(e0, e)] for groups with at least one packet through e
    std::map<std::pair<LinkId, LinkId>, double> beta;
    std::map<LinkId, double> sum_per_link;  // over initial links with members
    double worst_sum = 0.0;
    bool sum_ok = true;  // every sum <= 1 - eps/2 (small float slack)
};

inline BetaInfo compute_beta(std::span<const Packet> pkts, const SchedulerParams& p) {
    BetaInfo info;
    std::map<std::pair<LinkId, LinkId>, std::int64_t> counts;  // |S_{e0,e}|
    for (const Packet& pk : pkts) {
        const LinkId e0 = pk.path->links.front();
        for (LinkId e : pk.path->links) ++counts[{e0, e}];
    }
    const double scale = static_cast<double>(p.M) / static_cast<double>(p.draw_span());
    const double floor_term = p.epsilon / (3.0 * static_cast<double>(p.m));
    for (const auto& [key, c] : counts) {
        const double b = scale * std::max(static_cast<double>(c) / static_cast<double>(p.M), floor_term);
        info.beta[key] = b;
        info.sum_per_link[key.second] += b;
    }
    for (const auto& [e, s] : info.sum_per_link) {
        info.worst_sum = std::max(info.worst_sum, s);
        if (s > 1.0 - p.epsilon / 2.0 + 1e-9) info.sum_ok = false;
    }
    return info;
}

struct ConditionReport {
    bool ok = true;
    LinkId worst_link = -1;
    Step worst_window_start = 0;
    std::int64_t worst_count = 0;
};

// Lemma-2 hypothesis: no more than T deadlines for any link in any length-T
// interval. Scans windows starting at each deadline (shifting any window to
// its first contained deadline never lowers the count).
inline ConditionReport verify_deadline_condition(std::span<const Packet> pkts, std::int64_t T) {
    std::map<LinkId, std::vector<Step>> per_link;
    for (const Packet& pk : pkts) {
        if (!pk.path || pk.deadlines.size() != pk.path->links.size())
            throw std::invalid_argument("packet lacks a full deadline assignment");
        for (std::size_t k = 0; k < pk.deadlines.size(); ++k)
            per_link[pk.path->links[k]].push_back(pk.deadlines[k]);
    }
    ConditionReport rep;
    for (auto& [e, v] : per_link) {
        std::sort(v.begin(), v.end());
        std::size_t hi = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (hi < i) hi = i;
            while (hi < v.size() && v[hi] < v[i] + T) ++hi;
            const auto count = static_cast<std::int64_t>(hi - i);
            if (count > rep.worst_count) {
                rep.worst_count = count;
                rep.worst_link = e;
                rep.worst_window_start = v[i];
            }
        }
    }
    rep.ok = rep.worst_count <= T;
    return rep;
}

// ---------------------------------------------------------------------------
// Derandomized assignment (conditional expectations per initial link)
// ---------------------------------------------------------------------------

struct GroupCertificate {
    LinkId e0 = -1;
    std::size_t packets = 0;
    double h_start = 0.0;
    double h_final = 0.0;
    std::vector<double> h_trace;  // h after each decision, starting with h_start
    bool monotone = true;         // h never increased along the greedy
    bool eq9_holds = true;        // realized counts within (1+eps/2) * beta * T
};

namespace detail {

// Greedy conditional-expectations deadline chooser for one initial-link
// group. The estimator per (link e, window [t,t+T)) multiplies
// exp((eps/2) E[X]) for undecided packets and (1+eps/2)^X for decided ones,
// against the fixed divisor (1+eps/2)^{(1+eps/2) beta T}. Deciding the
// packet that minimizes the sum never lets it grow.
class GroupDerandomizer {
public:
    GroupDerandomizer(std::vector<Packet*> group, const SchedulerParams& p, std::int64_t gamma,
                      const BetaInfo& beta)
        : group_(std::move(group)), p_(p), draw_(deadline_draw_interval(gamma, p)), gamma_(gamma) {
        std::sort(group_.begin(), group_.end(), [](const Packet* a, const Packet* b) {
            if (a->inject_time != b->inject_time) return a->inject_time < b->inject_time;
            return a->id < b->id;
        });
        e0_ = group_.front()->path->links.front();
        t_lo_ = gamma_ * p_.M;
        n_windows_ = p_.M - p_.T;  // window starts in [gamma M, (gamma+1)M - T)
        collect_links(beta);
        init_terms();
    }

    GroupCertificate run() {
        GroupCertificate cert;
        cert.e0 = e0_;
        cert.packets = group_.size();
        cert.h_start = total_h();
        cert.h_trace.push_back(cert.h_start);
        for (std::size_t i = 0; i < group_.size(); ++i) {
            const Step tau0 = decide(*group_[i]);
            fill_deadlines(*group_[i], tau0, p_.T);
            const double h = total_h();
            if (h > cert.h_trace.back() * (1.0 + 1e-9)) cert.monotone = false;
            cert.h_trace.push_back(h);
        }
        cert.h_final = cert.h_trace.back();
        cert.eq9_holds = check_eq9();
        return cert;
    }

private:
    void collect_links(const BetaInfo& beta) {
        for (const Packet* pk : group_)
            for (LinkId e : pk->path->links)
                if (std::find(links_.begin(), links_.end(), e) == links_.end()) links_.push_back(e);
        std::sort(links_.begin(), links_.end());
        for (LinkId e : links_) betas_.push_back(beta.beta.at({e0_, e}));
    }

    // Probability mass of tau_0 values that put packet pk's deadline for its
    // k-th link inside [t, t+T): the overlap of [t - kT, t - kT + T) with
    // the draw interval, over the draw span.
    double expectation(const Packet& pk, int k, Step t) const {
        const Step shift = static_cast<Step>(k) * p_.T;
        const Step lo = std::max(draw_.lo, t - shift);
        const Step hi = std::min(draw_.hi, t - shift + p_.T);
        if (hi <= lo) return 0.0;
        return static_cast<double>(hi - lo) / static_cast<double>(draw_.span());
    }

    void init_terms() {
        const double eps = p_.epsilon;
        terms_.assign(links_.size(), std::vector<double>(static_cast<std::size_t>(n_windows_), 0.0));
        for (std::size_t li = 0; li < links_.size(); ++li) {
            const double denom_log = (1.0 + eps / 2.0) * betas_[li] * static_cast<double>(p_.T) *
                                     std::log1p(eps / 2.0);
            for (std::int64_t wi = 0; wi < n_windows_; ++wi) {
                const Step t = t_lo_ + wi;
                double sum_e = 0.0;
                for (const Packet* pk : group_) {
                    const int k = link_pos(*pk, links_[li]);
                    if (k >= 0) sum_e += expectation(*pk, k, t);
                }
                terms_[li][static_cast<std::size_t>(wi)] = std::exp((eps / 2.0) * sum_e - denom_log);
            }
        }
    }

    static int link_pos(const Packet& pk, LinkId e) {
        const auto& ls = pk.path->links;
        for (std::size_t k = 0; k < ls.size(); ++k)
            if (ls[k] == e) return static_cast<int>(k);
        return -1;
    }

    double total_h() const {
        double h = 0.0;
        for (const auto& row : terms_)
            for (double v : row) h += v;
        return h;
    }

    Step decide(const Packet& pk) {
        const double eps = p_.epsilon;
        // strip pk's undecided factor, then scan candidates with prefix sums
        std::vector<std::vector<double>> prefix(links_.size());
        double base_total = 0.0;
        for (std::size_t li = 0; li < links_.size(); ++li) {
            const int k = link_pos(pk, links_[li]);
            auto& row = terms_[li];
            if (k >= 0) {
                for (std::int64_t wi = 0; wi < n_windows_; ++wi) {
                    const double e_val = expectation(pk, k, t_lo_ + wi);
                    if (e_val != 0.0) row[static_cast<std::size_t>(wi)] *= std::exp(-(eps / 2.0) * e_val);
                }
            }
            prefix[li].resize(static_cast<std::size_t>(n_windows_) + 1, 0.0);
            for (std::int64_t wi = 0; wi < n_windows_; ++wi)
                prefix[li][static_cast<std::size_t>(wi + 1)] =
                    prefix[li][static_cast<std::size_t>(wi)] + row[static_cast<std::size_t>(wi)];
            base_total += prefix[li].back();
        }
        // windows hit by a candidate tau0 at link k: starts in
        // [tau_k - T + 1, tau_k]
        Step best = draw_.lo;
        double best_h = std::numeric_limits<double>::infinity();
        for (Step cand = draw_.lo; cand < draw_.hi; ++cand) {
            double h = base_total;
            for (std::size_t li = 0; li < links_.size(); ++li) {
                const int k = link_pos(pk, links_[li]);
                if (k < 0) continue;
                const Step tau_k = cand + static_cast<Step>(k) * p_.T;
                const std::int64_t a = std::clamp<std::int64_t>(tau_k - p_.T + 1 - t_lo_, 0, n_windows_);
                const std::int64_t b = std::clamp<std::int64_t>(tau_k + 1 - t_lo_, 0, n_windows_);
                h += (eps / 2.0) * (prefix[li][static_cast<std::size_t>(b)] -
                                    prefix[li][static_cast<std::size_t>(a)]);
            }
            if (h < best_h) {  // strict: ties keep the smallest candidate
                best_h = h;
                best = cand;
            }
        }
        // commit: decided factor (1+eps/2) on the hit windows
        for (std::size_t li = 0; li < links_.size(); ++li) {
            const int k = link_pos(pk, links_[li]);
            if (k < 0) continue;
            const Step tau_k = best + static_cast<Step>(k) * p_.T;
            const std::int64_t a = std::clamp<std::int64_t>(tau_k - p_.T + 1 - t_lo_, 0, n_windows_);
            const std::int64_t b = std::clamp<std::int64_t>(tau_k + 1 - t_lo_, 0, n_windows_);
            for (std::int64_t wi = a; wi < b; ++wi)
                terms_[li][static_cast<std::size_t>(wi)] *= 1.0 + eps / 2.0;
        }
        return best;
    }

    bool check_eq9() const {
        const double eps = p_.epsilon;
        for (std::size_t li = 0; li < links_.size(); ++li) {
            std::vector<Step> ds;
            for (const Packet* pk : group_) {
                const int k = link_pos(*pk, links_[li]);
                if (k >= 0) ds.push_back(pk->deadlines[static_cast<std::size_t>(k)]);
            }
            std::sort(ds.begin(), ds.end());
            const double bound = (1.0 + eps / 2.0) * betas_[li] * static_cast<double>(p_.T) + 1e-9;
            std::size_t hi = 0;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                if (hi < i) hi = i;
                while (hi < ds.size() && ds[hi] < ds[i] + p_.T) ++hi;
                if (static_cast<double>(hi - i) > bound) return false;
            }
        }
        return true;
    }

    std::vector<Packet*> group_;
    const SchedulerParams& p_;
    DrawInterval draw_;
    std::int64_t gamma_;
    LinkId e0_ = -1;
    Step t_lo_ = 0;
    std::int64_t n_windows_ = 0;
    std::vector<LinkId> links_;
    std::vector<double> betas_;
    std::vector<std::vector<double>> terms_;
};

}  // namespace detail

// Deterministic deadline assignment: independently per initial link, pick
// each tau_0 greedily so the estimator never grows. A final h below 1
// certifies that every per-(link,window) deadline count satisfies the
// beta-scaled bound.
inline std::vector<GroupCertificate> assign_deadlines_derandomized(std::span<Packet> pkts,
                                                                   const SchedulerParams& p) {
    if (pkts.empty()) return {};
    std::int64_t gamma = 0;
    detail::check_deadline_preconditions({pkts.data(), pkts.size()}, p, gamma);
    const BetaInfo beta = compute_beta({pkts.data(), pkts.size()}, p);
    std::map<LinkId, std::vector<Packet*>> groups;
    for (Packet& pk : pkts) groups[pk.path->links.front()].push_back(&pk);
    std::vector<GroupCertificate> certs;
    for (auto& [e0, members] : groups) {
        detail::GroupDerandomizer d(members, p, gamma, beta);
        certs.push_back(d.run());
    }
    return certs;
}

// ---------------------------------------------------------------------------
// Store-and-forward EDF execution
// ---------------------------------------------------------------------------

struct EdfRunReport {
    bool deadlines_met = true;   // every packet crossed its k-th link by tau_k
    bool within_2M = true;       // every delay <= 2M
    std::int64_t deadline_misses = 0;
    Step max_delay = 0;
    std::int64_t delivered = 0;
    std::vector<Delivery> deliveries;
};

// Packets injected during an M-interval are held and released to their
// first queue at the start of the next interval; links serve smallest
// deadline first.
inline EdfRunReport run_edf_schedule(const Network& net, std::vector<Packet> pkts,
                                     const SchedulerParams& p) {
    for (const Packet& pk : pkts)
        if (!pk.path || pk.deadlines.size() != pk.path->links.size())
            throw std::invalid_argument("run_edf_schedule needs complete deadline assignments");
    std::sort(pkts.begin(), pkts.end(), [&](const Packet& a, const Packet& b) {
        const auto ga = interval_index(a.inject_time, p.M), gb = interval_index(b.inject_time, p.M);
        if (ga != gb) return ga < gb;
        return a.id < b.id;
    });

    EngineOptions opts;
    opts.rule = SchedRule::EDF;
    opts.log_services = true;
    Engine eng(net, opts);

    std::size_t next = 0;
    while (next < pkts.size() || eng.total_queued() > 0) {
        while (next < pkts.size() && interval_index(pkts[next].inject_time, p.M) * p.M <= eng.now()) {
            const Packet& pk = pkts[next];
            SimPacket sp;
            sp.id = pk.id;
            sp.inject_time = pk.inject_time;
            sp.src = pk.source;
            sp.dst = pk.dest;
            sp.path = pk.path->links;
            sp.deadlines = pk.deadlines;
            eng.inject(std::move(sp));
            ++next;
        }
        eng.step();
    }

    // k-th service of a packet must land by its k-th deadline
    std::map<int, const Packet*> by_id;
    for (const Packet& pk : pkts) by_id[pk.id] = &pk;
    std::map<int, std::size_t> hops_done;
    EdfRunReport rep;
    for (const ServiceEvent& ev : eng.services()) {
        const Packet& pk = *by_id.at(ev.packet_id);
        const std::size_t k = hops_done[ev.packet_id]++;
        if (ev.step > pk.deadlines[k]) {
            rep.deadlines_met = false;
            ++rep.deadline_misses;
        }
    }
    for (const Delivery& d : eng.deliveries()) {
        rep.max_delay = std::max(rep.max_delay, d.delay());
        if (d.delay() > 2 * p.M) rep.within_2M = false;
        ++rep.delivered;
    }
    rep.deliveries = eng.deliveries();
    return rep;
}

}  // namespace aqsim
