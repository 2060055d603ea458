#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "aqsim/model.hpp"
#include "aqsim/shortest_path.hpp"

namespace aqsim {

enum class RoutingVariant { PerPacket, Batched, InBand };

inline const char* to_string(RoutingVariant v) {
    switch (v) {
        case RoutingVariant::PerPacket: return "perpacket";
        case RoutingVariant::Batched: return "batched";
        case RoutingVariant::InBand: return "inband";
    }
    return "?";
}

// Protocol constants. delta can underflow a double for the Batched/InBand
// variants on larger networks (its exponent scales with m), so log_delta is
// the authoritative value and all congestion bookkeeping is scale-invariant.
struct RoutingParams {
    double r = 0.0;       // adversary rate
    double R = 0.0;       // target rate, r < R < 1
    std::int64_t w = 0;   // window length in steps
    int m = 0;            // link count
    RoutingVariant variant = RoutingVariant::PerPacket;
    double mu = 0.0;
    double delta = 0.0;     // exp(log_delta); 0 if underflowed
    double log_delta = 0.0;
    std::int64_t t = 0;     // windows per phase

    Step phase_steps() const { return t * w; }
};

inline RoutingParams compute_routing_params(double r, double R, std::int64_t w, int m,
                                            RoutingVariant variant) {
    if (!(r > 0.0) || !(r < 1.0)) throw std::invalid_argument("r must be in (0,1)");
    if (!(R > r) || !(R < 1.0)) throw std::invalid_argument("R must satisfy r < R < 1");
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (w < 1) throw std::invalid_argument("w must be >= 1");

    RoutingParams p;
    p.r = r;
    p.R = R;
    p.w = w;
    p.m = m;
    p.variant = variant;

    const double base = 1.0 - std::cbrt(r / R);
    switch (variant) {
        case RoutingVariant::PerPacket: p.mu = base; break;
        case RoutingVariant::Batched: p.mu = base / static_cast<double>(m); break;
        case RoutingVariant::InBand: p.mu = base / (2.0 * static_cast<double>(m)); break;
    }
    const double rmu = r * p.mu;
    p.log_delta = std::log((1.0 - rmu) / static_cast<double>(m)) / rmu;
    p.delta = std::exp(p.log_delta);
    const double log_ratio = std::log(1.0 - rmu) - std::log(static_cast<double>(m)) - p.log_delta;
    p.t = static_cast<std::int64_t>(std::floor(((1.0 - rmu) / rmu) * log_ratio)) + 1;

    if (!(p.mu > 0.0 && p.mu < 1.0)) throw std::logic_error("mu out of range");
    if (p.t < 1) throw std::logic_error("t < 1");
    return p;
}

// In-band control traffic needs tau steps per control packet and a window
// wide enough to carry both directions plus the control load itself.
inline std::int64_t inband_tau(int n, int m) {
    const auto nn = static_cast<std::int64_t>(n);
    const auto mm = static_cast<std::int64_t>(m);
    return nn * nn * nn + mm * nn * nn;
}

inline void validate_inband_concrete(const RoutingParams& p, int n, int m) {
    const std::int64_t tau = inband_tau(n, m);
    if (p.w < 2 * tau)
        throw std::invalid_argument("in-band concrete mode needs w >= 2*tau = " + std::to_string(2 * tau));
    const double control_budget = static_cast<double>(p.w) * (1.0 - p.r) / 2.0;
    const double control_load = static_cast<double>(n) * n + static_cast<double>(m) * n;
    if (control_budget < control_load)
        throw std::invalid_argument("in-band concrete mode needs w(1-r)/2 >= n^2 + mn");
}

struct ControlPacket {
    bool forward = true;     // forward: per (src,dst) count; otherwise congestion broadcast
    NodeId src = -1;
    NodeId dst = -1;
    Path path;
    std::int64_t window = 0;
    std::int64_t count = 0;       // forward payload
    LinkId subject_link = -1;     // broadcast payload
};

struct PhaseDiagnostics {
    int phase_index = 0;
    std::int64_t windows = 0;
    double log_D_start = 0.0;  // log(m * delta)
    double log_D_end = 0.0;    // log D_t
    double max_log_D_step = -std::numeric_limits<double>::infinity();  // max log(D_i/D_{i-1})
    std::int64_t max_load = 0;
    std::vector<std::int64_t> loads;           // per-link routed paths this phase
    std::vector<double> log_D_per_window;      // retained when keep_window_series is set
    std::vector<double> log_alpha_per_window;  // retained when track_alpha is set
};

struct SourceRouterOptions {
    bool keep_window_series = false;
    bool track_alpha = false;
};

// Online congestion-based route assignment. Congestion starts at delta on
// every link, grows multiplicatively as paths are assigned, and resets at
// phase boundaries (t windows of w steps, aligned to absolute time 0).
// Stored values are chat(e) = c(e) * exp(-log_scale_) so that huge dynamic
// ranges stay representable; shortest paths are scale-invariant.
class SourceRouter {
public:
    SourceRouter(const Network& net, const RoutingParams& params, SourceRouterOptions opts = {})
        : net_(&net), params_(params), opts_(opts) {
        if (net.link_count() != params.m)
            throw std::invalid_argument("params.m does not match network link count");
        reset_phase_state();
    }

    const RoutingParams& params() const { return params_; }
    std::int64_t window_index() const { return window_index_; }
    int phase_index() const { return phase_index_; }
    std::int64_t global_window() const { return global_window_; }

    double log_congestion(LinkId e) const {
        return log_scale_ + std::log(chat_[static_cast<std::size_t>(e)]);
    }

    // Route a packet injected in the current window.
    Path route_packet(NodeId src, NodeId dst) {
        if (src == dst) return Path{};
        Path p;
        if (params_.variant == RoutingVariant::PerPacket) {
            auto sp = shortest_path(*net_, chat_, src, dst);
            if (!sp) throw std::runtime_error("destination unreachable");
            p = std::move(*sp);
            const double factor = 1.0 + params_.mu / static_cast<double>(params_.w);
            for (LinkId e : p.links) chat_[static_cast<std::size_t>(e)] *= factor;
        } else {
            const std::int64_t key = static_cast<std::int64_t>(src) * net_->node_count() + dst;
            auto it = window_routes_.find(key);
            if (it == window_routes_.end()) {
                auto sp = shortest_path(*net_, chat_, src, dst);
                if (!sp) throw std::runtime_error("destination unreachable");
                it = window_routes_.emplace(key, std::move(*sp)).first;
                window_pair_counts_.emplace_back(key, 0);
            }
            p = it->second;
            for (auto& [k, c] : window_pair_counts_)
                if (k == key) {
                    ++c;
                    break;
                }
            for (LinkId e : p.links) bump_count(counts_cur_, nonzero_cur_, e);
        }
        for (LinkId e : p.links) ++loads_[static_cast<std::size_t>(e)];
        if (opts_.track_alpha) window_pkts_.emplace_back(src, dst);
        return p;
    }

    // Close the current window (Batched/InBand only; PerPacket windows carry
    // no deferred update). Not valid on the last window of a phase: that one
    // is closed by end_phase_check().
    void end_window() {
        if (params_.variant == RoutingVariant::PerPacket)
            throw std::logic_error("end_window is not defined for the per-packet variant");
        if (window_index_ >= params_.t)
            throw std::logic_error("last window of the phase: call end_phase_check");
        process_window_end();
    }

    // Close window t, emit diagnostics, reset congestion to delta and start
    // the next phase.
    PhaseDiagnostics end_phase_check() {
        if (window_index_ != params_.t)
            throw std::logic_error("end_phase_check requires window_index == t");
        process_window_end();
        PhaseDiagnostics d = std::move(diag_);
        d.loads = loads_;
        d.max_load = *std::max_element(d.loads.begin(), d.loads.end());
        completed_.push_back(d);
        ++phase_index_;
        reset_phase_state();
        return d;
    }

    // Drive window/phase boundaries from absolute time: after this call the
    // router is in the window containing `time`.
    void advance_to(Step time) {
        const std::int64_t target = time / params_.w;
        while (global_window_ < target) {
            if (window_index_ == params_.t) {
                end_phase_check();
            } else {
                process_window_end();
            }
        }
    }

    Path route_at(Step time, NodeId src, NodeId dst) {
        advance_to(time);
        return route_packet(src, dst);
    }

    // Run the current phase out to its end (no further injections).
    PhaseDiagnostics finish_phase() {
        while (window_index_ < params_.t) process_window_end();
        return end_phase_check();
    }

    const std::vector<PhaseDiagnostics>& completed_phases() const { return completed_; }

    // One forward control packet per (src,dst) pair active in the current
    // window, plus one congestion broadcast per link to every other node.
    // Total is at most n^2 + mn.
    std::vector<ControlPacket> control_plan() const {
        if (params_.variant != RoutingVariant::InBand)
            throw std::logic_error("control_plan is only defined for the in-band variant");
        std::vector<ControlPacket> out;
        std::vector<double> hop(chat_.size(), 1.0);
        for (const auto& [key, count] : window_pair_counts_) {
            if (count == 0) continue;
            ControlPacket cp;
            cp.forward = true;
            cp.src = static_cast<NodeId>(key / net_->node_count());
            cp.dst = static_cast<NodeId>(key % net_->node_count());
            cp.path = window_routes_.at(key);
            cp.window = global_window_;
            cp.count = count;
            out.push_back(std::move(cp));
        }
        for (const Link& l : net_->links()) {
            for (NodeId v = 0; v < net_->node_count(); ++v) {
                if (v == l.tail) continue;
                auto sp = shortest_path(*net_, hop, l.tail, v);
                if (!sp) continue;  // no route back to this source; nothing to carry
                ControlPacket cp;
                cp.forward = false;
                cp.src = l.tail;
                cp.dst = v;
                cp.path = std::move(*sp);
                cp.window = global_window_;
                cp.subject_link = l.id;
                out.push_back(std::move(cp));
            }
        }
        return out;
    }

private:
    static void bump_count(std::vector<std::int64_t>& counts, std::vector<LinkId>& nonzero, LinkId e) {
        if (counts[static_cast<std::size_t>(e)] == 0) nonzero.push_back(e);
        ++counts[static_cast<std::size_t>(e)];
    }

    void reset_phase_state() {
        const auto m = static_cast<std::size_t>(params_.m);
        chat_.assign(m, 1.0);
        chat_prev_.assign(m, 1.0);
        log_scale_ = params_.log_delta;
        counts_cur_.assign(m, 0);
        counts_prev_.assign(m, 0);
        nonzero_cur_.clear();
        nonzero_prev_.clear();
        touched_last_.clear();
        loads_.assign(m, 0);
        window_routes_.clear();
        window_pair_counts_.clear();
        window_pkts_.clear();
        window_index_ = 1;
        diag_ = PhaseDiagnostics{};
        diag_.phase_index = phase_index_;
        diag_.windows = params_.t;
        diag_.log_D_start = params_.log_delta + std::log(static_cast<double>(params_.m));
        prev_log_D_ = diag_.log_D_start;
    }

    void apply_batched_update() {
        const double k = params_.mu / static_cast<double>(params_.w);
        for (LinkId e : nonzero_cur_) {
            const auto i = static_cast<std::size_t>(e);
            chat_[i] *= 1.0 + static_cast<double>(counts_cur_[i]) * k;
            counts_cur_[i] = 0;
        }
        nonzero_cur_.clear();
    }

    void apply_inband_update() {
        // c_{i+1}(e) = c_i(e) + c_{i-1}(e) * N_i(e) * mu / w, with the counts
        // collected one window ago. chat_prev holds c_{i-1} for links the
        // last update touched and equals chat everywhere else.
        const double k = params_.mu / static_cast<double>(params_.w);
        std::vector<LinkId> updated;
        updated.reserve(nonzero_prev_.size());
        for (LinkId e : nonzero_prev_) {
            const auto i = static_cast<std::size_t>(e);
            const double old = chat_[i];
            chat_[i] = old + chat_prev_[i] * static_cast<double>(counts_prev_[i]) * k;
            chat_prev_[i] = old;
            counts_prev_[i] = 0;
            updated.push_back(e);
        }
        nonzero_prev_.clear();
        // Links bumped last window but quiet this window: their one-window-
        // back value catches up to the unchanged current value.
        for (LinkId e : touched_last_) {
            if (std::find(updated.begin(), updated.end(), e) == updated.end())
                chat_prev_[static_cast<std::size_t>(e)] = chat_[static_cast<std::size_t>(e)];
        }
        touched_last_ = std::move(updated);
        std::swap(counts_prev_, counts_cur_);
        std::swap(nonzero_prev_, nonzero_cur_);
    }

    void process_window_end() {
        switch (params_.variant) {
            case RoutingVariant::PerPacket: break;
            case RoutingVariant::Batched: apply_batched_update(); break;
            case RoutingVariant::InBand: apply_inband_update(); break;
        }
        if (opts_.track_alpha) record_alpha();
        window_routes_.clear();
        window_pair_counts_.clear();
        window_pkts_.clear();

        renormalize_if_needed();
        double sum = 0.0;
        for (double v : chat_) sum += v;
        const double log_D = log_scale_ + std::log(sum);
        diag_.max_log_D_step = std::max(diag_.max_log_D_step, log_D - prev_log_D_);
        prev_log_D_ = log_D;
        diag_.log_D_end = log_D;
        if (opts_.keep_window_series) diag_.log_D_per_window.push_back(log_D);

        ++window_index_;
        ++global_window_;
    }

    void record_alpha() {
        // alpha_i: total congestion, under end-of-window c_i, of the least
        // congested paths of this window's packets. Diagnostic only.
        double sum = 0.0;
        for (const auto& [src, dst] : window_pkts_) {
            auto sp = shortest_path(*net_, chat_, src, dst);
            if (!sp) continue;
            for (LinkId e : sp->links) sum += chat_[static_cast<std::size_t>(e)];
        }
        diag_.log_alpha_per_window.push_back(sum > 0.0 ? log_scale_ + std::log(sum)
                                                       : -std::numeric_limits<double>::infinity());
    }

    void renormalize_if_needed() {
        double mx = 0.0;
        for (double v : chat_) mx = std::max(mx, v);
        if (mx > 1e250) {
            const double lf = std::log(mx);
            for (double& v : chat_) v /= mx;
            for (double& v : chat_prev_) v /= mx;
            log_scale_ += lf;
        }
    }

    const Network* net_;
    RoutingParams params_;
    SourceRouterOptions opts_;

    std::vector<double> chat_;       // c / exp(log_scale_)
    std::vector<double> chat_prev_;  // previous-window congestion (InBand)
    double log_scale_ = 0.0;

    std::vector<std::int64_t> counts_cur_, counts_prev_;
    std::vector<LinkId> nonzero_cur_, nonzero_prev_, touched_last_;
    std::vector<std::int64_t> loads_;

    std::unordered_map<std::int64_t, Path> window_routes_;
    std::vector<std::pair<std::int64_t, std::int64_t>> window_pair_counts_;
    std::vector<std::pair<NodeId, NodeId>> window_pkts_;

    std::int64_t window_index_ = 1;  // in [1, t]
    int phase_index_ = 0;
    std::int64_t global_window_ = 0;
    double prev_log_D_ = 0.0;
    PhaseDiagnostics diag_;
    std::vector<PhaseDiagnostics> completed_;
};

}  // namespace aqsim
