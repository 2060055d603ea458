#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aqsim/model.hpp"
#include "aqsim/schedulers.hpp"

namespace aqsim {

// A packet inside the engine: its route, how far it has advanced, and when
// it became eligible at the current link.
struct SimPacket {
    int id = -1;
    Step inject_time = 0;
    NodeId src = -1;
    NodeId dst = -1;
    std::vector<LinkId> path;
    std::vector<Step> deadlines;  // one per path link when the EDF protocol is active
    int pos = 0;                  // index of the current link in path
    Step local_arrival = 0;
    bool control = false;

    int remaining_hops() const { return static_cast<int>(path.size()) - pos; }
    Step current_deadline() const {
        return pos < static_cast<int>(deadlines.size()) ? deadlines[static_cast<std::size_t>(pos)] : 0;
    }
};

// The spec's per-queue selection: index of the packet the rule serves next.
inline std::size_t select_packet(SchedRule rule, std::span<const SimPacket> queue) {
    if (queue.empty()) throw std::logic_error("select on empty queue");
    std::size_t best = 0;
    QueueKey best_key = make_queue_key(rule, queue[0].control, queue[0].inject_time, queue[0].local_arrival,
                                       queue[0].remaining_hops(), queue[0].current_deadline(), queue[0].id);
    for (std::size_t i = 1; i < queue.size(); ++i) {
        QueueKey k = make_queue_key(rule, queue[i].control, queue[i].inject_time, queue[i].local_arrival,
                                    queue[i].remaining_hops(), queue[i].current_deadline(), queue[i].id);
        if (k < best_key) {
            best_key = k;
            best = i;
        }
    }
    return best;
}

struct Delivery {
    int id = -1;
    Step inject_time = 0;
    Step deliver_step = 0;
    bool control = false;

    Step delay() const { return deliver_step - inject_time + 1; }
};

struct ServiceEvent {
    Step step = 0;
    LinkId link = -1;
    int packet_id = -1;
    Step local_arrival = 0;
};

struct EngineOptions {
    SchedRule rule = SchedRule::FIFO;
    bool log_services = false;       // per-service events (memory heavy on long runs)
    bool record_total_series = false;
    std::int64_t queue_cap = -1;     // abort guard for instability runs; -1 = off
};

// Discrete-time execution core. Each step: (a) injections for this step
// enter their first link's queue, (b) every link with a nonempty queue
// transmits the packet its rule selects, (c) transmitted packets join the
// next queue (or are delivered) before the following step.
class Engine {
public:
    Engine(const Network& net, EngineOptions opts = {})
        : net_(&net),
          opts_(opts),
          queues_(static_cast<std::size_t>(net.link_count())),
          max_queue_(static_cast<std::size_t>(net.link_count()), 0) {}

    Step now() const { return now_; }
    SchedRule rule() const { return opts_.rule; }

    // A packet injected at step s is eligible for service in the same step.
    void inject(SimPacket pkt) {
        if (pkt.path.empty()) {  // zero-hop no-op: delivered on the spot
            deliveries_.push_back(Delivery{pkt.id, pkt.inject_time, now_, pkt.control});
            ++injected_;
            ++delivered_;
            return;
        }
        pkt.pos = 0;
        pkt.local_arrival = now_;
        ++injected_;
        enqueue(std::move(pkt));
    }

    void step() {
        transmitted_.clear();
        for (std::size_t li = 0; li < queues_.size(); ++li) {
            auto& q = queues_[li];
            if (q.empty()) continue;
            std::pop_heap(q.begin(), q.end(), heap_cmp_);
            const int idx = q.back().pkt;
            q.pop_back();
            --queued_;
            if (opts_.log_services)
                services_.push_back(ServiceEvent{now_, static_cast<LinkId>(li), pkts_[idx].id,
                                                 pkts_[idx].local_arrival});
            transmitted_.push_back(idx);
        }
        for (int idx : transmitted_) {
            SimPacket& p = pkts_[static_cast<std::size_t>(idx)];
            ++p.pos;
            if (p.pos == static_cast<int>(p.path.size())) {
                deliveries_.push_back(Delivery{p.id, p.inject_time, now_, p.control});
                ++delivered_;
                live_[static_cast<std::size_t>(idx)] = 0;
            } else {
                p.local_arrival = now_ + 1;
                push_queue(idx);
            }
        }
        ++now_;
        for (std::size_t li = 0; li < queues_.size(); ++li)
            max_queue_[li] = std::max<std::int64_t>(max_queue_[li], static_cast<std::int64_t>(queues_[li].size()));
        if (opts_.record_total_series) total_series_.push_back(queued_);
        check_conservation();
        if (opts_.queue_cap >= 0 && queued_ > opts_.queue_cap) cap_exceeded_ = true;
    }

    // Packet conservation: everything injected is delivered or queued once
    // arrivals have settled.
    void check_conservation() const {
        if (delivered_ + queued_ != injected_)
            throw std::logic_error("packet conservation violated at step " + std::to_string(now_ - 1));
    }

    std::int64_t total_queued() const { return queued_; }
    std::int64_t injected_count() const { return injected_; }
    std::int64_t delivered_count() const { return delivered_; }
    bool cap_exceeded() const { return cap_exceeded_; }

    std::int64_t queue_size(LinkId e) const { return static_cast<std::int64_t>(queues_[static_cast<std::size_t>(e)].size()); }
    std::int64_t max_queue(LinkId e) const { return max_queue_[static_cast<std::size_t>(e)]; }

    const std::vector<Delivery>& deliveries() const { return deliveries_; }
    const std::vector<ServiceEvent>& services() const { return services_; }
    const std::vector<std::int64_t>& total_series() const { return total_series_; }

    void for_each_queued(LinkId e, const std::function<void(const SimPacket&)>& fn) const {
        for (const HeapEntry& h : queues_[static_cast<std::size_t>(e)]) fn(pkts_[static_cast<std::size_t>(h.pkt)]);
    }

    std::int64_t count_queued(LinkId e, NodeId dest) const {
        std::int64_t c = 0;
        for_each_queued(e, [&](const SimPacket& p) {
            if (p.dst == dest && !p.control) ++c;
        });
        return c;
    }

    // Packets still in the system (queued anywhere) matching a predicate.
    std::int64_t count_live(const std::function<bool(const SimPacket&)>& pred) const {
        std::int64_t c = 0;
        for (std::size_t i = 0; i < pkts_.size(); ++i)
            if (live_[i] && pred(pkts_[i])) ++c;
        return c;
    }

private:
    struct HeapEntry {
        QueueKey key;
        int pkt = -1;
    };
    // std::push_heap keeps the max on top, so invert: the best key is the
    // smallest.
    struct HeapCmp {
        bool operator()(const HeapEntry& a, const HeapEntry& b) const { return b.key < a.key; }
    };

    void enqueue(SimPacket pkt) {
        pkts_.push_back(std::move(pkt));
        live_.push_back(1);
        push_queue(static_cast<int>(pkts_.size()) - 1);
    }

    void push_queue(int idx) {
        const SimPacket& p = pkts_[static_cast<std::size_t>(idx)];
        const LinkId e = p.path[static_cast<std::size_t>(p.pos)];
        QueueKey key = make_queue_key(opts_.rule, p.control, p.inject_time, p.local_arrival,
                                      p.remaining_hops(), p.current_deadline(), p.id);
        auto& q = queues_[static_cast<std::size_t>(e)];
        q.push_back(HeapEntry{key, idx});
        std::push_heap(q.begin(), q.end(), heap_cmp_);
        ++queued_;
    }

    const Network* net_;
    EngineOptions opts_;
    std::deque<SimPacket> pkts_;
    std::deque<char> live_;
    std::vector<std::vector<HeapEntry>> queues_;
    std::vector<std::int64_t> max_queue_;
    std::vector<int> transmitted_;
    std::vector<Delivery> deliveries_;
    std::vector<ServiceEvent> services_;
    std::vector<std::int64_t> total_series_;
    HeapCmp heap_cmp_;
    Step now_ = 0;
    std::int64_t injected_ = 0;
    std::int64_t delivered_ = 0;
    std::int64_t queued_ = 0;
    bool cap_exceeded_ = false;
};

// Runs a path-annotated trace to completion (all packets delivered) or to
// `horizon`, whichever comes later.
inline void run_trace(Engine& eng, const InjectionTrace& trace, Step horizon = 0) {
    std::size_t next = 0;
    int id = 0;
    while (next < trace.events.size() || eng.total_queued() > 0 || eng.now() < horizon) {
        while (next < trace.events.size() && trace.events[next].t == eng.now()) {
            const TraceEvent& ev = trace.events[next];
            if (!ev.path) throw std::invalid_argument("run_trace needs path-annotated events");
            SimPacket p;
            p.id = id++;
            p.inject_time = ev.t;
            p.src = ev.src;
            p.dst = ev.dst;
            p.path = ev.path->links;
            eng.inject(std::move(p));
            ++next;
        }
        eng.step();
        if (eng.cap_exceeded()) break;
    }
}

}  // namespace aqsim
