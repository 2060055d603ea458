#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "aqsim/model.hpp"

namespace aqsim {

struct AdmissibilityReport {
    bool admissible = true;
    LinkId worst_link = -1;           // -1 when the trace is empty
    Step worst_window_start = 0;
    Step worst_window_length = 0;
    std::int64_t worst_load = 0;      // packets through worst_link in the worst window
    double bound = 0.0;               // length * r for that window

    double excess() const { return static_cast<double>(worst_load) - bound; }
};

// (w', r') such that weak (w,r)-admissibility implies strong (w',r')-
// admissibility: r' = (1+r)/2 and w' = ceil(4wr/(1-r)). The ceiling keeps
// window lengths integral; rounding up only weakens the adversary's side.
inline std::pair<std::int64_t, double> weak_to_strong_params(std::int64_t w, double r) {
    if (!(r > 0.0) || r >= 1.0) throw std::invalid_argument("weak_to_strong_params requires 0 < r < 1");
    if (w < 1) throw std::invalid_argument("window must be >= 1");
    const double w_real = 4.0 * static_cast<double>(w) * r / (1.0 - r);
    return {static_cast<std::int64_t>(std::ceil(w_real - 1e-12)), (1.0 + r) / 2.0};
}

namespace detail {

// Injection times per link, sorted, for the links that appear on any path.
inline std::map<LinkId, std::vector<Step>> per_link_times(const InjectionTrace& trace) {
    std::map<LinkId, std::vector<Step>> times;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const TraceEvent& ev = trace.events[i];
        if (!ev.path)
            throw std::invalid_argument("event " + std::to_string(i) + " has no path");
        for (LinkId e : ev.path->links) times[e].push_back(ev.t);
    }
    for (auto& [e, v] : times) std::sort(v.begin(), v.end());
    return times;
}

struct WorstTracker {
    AdmissibilityReport rep;
    bool any = false;

    void offer(LinkId e, Step start, Step length, std::int64_t load, double bound) {
        const double excess = static_cast<double>(load) - bound;
        if (!any || excess > rep.excess() ||
            (excess == rep.excess() &&
             std::tuple(length, start, e) < std::tuple(rep.worst_window_length, rep.worst_window_start, rep.worst_link))) {
            rep.worst_link = e;
            rep.worst_window_start = start;
            rep.worst_window_length = length;
            rep.worst_load = load;
            rep.bound = bound;
            any = true;
        }
    }
};

}  // namespace detail

// Strong (w,r)-admissibility: every interval [t, t+T) with integer T >= w
// and every link carries at most T*r injected paths. It suffices to scan
// windows that start at an injection and have the minimal length covering a
// run of injections (longer or shifted windows are dominated).
inline AdmissibilityReport check_strong(const InjectionTrace& trace, std::int64_t w, double r) {
    if (w < 1) throw std::invalid_argument("window must be >= 1");
    if (!(r > 0.0) || r >= 1.0) throw std::invalid_argument("check_strong requires 0 < r < 1");
    auto times = detail::per_link_times(trace);

    detail::WorstTracker worst;
    for (const auto& [e, v] : times) {
        const std::size_t k = v.size();
        for (std::size_t i = 0; i < k; ++i) {
            if (i > 0 && v[i] == v[i - 1]) continue;  // same window as the run start
            std::size_t cnt_ptr = i;
            for (std::size_t j = i; j < k; ++j) {
                if (j + 1 < k && v[j + 1] == v[j]) continue;  // advance to the end of the run
                const Step span = v[j] - v[i] + 1;
                const Step T = std::max<Step>(w, span);
                const Step end = v[i] + T;
                while (cnt_ptr < k && v[cnt_ptr] < end) ++cnt_ptr;
                const auto load = static_cast<std::int64_t>(cnt_ptr - i);
                worst.offer(e, v[i], T, load, static_cast<double>(T) * r);
            }
        }
    }
    if (!worst.any) {                       // empty trace: vacuously admissible
        worst.rep.worst_window_length = w;
        worst.rep.bound = static_cast<double>(w) * r;
    }
    worst.rep.admissible = static_cast<double>(worst.rep.worst_load) <= worst.rep.bound;
    return worst.rep;
}

// Weak (w,r)-admissibility over the fixed partition [0,w), [w,2w), ...
inline AdmissibilityReport check_weak(const InjectionTrace& trace, std::int64_t w, double r) {
    if (w < 1) throw std::invalid_argument("window must be >= 1");
    auto times = detail::per_link_times(trace);

    detail::WorstTracker worst;
    const double bound = static_cast<double>(w) * r;
    for (const auto& [e, v] : times) {
        std::int64_t count = 0;
        Step window = -1;
        for (Step t : v) {
            const Step idx = t / w;
            if (idx != window) {
                if (window >= 0) worst.offer(e, window * w, w, count, bound);
                window = idx;
                count = 0;
            }
            ++count;
        }
        if (window >= 0) worst.offer(e, window * w, w, count, bound);
    }
    if (!worst.any) {
        worst.rep.worst_window_length = w;
        worst.rep.bound = bound;
    }
    worst.rep.admissible = static_cast<double>(worst.rep.worst_load) <= worst.rep.bound;
    return worst.rep;
}

}  // namespace aqsim
