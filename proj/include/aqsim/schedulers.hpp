#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "aqsim/model.hpp"

namespace aqsim {

// Greedy per-link queue disciplines. Every rule serves exactly one packet
// per step from a nonempty queue; ties break by packet id, except EDF which
// breaks by (inject_time, id).
enum class SchedRule { FIFO, LIFO, NTG, FTG, LIS, SIS, EDF };

inline SchedRule sched_rule_from_string(const std::string& s) {
    if (s == "fifo") return SchedRule::FIFO;
    if (s == "lifo") return SchedRule::LIFO;
    if (s == "ntg") return SchedRule::NTG;
    if (s == "ftg") return SchedRule::FTG;
    if (s == "lis") return SchedRule::LIS;
    if (s == "sis") return SchedRule::SIS;
    if (s == "edf") return SchedRule::EDF;
    throw std::invalid_argument("unknown scheduler rule: " + s);
}

inline const char* to_string(SchedRule r) {
    switch (r) {
        case SchedRule::FIFO: return "fifo";
        case SchedRule::LIFO: return "lifo";
        case SchedRule::NTG: return "ntg";
        case SchedRule::FTG: return "ftg";
        case SchedRule::LIS: return "lis";
        case SchedRule::SIS: return "sis";
        case SchedRule::EDF: return "edf";
    }
    return "?";
}

// Totally ordered service key; the minimum is served first. Control packets
// outrank all data packets.
struct QueueKey {
    int rank = 1;  // 0 for control packets
    std::int64_t k1 = 0;
    std::int64_t k2 = 0;
    int id = 0;

    friend bool operator<(const QueueKey& a, const QueueKey& b) {
        if (a.rank != b.rank) return a.rank < b.rank;
        if (a.k1 != b.k1) return a.k1 < b.k1;
        if (a.k2 != b.k2) return a.k2 < b.k2;
        return a.id < b.id;
    }
};

// remaining_hops counts links not yet crossed, including the current one.
inline QueueKey make_queue_key(SchedRule rule, bool control, Step inject_time, Step local_arrival,
                               int remaining_hops, Step deadline, int id) {
    QueueKey k;
    k.rank = control ? 0 : 1;
    k.id = id;
    switch (rule) {
        case SchedRule::FIFO: k.k1 = local_arrival; break;
        case SchedRule::LIFO: k.k1 = -local_arrival; break;
        case SchedRule::NTG: k.k1 = remaining_hops; break;
        case SchedRule::FTG: k.k1 = -remaining_hops; break;
        case SchedRule::LIS: k.k1 = inject_time; break;
        case SchedRule::SIS: k.k1 = -inject_time; break;
        case SchedRule::EDF:
            k.k1 = deadline;
            k.k2 = inject_time;
            break;
    }
    return k;
}

}  // namespace aqsim
