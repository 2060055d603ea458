#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include "aqsim/model.hpp"

namespace aqsim {

namespace detail {

// Label order: total weight, then hop count, then lexicographic link-id
// sequence. Appending the same link to two labels preserves their order, so
// label-setting search remains correct with this composite key.
struct PathLabel {
    double dist = std::numeric_limits<double>::infinity();
    int hops = 0;
    std::vector<LinkId> seq;

    bool better_than(const PathLabel& o) const {
        if (dist != o.dist) return dist < o.dist;
        if (hops != o.hops) return hops < o.hops;
        return std::lexicographical_compare(seq.begin(), seq.end(), o.seq.begin(), o.seq.end());
    }
};

}  // namespace detail

// Deterministic min-weight path under non-negative per-link weights.
// Ties break by fewest links, then lexicographically smallest link-id
// sequence. Returns the empty path for src == dst and nullopt when dst is
// unreachable.
inline std::optional<Path> shortest_path(const Network& net, std::span<const double> weights,
                                         NodeId src, NodeId dst) {
    if (static_cast<int>(weights.size()) != net.link_count())
        throw std::invalid_argument("weight vector size does not match link count");
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and >= 0");
    if (src < 0 || src >= net.node_count() || dst < 0 || dst >= net.node_count())
        throw std::invalid_argument("node id out of range");
    if (src == dst) return Path{};

    using detail::PathLabel;
    std::vector<PathLabel> best(static_cast<std::size_t>(net.node_count()));
    std::vector<char> settled(static_cast<std::size_t>(net.node_count()), 0);

    struct Entry {
        PathLabel label;
        NodeId node;
    };
    auto cmp = [](const Entry& a, const Entry& b) { return b.label.better_than(a.label); };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> pq(cmp);

    best[static_cast<std::size_t>(src)] = PathLabel{0.0, 0, {}};
    pq.push(Entry{best[static_cast<std::size_t>(src)], src});

    while (!pq.empty()) {
        Entry e = pq.top();
        pq.pop();
        const auto u = static_cast<std::size_t>(e.node);
        if (settled[u]) continue;
        settled[u] = 1;
        if (e.node == dst) break;
        for (LinkId lid : net.out_links(e.node)) {
            const Link& l = net.link(lid);
            const auto v = static_cast<std::size_t>(l.head);
            if (settled[v]) continue;
            PathLabel cand{e.label.dist + weights[static_cast<std::size_t>(lid)], e.label.hops + 1, e.label.seq};
            cand.seq.push_back(lid);
            if (cand.better_than(best[v])) {
                best[v] = cand;
                pq.push(Entry{std::move(cand), l.head});
            }
        }
    }

    const auto d = static_cast<std::size_t>(dst);
    if (!settled[d] && best[d].dist == std::numeric_limits<double>::infinity()) return std::nullopt;
    return Path{best[d].seq};
}

}  // namespace aqsim
