#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aqsim {

using NodeId = int;
using LinkId = int;
using Step = std::int64_t;

// A directed link of a multigraph. Link ids are dense 0..m-1; several links
// may share the same (tail, head) pair.
struct Link {
    LinkId id = -1;
    NodeId tail = -1;
    NodeId head = -1;
    std::string label;
};

struct LinkSpec {
    NodeId tail = -1;
    NodeId head = -1;
    std::string label;
};

// Immutable after construction; safe to share read-only across runs.
class Network {
public:
    Network() = default;

    Network(int node_count, std::vector<Link> links)
        : n_(node_count), links_(std::move(links)), out_(node_count) {
        for (const Link& l : links_) {
            if (l.tail < 0 || l.tail >= n_ || l.head < 0 || l.head >= n_)
                throw std::invalid_argument("link endpoint out of range");
            out_[l.tail].push_back(l.id);
        }
    }

    int node_count() const { return n_; }
    int link_count() const { return static_cast<int>(links_.size()); }

    const Link& link(LinkId id) const { return links_.at(static_cast<std::size_t>(id)); }
    const std::vector<Link>& links() const { return links_; }
    const std::vector<LinkId>& out_links(NodeId v) const { return out_.at(static_cast<std::size_t>(v)); }

private:
    int n_ = 0;
    std::vector<Link> links_;
    std::vector<std::vector<LinkId>> out_;
};

// Builds a network with an explicit node count. Link ids follow spec order.
inline Network build_network(int node_count, std::span<const LinkSpec> spec) {
    if (node_count < 0) throw std::invalid_argument("negative node count");
    std::vector<Link> links;
    links.reserve(spec.size());
    int id = 0;
    for (const LinkSpec& s : spec) {
        if (s.tail < 0 || s.tail >= node_count || s.head < 0 || s.head >= node_count)
            throw std::invalid_argument("link " + std::to_string(id) + " references node outside 0.." +
                                        std::to_string(node_count - 1));
        links.push_back(Link{id, s.tail, s.head, s.label});
        ++id;
    }
    return Network(node_count, std::move(links));
}

// Infers the node count as max id + 1 and requires every id in 0..max to be
// referenced; gaps are rejected.
inline Network build_network(std::span<const LinkSpec> spec) {
    int max_id = -1;
    for (const LinkSpec& s : spec) {
        max_id = std::max(max_id, std::max(s.tail, s.head));
        if (s.tail < 0 || s.head < 0) throw std::invalid_argument("negative node id");
    }
    const int n = max_id + 1;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const LinkSpec& s : spec) {
        seen[static_cast<std::size_t>(s.tail)] = 1;
        seen[static_cast<std::size_t>(s.head)] = 1;
    }
    for (int v = 0; v < n; ++v)
        if (!seen[static_cast<std::size_t>(v)])
            throw std::invalid_argument("non-contiguous node ids: node " + std::to_string(v) +
                                        " is never referenced");
    return build_network(n, spec);
}

// An ordered list of link ids. Consecutive links must be incident and no
// link id repeats.
struct Path {
    std::vector<LinkId> links;

    bool empty() const { return links.empty(); }
    int size() const { return static_cast<int>(links.size()); }

    bool operator==(const Path&) const = default;
};

inline int path_length(const Path& p) { return p.size(); }

inline void validate_path(const Network& net, const Path& p) {
    std::vector<char> used(static_cast<std::size_t>(net.link_count()), 0);
    for (std::size_t k = 0; k < p.links.size(); ++k) {
        const LinkId id = p.links[k];
        if (id < 0 || id >= net.link_count()) throw std::invalid_argument("path references unknown link");
        if (used[static_cast<std::size_t>(id)]) throw std::invalid_argument("path repeats a link");
        used[static_cast<std::size_t>(id)] = 1;
        if (k > 0 && net.link(p.links[k - 1]).head != net.link(id).tail)
            throw std::invalid_argument("path links not incident at position " + std::to_string(k));
    }
}

inline NodeId path_source(const Network& net, const Path& p, NodeId fallback) {
    return p.empty() ? fallback : net.link(p.links.front()).tail;
}

inline NodeId path_dest(const Network& net, const Path& p, NodeId fallback) {
    return p.empty() ? fallback : net.link(p.links.back()).head;
}

// A unit-size message. `path` and `deadlines` are filled in by routers and
// the deadline scheduler respectively; `deadlines` holds one entry per path
// link, strictly increasing with a common difference.
struct Packet {
    int id = -1;
    Step inject_time = 0;
    NodeId source = -1;
    NodeId dest = -1;
    std::optional<Path> path;
    std::vector<Step> deadlines;
};

struct TraceEvent {
    Step t = 0;
    NodeId src = -1;
    NodeId dst = -1;
    std::optional<Path> path;
};

// Time-ordered injection sequence.
struct InjectionTrace {
    std::vector<TraceEvent> events;

    void validate_sorted() const {
        for (std::size_t i = 1; i < events.size(); ++i)
            if (events[i].t < events[i - 1].t)
                throw std::invalid_argument("trace not sorted by inject time at event " + std::to_string(i));
    }

    Step horizon() const { return events.empty() ? 0 : events.back().t + 1; }
};

}  // namespace aqsim
