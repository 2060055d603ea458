#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqsim/model.hpp"

namespace aqsim {

// Network file: {"nodes": n, "links": [[tail, head, "label"], ...]}
inline Network load_network_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file: " + path);
    nlohmann::json j;
    in >> j;
    const int nodes = j.at("nodes").get<int>();
    std::vector<LinkSpec> spec;
    for (const auto& l : j.at("links")) {
        LinkSpec s;
        s.tail = l.at(0).get<int>();
        s.head = l.at(1).get<int>();
        s.label = l.size() > 2 ? l.at(2).get<std::string>() : "";
        spec.push_back(std::move(s));
    }
    return build_network(nodes, spec);
}

inline void save_network_json(const Network& net, const std::string& path) {
    nlohmann::json j;
    j["nodes"] = net.node_count();
    auto links = nlohmann::json::array();
    for (const Link& l : net.links()) links.push_back({l.tail, l.head, l.label});
    j["links"] = std::move(links);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write network file: " + path);
    out << j.dump() << "\n";
}

// Trace file: JSON Lines, one event per line:
// {"t": int, "src": int, "dst": int, "path": [linkid, ...]}  (path optional)
inline InjectionTrace load_trace_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    InjectionTrace trace;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("trace line " + std::to_string(lineno) + ": " + e.what());
        }
        TraceEvent ev;
        ev.t = j.at("t").get<Step>();
        ev.src = j.at("src").get<int>();
        ev.dst = j.at("dst").get<int>();
        if (j.contains("path")) {
            Path p;
            for (const auto& e : j.at("path")) p.links.push_back(e.get<int>());
            ev.path = std::move(p);
        }
        trace.events.push_back(std::move(ev));
    }
    trace.validate_sorted();
    return trace;
}

inline void write_trace_event(std::ostream& out, const TraceEvent& ev) {
    nlohmann::json j;
    j["t"] = ev.t;
    j["src"] = ev.src;
    j["dst"] = ev.dst;
    if (ev.path) j["path"] = ev.path->links;
    out << j.dump() << "\n";
}

inline void save_trace_jsonl(const InjectionTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    for (const TraceEvent& ev : trace.events) write_trace_event(out, ev);
}

}  // namespace aqsim
