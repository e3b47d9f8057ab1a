#include "fliptrace/dddg.hpp"

#include <ostream>
#include <unordered_map>

namespace fliptrace {

namespace {

struct ConstKey {
    uint8_t tag;
    uint64_t bits;
    bool operator==(const ConstKey&) const = default;
};

struct ConstKeyHash {
    size_t operator()(const ConstKey& k) const {
        return std::hash<uint64_t>()(k.bits * 3 + k.tag);
    }
};

class Builder {
public:
    Builder(const Trace& trace, const CodeRegionInstance& instance)
        : trace_(trace), instance_(instance) {}

    Dddg run() {
        for (uint64_t i = instance_.first; i <= instance_.last && i < trace_.size(); ++i) {
            const TraceEvent& ev = trace_.events[i];
            if (!ev.result_loc) continue;
            std::vector<uint32_t> operand_nodes;
            std::vector<bool> is_address;
            for (size_t k = 0; k < ev.operand_locs.size(); ++k) {
                operand_nodes.push_back(read_node(ev.operand_locs[k], ev.operand_values[k]));
                is_address.push_back(ev.operand_is_address(k));
            }
            for (const Value& cv : ev.const_operands) {
                operand_nodes.push_back(const_node(cv));
                is_address.push_back(false);
            }
            uint32_t result = write_node(*ev.result_loc, *ev.result_value);
            for (size_t k = 0; k < operand_nodes.size(); ++k) {
                graph_.edges.push_back({operand_nodes[k], result, ev.op, i, is_address[k]});
            }
        }
        return std::move(graph_);
    }

private:
    const Trace& trace_;
    const CodeRegionInstance& instance_;
    Dddg graph_;
    std::unordered_map<Location, std::pair<uint32_t, uint32_t>, LocationHash>
        current_;  // loc -> (version, node id)
    std::unordered_map<ConstKey, uint32_t, ConstKeyHash> consts_;

    uint32_t read_node(const Location& loc, const Value& v) {
        auto it = current_.find(loc);
        if (it != current_.end()) return it->second.second;
        uint32_t id = static_cast<uint32_t>(graph_.nodes.size());
        graph_.nodes.push_back({false, loc, 0, v});
        current_.emplace(loc, std::make_pair(0u, id));
        return id;
    }

    uint32_t write_node(const Location& loc, const Value& v) {
        uint32_t version = 1;
        auto it = current_.find(loc);
        if (it != current_.end()) version = it->second.first + 1;
        uint32_t id = static_cast<uint32_t>(graph_.nodes.size());
        graph_.nodes.push_back({false, loc, version, v});
        current_[loc] = {version, id};
        return id;
    }

    uint32_t const_node(const Value& v) {
        ConstKey key{static_cast<uint8_t>(v.tag()), v.bits()};
        auto it = consts_.find(key);
        if (it != consts_.end()) return it->second;
        uint32_t id = static_cast<uint32_t>(graph_.nodes.size());
        DddgNode node;
        node.is_const = true;
        node.value = v;
        graph_.nodes.push_back(node);
        consts_.emplace(key, id);
        return id;
    }
};

} // namespace

std::vector<uint32_t> Dddg::roots() const {
    std::vector<bool> has_in(nodes.size(), false);
    for (const auto& e : edges) has_in[e.to] = true;
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < nodes.size(); ++i) {
        if (!has_in[i]) out.push_back(i);
    }
    return out;
}

std::vector<uint32_t> Dddg::leaves() const {
    std::vector<bool> has_out(nodes.size(), false);
    for (const auto& e : edges) has_out[e.from] = true;
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < nodes.size(); ++i) {
        if (!has_out[i]) out.push_back(i);
    }
    return out;
}

Dddg build_dddg(const Trace& trace, const CodeRegionInstance& instance) {
    return Builder(trace, instance).run();
}

void dddg_to_dot(const Dddg& graph, const Trace& trace, std::ostream& out) {
    out << "digraph dddg {\n";
    for (uint32_t i = 0; i < graph.nodes.size(); ++i) {
        const DddgNode& n = graph.nodes[i];
        out << "  n" << i << " [label=\"";
        if (n.is_const) {
            out << "const " << n.value.to_string();
        } else {
            out << trace.location_name(n.loc) << "@" << n.version << " = "
                << n.value.to_string();
        }
        out << "\"];\n";
    }
    for (const auto& e : graph.edges) {
        out << "  n" << e.from << " -> n" << e.to << " [label=\"" << opcode_name(e.op)
            << " #" << e.trace_index << "\"";
        if (e.address) out << " style=dashed";
        out << "];\n";
    }
    out << "}\n";
}

RegionInterface classify_interface(const Trace& trace, const CodeRegionInstance& instance) {
    RegionInterface out;
    std::set<Location> accessed;
    std::set<Location> written;
    std::set<Location> first_access_is_read;

    for (uint64_t i = instance.first; i <= instance.last && i < trace.size(); ++i) {
        const TraceEvent& ev = trace.events[i];
        for (const auto& loc : ev.operand_locs) {
            if (!accessed.count(loc)) first_access_is_read.insert(loc);
            accessed.insert(loc);
        }
        if (ev.result_loc) {
            accessed.insert(*ev.result_loc);
            written.insert(*ev.result_loc);
        }
    }

    out.inputs = first_access_is_read;

    // A written location is an output when the value the span leaves behind
    // is read after the span; a post-span write first means the region's
    // value was dead.
    std::set<Location> undecided = written;
    for (uint64_t i = instance.last + 1; i < trace.size() && !undecided.empty(); ++i) {
        const TraceEvent& ev = trace.events[i];
        for (const auto& loc : ev.operand_locs) {
            auto it = undecided.find(loc);
            if (it != undecided.end()) {
                out.outputs.insert(loc);
                undecided.erase(it);
            }
        }
        if (ev.result_loc) undecided.erase(*ev.result_loc);
    }

    for (const auto& loc : accessed) {
        if (!out.inputs.count(loc) && !out.outputs.count(loc)) {
            out.internals.insert(loc);
        }
    }
    return out;
}

} // namespace fliptrace
