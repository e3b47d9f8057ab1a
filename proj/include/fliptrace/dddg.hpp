#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <vector>

#include "fliptrace/trace.hpp"

namespace fliptrace {

/// A value instance: one SSA-like version of a location, or a constant.
/// Version 0 is the value the location held before the region instance.
struct DddgNode {
    bool is_const = false;
    Location loc;
    uint32_t version = 0;
    Value value;
};

struct DddgEdge {
    uint32_t from = 0;
    uint32_t to = 0;
    Opcode op = Opcode::ret;
    uint64_t trace_index = 0;
    /// True when the operand fed an address computation (the base register
    /// of a load/store) rather than the dataflow proper.
    bool address = false;
};

struct Dddg {
    std::vector<DddgNode> nodes;
    std::vector<DddgEdge> edges;

    /// Nodes with no incoming edges: externally defined values and constants.
    std::vector<uint32_t> roots() const;
    /// Nodes with no outgoing edges.
    std::vector<uint32_t> leaves() const;
};

/// Builds the dynamic data dependency graph over the instance's span
/// (nested regions included). One node per written version plus one per
/// externally defined value read; one edge group per retired instruction.
Dddg build_dddg(const Trace& trace, const CodeRegionInstance& instance);

/// Graphviz dot rendering of the graph.
void dddg_to_dot(const Dddg& graph, const Trace& trace, std::ostream& out);

struct RegionInterface {
    std::set<Location> inputs;
    std::set<Location> outputs;
    std::set<Location> internals;
};

/// Classifies the locations a region instance touches.
///  - inputs: first access inside the span reads a value defined before it;
///  - outputs: written in the span, and the value the span leaves behind is
///    read after the span before being overwritten;
///  - internals: everything else accessed. A location may be both input and
///    output; internals overlap neither.
/// Constants are never part of the interface.
RegionInterface classify_interface(const Trace& trace, const CodeRegionInstance& instance);

} // namespace fliptrace
