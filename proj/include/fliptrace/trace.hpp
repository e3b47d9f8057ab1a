#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fliptrace/program.hpp"
#include "fliptrace/value.hpp"

namespace fliptrace {

/// One retired dynamic instruction. Operand lists cover location-backed
/// operands only (immediates carry no location); both lists always have
/// equal length.
struct TraceEvent {
    uint64_t index = 0;
    Opcode op = Opcode::ret;
    uint32_t src_line = 0;
    int32_t region_id = -1;  // innermost open region, -1 if none
    std::vector<Location> operand_locs;
    std::vector<Value> operand_values;
    std::vector<Value> const_operands;  // immediate operand values, in order
    uint8_t address_mask = 0;           // bit k set: operand k fed address computation
    uint8_t print_digits = 0;           // print significant-digit budget, 0 = exact
    std::optional<Location> result_loc;
    std::optional<Value> result_value;

    bool operand_is_address(size_t slot) const {
        return slot < 8 && (address_mask & (1u << slot)) != 0;
    }
};

struct Trace {
    uint64_t program_hash = 0;
    std::vector<std::string> reg_names;  // slot -> display name
    std::vector<TraceEvent> events;

    size_t size() const { return events.size(); }
    std::string location_name(const Location& loc) const;
};

struct TraceFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Length-prefixed binary records under a `FTRC` magic; values are stored as
/// raw 64-bit patterns. read_trace(write_trace(t)) == t bit-exactly.
void write_trace(const Trace& trace, std::ostream& out);
Trace read_trace(std::istream& in);

/// Debug mirror: one JSON object per event, one per line.
void write_trace_jsonl(const Trace& trace, std::ostream& out);

/// One dynamic execution of a code region: the inclusive hull
/// [first, last] of its begin/end markers, nested regions included.
/// Synthetic instances cover the gaps between sibling regions ("any block of
/// code between two neighboring loops"); their ids are negative and stable
/// across runs (keyed by enclosing region and starting source line).
struct CodeRegionInstance {
    int32_t region_id = 0;
    bool synthetic = false;
    uint32_t ordinal = 0;       // per region_id, 0-based dynamic invocation
    uint64_t first = 0;         // inclusive
    uint64_t last = 0;          // inclusive
    int32_t parent_region_id = -1;

    uint64_t length() const { return last - first + 1; }
    bool contains(uint64_t index) const { return index >= first && index <= last; }
};

/// Splits a trace into code-region instances at every nesting level, plus
/// synthetic gap instances. Sorted by first index, then by descending span.
/// Throws TraceFormatError on unbalanced markers.
std::vector<CodeRegionInstance> split_regions(const Trace& trace);

/// The innermost-attribution partition: for every trace index, the instance
/// that owns it (real instances own their span minus nested child spans;
/// synthetic instances own their gap). Returned as one owner per index.
std::vector<size_t> region_partition(const Trace& trace,
                                     const std::vector<CodeRegionInstance>& instances);

struct FaultSpec {
    uint64_t instr_index = 0;
    bool target_result = true;  // false: operand slot `operand_slot`
    uint32_t operand_slot = 0;  // index into the event's location-backed operands
    uint32_t bit = 0;           // [0, 63]
};

/// A golden/faulty trace pairing for differential analysis.
/// Indices refer to the faulty trace; when the traces differ in length the
/// aligned golden index beyond reconvergence is `i + golden_offset`.
struct TracePair {
    const Trace* golden = nullptr;
    const Trace* faulty = nullptr;
    std::optional<FaultSpec> fault;

    /// First index where (opcode, src_line) differ or any value differs.
    std::optional<uint64_t> divergence_start;
    /// First faulty index at/after which the (opcode, src_line) streams
    /// re-synchronize under longest-common-suffix matching.
    std::optional<uint64_t> reconvergence;

    /// First index where the (opcode, src_line) streams differ; values may
    /// already differ earlier without control flow diverging.
    std::optional<uint64_t> control_divergence;
    int64_t golden_offset = 0;  // golden.size() - faulty.size()

    /// True when event i of the faulty trace has a control-aligned golden
    /// counterpart (same opcode and source line).
    bool aligned_at(uint64_t i) const;
    /// Golden index aligned with faulty index i; only valid when aligned_at(i).
    uint64_t golden_index(uint64_t i) const;
};

/// Throws TraceFormatError when the traces carry different program hashes.
TracePair align_pair(const Trace& golden, const Trace& faulty,
                     std::optional<FaultSpec> fault);

} // namespace fliptrace
