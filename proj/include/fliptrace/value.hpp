#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <string>

namespace fliptrace {

enum class ValueTag : uint8_t { int64 = 0, float64 = 1 };

/// A 64-bit machine value with a type tag. Floats are stored as their raw
/// IEEE-754 binary64 pattern so they survive any round trip bit-exactly.
class Value {
public:
    Value() : tag_(ValueTag::int64), bits_(0) {}

    static Value of_i64(int64_t v) {
        Value out;
        out.tag_ = ValueTag::int64;
        std::memcpy(&out.bits_, &v, 8);
        return out;
    }

    static Value of_f64(double v) {
        Value out;
        out.tag_ = ValueTag::float64;
        std::memcpy(&out.bits_, &v, 8);
        return out;
    }

    static Value from_bits(ValueTag tag, uint64_t bits) {
        Value out;
        out.tag_ = tag;
        out.bits_ = bits;
        return out;
    }

    ValueTag tag() const { return tag_; }
    uint64_t bits() const { return bits_; }
    bool is_int() const { return tag_ == ValueTag::int64; }
    bool is_float() const { return tag_ == ValueTag::float64; }

    int64_t i64() const {
        int64_t v;
        std::memcpy(&v, &bits_, 8);
        return v;
    }

    double f64() const {
        double v;
        std::memcpy(&v, &bits_, 8);
        return v;
    }

    /// Bitwise identity, tag included. NaNs with equal patterns compare equal.
    friend bool operator==(const Value& a, const Value& b) {
        return a.tag_ == b.tag_ && a.bits_ == b.bits_;
    }
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

    std::string to_string() const;

private:
    ValueTag tag_;
    uint64_t bits_;
};

/// XOR-flips exactly one bit of the 64-bit pattern; involutive.
/// `bit` must be in [0, 63].
Value flip_bit(Value v, uint32_t bit);

enum class LocationKind : uint8_t { reg = 0, mem = 1 };

/// A value holder: a register (identified by its program-wide slot) or a
/// memory cell (identified by its index).
struct Location {
    LocationKind kind = LocationKind::reg;
    uint64_t index = 0;

    static Location make_reg(uint64_t slot) { return {LocationKind::reg, slot}; }
    static Location make_mem(uint64_t cell) { return {LocationKind::mem, cell}; }

    friend bool operator==(const Location& a, const Location& b) {
        return a.kind == b.kind && a.index == b.index;
    }
    friend bool operator!=(const Location& a, const Location& b) { return !(a == b); }
    friend bool operator<(const Location& a, const Location& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.index < b.index;
    }
};

struct LocationHash {
    size_t operator()(const Location& l) const {
        return std::hash<uint64_t>()(l.index * 2 + static_cast<uint64_t>(l.kind));
    }
};

} // namespace fliptrace
