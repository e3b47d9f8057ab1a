#include <doctest.h>

#include <random>

#include "fliptrace/value.hpp"

using namespace fliptrace;

TEST_CASE("flip_bit on integers") {
    CHECK(flip_bit(Value::of_i64(0), 0) == Value::of_i64(1));
    CHECK(flip_bit(Value::of_i64(1), 0) == Value::of_i64(0));
    CHECK(flip_bit(Value::of_i64(0), 63) == Value::of_i64(INT64_MIN));
}

TEST_CASE("flip_bit on floats follows the IEEE-754 pattern") {
    // 0x4000000000000000 is 2.0; bit 62 is the top exponent bit.
    Value flipped = flip_bit(Value::of_f64(0.0), 62);
    CHECK(flipped.f64() == 2.0);
    CHECK(flipped.bits() == 0x4000000000000000ull);
}

TEST_CASE("flip_bit is involutive and changes exactly one bit") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 2000; ++k) {
        ValueTag tag = (rng() & 1) ? ValueTag::float64 : ValueTag::int64;
        Value v = Value::from_bits(tag, rng());
        uint32_t bit = static_cast<uint32_t>(rng() % 64);
        Value w = flip_bit(v, bit);
        CHECK(w != v);
        uint64_t delta = v.bits() ^ w.bits();
        CHECK(delta == (uint64_t{1} << bit));
        CHECK(flip_bit(w, bit) == v);
        CHECK(w.tag() == v.tag());
    }
}

TEST_CASE("float values round-trip through their bit pattern") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 1000; ++k) {
        uint64_t bits = rng();
        Value v = Value::from_bits(ValueTag::float64, bits);
        CHECK(Value::of_f64(v.f64()).bits() == bits);
    }
}
