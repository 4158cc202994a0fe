#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dp2bm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroInput : Error {
    ZeroInput() : Error("zero input") {}
};

struct FactorizationOverflow : Error {
    FactorizationOverflow() : Error("integer exceeds factorization cap") {}
};

struct PrecisionExhausted : Error {
    int cap;
    explicit PrecisionExhausted(int k)
        : Error("precision cap " + std::to_string(k) + " exhausted"), cap(k) {}
};

struct HeightExhausted : Error {
    long long height;
    explicit HeightExhausted(long long h)
        : Error("no quadric point up to height " + std::to_string(h)), height(h) {}
};

struct PrecisionLoss : Error {
    PrecisionLoss() : Error("value of f not certified at this precision") {}
};

struct PrimeTooSmall : Error {
    PrimeTooSmall() : Error("generic lemma needs p > 33") {}
};

struct NoSmoothPoints : Error {
    NoSmoothPoints() : Error("no smooth local points") {}
};

struct HypothesisViolated : Error {
    using Error::Error;
};

struct ClassUnsupported : Error {
    ClassUnsupported() : Error("exponent undefined for theta in +Q^2") {}
};

struct DegenerateGrid : Error {
    using Error::Error;
};

struct CheckpointMismatch : Error {
    using Error::Error;
};

// too many triples left undecided by caps; the offenders are kept for the report
struct CountAborted : Error {
    std::vector<std::array<std::int64_t, 3>> triples;
    explicit CountAborted(std::vector<std::array<std::int64_t, 3>> t)
        : Error(std::to_string(t.size()) + " triples hit computation caps"), triples(std::move(t)) {}
};

}  // namespace dp2bm
