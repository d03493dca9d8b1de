#pragma once

#include <stdexcept>
#include <string>

namespace pastiche {

// Base class for all library errors. Subclasses distinguish the failure
// category so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/array shape disagreement.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

// Spatial dimensions not divisible by the required factor, or a stage
// would produce an empty map.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

// NaN/Inf where finite values are required.
class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& what) : Error(what) {}
};

// Bad argument values (ranges, empty inputs, unknown identifiers).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& what) : Error(what) {}
};

// File decoding / parsing / corruption problems.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace pastiche
