#pragma once

#include <stdexcept>
#include <string>

namespace protoflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension contract violations in tensor ops.
struct DimError : Error {
    using Error::Error;
};

// Bad input files, invalid scene graphs, violated dataset invariants.
struct DataError : Error {
    using Error::Error;
};

// Filesystem and serialization failures.
struct IoError : Error {
    using Error::Error;
};

}  // namespace protoflow
