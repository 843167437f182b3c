#ifndef NLOS_ERRORS_HPP
#define NLOS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nlos {

/// Base class for all library failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid argument / contract violation detected at an API boundary.
struct ValidationError : Error {
    using Error::Error;
};

/// A light-path distance fell below the singularity guard.
struct DegenerateDistanceError : Error {
    using Error::Error;
};

/// Requested ellipsoid has d <= |focus_a - focus_b|; the shell is empty.
struct DegenerateEllipsoidError : Error {
    using Error::Error;
};

/// Integer accumulator would wrap past 2^32 - 1.
struct AccumulatorOverflowError : Error {
    using Error::Error;
};

/// Voxel grid exceeds the configured memory cap.
struct ResolutionCapError : Error {
    using Error::Error;
};

/// Two grids with different bounds/resolution were combined.
struct GeometryMismatchError : Error {
    using Error::Error;
};

/// Mutually exclusive configuration flags.
struct ConfigConflictError : Error {
    using Error::Error;
};

/// I/O and file-format failures. `offset` is the byte offset of the
/// offending field, or -1 when not applicable.
struct IoError : Error {
    long long offset;
    explicit IoError(const std::string& msg, long long off = -1)
        : Error(off >= 0 ? msg + " (offset " + std::to_string(off) + ")" : msg), offset(off) {}
};

struct MalformedMagicError : IoError {
    using IoError::IoError;
};

struct UnsupportedVersionError : IoError {
    using IoError::IoError;
};

struct TruncatedPayloadError : IoError {
    using IoError::IoError;
};

struct NegativeIntensityError : IoError {
    using IoError::IoError;
};

/// Scene description parse / semantic failure, with field context in the message.
struct SceneParseError : Error {
    using Error::Error;
};

}  // namespace nlos

#endif
