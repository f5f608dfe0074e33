#pragma once

#include <stdexcept>
#include <string>

namespace overlap {

// Invalid problem/tile/topology configuration (non-dividing shapes, bad rank ids, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Buffer shapes inconsistent with the problem description.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Peer buffer missing from the workspace directory.
struct DirectoryError : std::runtime_error {
    explicit DirectoryError(const std::string& msg) : std::runtime_error(msg) {}
};

// A signal wait exhausted its poll/wall budget; message names the unsatisfied flag.
struct DeadlockError : std::runtime_error {
    explicit DeadlockError(const std::string& msg) : std::runtime_error(msg) {}
};

// Transfer descriptor or tile index outside buffer bounds.
struct BoundsError : std::runtime_error {
    explicit BoundsError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace overlap
