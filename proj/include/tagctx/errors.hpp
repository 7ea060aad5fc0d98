#pragma once

#include <stdexcept>
#include <string>

namespace tagctx {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(message) {}
};

} // namespace tagctx
