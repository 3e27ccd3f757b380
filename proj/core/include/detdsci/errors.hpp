#pragma once

#include <stdexcept>
#include <string>

namespace detdsci {

/// Base class for every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document (annotation file, config, wire payload).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration detected before any work is started.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace detdsci
