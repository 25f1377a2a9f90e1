#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wmm {

// Bad user configuration (unknown target, malformed spec field, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numeric range problems such as exp overflow while synthesizing a series.
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace wmm
