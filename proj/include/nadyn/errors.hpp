#pragma once

#include <stdexcept>
#include <string>

namespace nadyn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// models
class DegenerateSurfaces : public Error { using Error::Error; };
class GaugeAmbiguity : public Error { using Error::Error; };

// jumpop
class MixedDirection : public Error { using Error::Error; };
class PatternMismatch : public Error { using Error::Error; };

// fssh
class DegeneratePopulation : public Error { using Error::Error; };

// qcle
class EmptyEnsemble : public Error { using Error::Error; };
class BranchExplosion : public Error { using Error::Error; };

// oracle
class BadSupport : public Error { using Error::Error; };

// harness
class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& reason)
        : Error(key + ": " + reason), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Engine failure tagged with the trajectory (or walker) index that raised it.
class EngineError : public Error {
public:
    EngineError(std::size_t index, const std::string& what)
        : Error("trajectory " + std::to_string(index) + ": " + what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

} // namespace nadyn
