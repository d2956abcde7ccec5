#pragma once

#include <stdexcept>
#include <string>

namespace ntn {

/// Invalid or unsatisfiable scenario/training configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (unprojected action, bad power, ...).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raw vectors or files that do not match the expected layout.
class InterfaceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Internal bookkeeping went out of sync (e.g. completing a task that is not active).
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Parameter averaging across actors with different shapes.
class AggregationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ntn
