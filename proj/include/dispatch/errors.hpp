#pragma once

#include <stdexcept>
#include <string>

namespace dispatch {

// Failure categories map one-to-one onto CLI exit codes:
// configuration problems, data problems, numerical problems.

struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };

// data / input errors
struct FormatError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IntegrityError : std::runtime_error { using std::runtime_error::runtime_error; };
struct SchemaError : std::runtime_error { using std::runtime_error::runtime_error; };
struct InvalidRegion : std::runtime_error { using std::runtime_error::runtime_error; };
struct OutOfRegion : std::runtime_error { using std::runtime_error::runtime_error; };
struct UnknownSegment : std::runtime_error { using std::runtime_error::runtime_error; };
struct NoRoute : std::runtime_error { using std::runtime_error::runtime_error; };

// numerical errors
struct DivergenceError : std::runtime_error { using std::runtime_error::runtime_error; };
struct RateOverflow : std::runtime_error { using std::runtime_error::runtime_error; };

// dispatch-level errors
struct InfeasibleAction : std::runtime_error { using std::runtime_error::runtime_error; };
struct EmptyActionSet : std::runtime_error { using std::runtime_error::runtime_error; };

// programming errors (violated call contracts), distinct from bad input
struct ContractViolation : std::logic_error { using std::logic_error::logic_error; };

}  // namespace dispatch
