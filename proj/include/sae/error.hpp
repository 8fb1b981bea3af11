#pragma once

#include <stdexcept>
#include <string>

namespace sae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class ConsistencyError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class DecompositionError : public Error { public: using Error::Error; };
class SplitError : public Error { public: using Error::Error; };

/// Operand shapes do not conform.
class ShapeError : public Error { public: using Error::Error; };
class PreconditionError : public Error { public: using Error::Error; };
/// Non-finite input or intermediate value.
class NumericError : public Error { public: using Error::Error; };

class DivergenceError : public Error { public: using Error::Error; };
class FitError : public Error { public: using Error::Error; };
class ScoringError : public Error { public: using Error::Error; };
class OracleError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

} // namespace sae
