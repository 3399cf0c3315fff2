#pragma once

#include <stdexcept>
#include <string>

namespace mara {

// Base class for every error raised by this library. Each concrete type
// below is its own class so callers (and tests) can react to the exact
// failure kind instead of string-matching messages.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgument : public Error { public: using Error::Error; };
class InvalidConfig : public Error { public: using Error::Error; };
class UnresolvablePayload : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class DuplicateId : public Error { public: using Error::Error; };

class ProviderUnavailable : public Error { public: using Error::Error; };
class ContextOverflow : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };
class EmptyContent : public Error { public: using Error::Error; };
class ScriptExhausted : public Error { public: using Error::Error; };

class IoError : public Error { public: using Error::Error; };
class BadMagic : public Error { public: using Error::Error; };
class Truncated : public Error { public: using Error::Error; };
class ChecksumMismatch : public Error { public: using Error::Error; };

class NonPositiveTemperature : public Error { public: using Error::Error; };
class ZeroVector : public Error { public: using Error::Error; };
class EmptyIndex : public Error { public: using Error::Error; };
class NoGateModel : public Error { public: using Error::Error; };

class MissingBinding : public Error { public: using Error::Error; };
class UnparseableSignal : public Error { public: using Error::Error; };

class EmptyInput : public Error { public: using Error::Error; };
class EmptyPositives : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace mara
