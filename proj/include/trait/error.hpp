#pragma once

#include <stdexcept>
#include <string>

namespace trait {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Malformed input file (corpus JSONL, embedding or graph binary, checkpoint).
class FormatError : public Error {
public:
	using Error::Error;
};

/// A caller-supplied value violates a documented precondition.
class ValidationError : public Error {
public:
	using Error::Error;
};

/// Internal bookkeeping no longer matches its invariants (negative counts,
/// drifted totals). Indicates a bug, never bad input.
class ConsistencyError : public Error {
public:
	using Error::Error;
};

} // namespace trait
