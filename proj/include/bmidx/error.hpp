#pragma once

#include <stdexcept>
#include <string>

namespace bmidx {

// Shared error taxonomy. Loaders and numeric routines throw subclasses so
// callers (and the CLI exit-code mapping) can tell input mistakes apart
// from broken data.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File contents disagree with their declared layout (size/metadata mismatch,
// unparsable line, bad header).
struct FormatError : Error {
  using Error::Error;
};

// Values violate a data invariant (NaN/Inf, empty test split, broken ID set).
struct ValidationError : Error {
  using Error::Error;
};

// A referenced entity does not exist (dangling gold_doc_id).
struct ReferentialError : Error {
  using Error::Error;
};

// A unique key appears twice.
struct UniquenessError : Error {
  using Error::Error;
};

// A row index points outside its matrix.
struct BoundsError : Error {
  using Error::Error;
};

// A function argument is out of its contract (k=0, bits not multiple of 5).
struct ArgumentError : Error {
  using Error::Error;
};

// A requested aggregate has no underlying data (document without queries).
struct MissingDataError : Error {
  using Error::Error;
};

// A key lookup failed (unknown doc_id, unknown trie prefix).
struct LookupError : Error {
  using Error::Error;
};

}  // namespace bmidx
