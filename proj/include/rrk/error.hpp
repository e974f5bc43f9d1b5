#pragma once

#include <stdexcept>
#include <string>

namespace rrk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not agree for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Sequence longer than the model accepts.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Token id outside the vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

/// Zero-norm vector passed to cosine similarity.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (files, records, lines).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Index or checkpoint bytes that fail validation.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Document with no tokens after tokenization.
class EmptyDocumentError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Empty or duplicated document identifier.
class IdError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A mode that needs a checkpoint was started without one.
class MissingCheckpointError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Non-finite values during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rrk
