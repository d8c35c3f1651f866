// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_ERRORS_HPP
#define SNP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace snp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A non-finite value appeared during evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad magic, unsupported version, or malformed header.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Header and payload disagree (tensor count, offsets, lengths).
class IntegrityError : public FormatError {
 public:
  using FormatError::FormatError;
};

// File ends before the declared content.
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A tensor shape is inconsistent with the model config.
class ShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class InvalidPlanError : public Error {
 public:
  using Error::Error;
};

// The plan was built for a different model.
class StalePlanError : public InvalidPlanError {
 public:
  using InvalidPlanError::InvalidPlanError;
};

// Bad user-supplied parameter (ratio, rank, preset, criterion, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace snp

#endif  // SNP_ERRORS_HPP
