#pragma once

#include <stdexcept>
#include <string>

namespace geco {

enum class ErrorKind {
  Io,
  Format,
  Validation,
  Schema,
  Domain,
  Shape,
  MissingInput,
  Solve,
  Spec,
  BehindCamera,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
 public:
  explicit KindedError(const std::string& what) : Error(K, what) {}
};

using IoError = KindedError<ErrorKind::Io>;
using FormatError = KindedError<ErrorKind::Format>;
using ValidationError = KindedError<ErrorKind::Validation>;
using SchemaError = KindedError<ErrorKind::Schema>;
using DomainError = KindedError<ErrorKind::Domain>;
using ShapeError = KindedError<ErrorKind::Shape>;
using MissingInputError = KindedError<ErrorKind::MissingInput>;
using SolveError = KindedError<ErrorKind::Solve>;
using SpecError = KindedError<ErrorKind::Spec>;
using BehindCameraError = KindedError<ErrorKind::BehindCamera>;

}  // namespace geco
