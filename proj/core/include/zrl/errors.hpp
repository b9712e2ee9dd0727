#pragma once

#include <stdexcept>
#include <string>

namespace zrl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ZRL_DEFINE_ERROR(NAME)          \
  class NAME : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

ZRL_DEFINE_ERROR(PreconditionViolated);
ZRL_DEFINE_ERROR(UnknownSymbol);
ZRL_DEFINE_ERROR(UnknownToken);
ZRL_DEFINE_ERROR(VerifierUnavailable);
ZRL_DEFINE_ERROR(JudgeUnavailable);
ZRL_DEFINE_ERROR(JudgeMalformed);
ZRL_DEFINE_ERROR(ShapeMismatch);
ZRL_DEFINE_ERROR(NonFinite);
ZRL_DEFINE_ERROR(DatasetParseError);
ZRL_DEFINE_ERROR(SchemaError);
ZRL_DEFINE_ERROR(EmptySource);
ZRL_DEFINE_ERROR(ConfigError);
ZRL_DEFINE_ERROR(CheckpointError);

#undef ZRL_DEFINE_ERROR

}  // namespace zrl
