#pragma once

#include <stdexcept>
#include <string>

namespace facepipe {

/// Base class for every error raised by the library. The CLI maps any
/// `facepipe::Error` to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FACEPIPE_DEFINE_ERROR(Name)            \
  class Name : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  }

// File and data-format problems.
FACEPIPE_DEFINE_ERROR(FormatError);
FACEPIPE_DEFINE_ERROR(TruncationError);
FACEPIPE_DEFINE_ERROR(IoError);
FACEPIPE_DEFINE_ERROR(ParseError);
FACEPIPE_DEFINE_ERROR(RefError);

// Argument and numeric problems.
FACEPIPE_DEFINE_ERROR(EmptyInputError);
FACEPIPE_DEFINE_ERROR(NumericError);
FACEPIPE_DEFINE_ERROR(DegenerateError);
FACEPIPE_DEFINE_ERROR(IndexError);
FACEPIPE_DEFINE_ERROR(ShapeError);
FACEPIPE_DEFINE_ERROR(ParamError);

// Training and protocol problems.
FACEPIPE_DEFINE_ERROR(DegenerateLabelsError);
FACEPIPE_DEFINE_ERROR(ProtocolError);

#undef FACEPIPE_DEFINE_ERROR

}  // namespace facepipe
