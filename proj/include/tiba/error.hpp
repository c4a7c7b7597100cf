#pragma once

#include <stdexcept>
#include <string>

namespace tiba {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TIBA_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

TIBA_DEFINE_ERROR(InvalidSpec);
TIBA_DEFINE_ERROR(InvalidParams);
TIBA_DEFINE_ERROR(OutOfBounds);
TIBA_DEFINE_ERROR(DivisionByZero);
TIBA_DEFINE_ERROR(InsufficientLight);
TIBA_DEFINE_ERROR(NoPath);
TIBA_DEFINE_ERROR(NoCorridor);
TIBA_DEFINE_ERROR(IllConditioned);
TIBA_DEFINE_ERROR(MalformedFrame);
TIBA_DEFINE_ERROR(CorruptLog);
TIBA_DEFINE_ERROR(ConfigError);

#undef TIBA_DEFINE_ERROR

}  // namespace tiba
