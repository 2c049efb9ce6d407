#pragma once

#include <stdexcept>
#include <string>

namespace ionwork {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define IONWORK_DEFINE_ERROR(Name)                    \
    class Name : public Error {                       \
    public:                                           \
        using Error::Error;                           \
    }

IONWORK_DEFINE_ERROR(InvalidArgumentError);
IONWORK_DEFINE_ERROR(TruncationError);
IONWORK_DEFINE_ERROR(NonHermitianError);
IONWORK_DEFINE_ERROR(StepTooLargeError);
IONWORK_DEFINE_ERROR(ConvergenceError);
IONWORK_DEFINE_ERROR(DomainError);
IONWORK_DEFINE_ERROR(CutoffError);
IONWORK_DEFINE_ERROR(InfiniteTemperatureError);
IONWORK_DEFINE_ERROR(NegativeTemperatureError);
IONWORK_DEFINE_ERROR(IllConditionedError);
IONWORK_DEFINE_ERROR(EmptyOverlapError);
IONWORK_DEFINE_ERROR(ConfigError);
IONWORK_DEFINE_ERROR(IoError);

#undef IONWORK_DEFINE_ERROR

}  // namespace ionwork
