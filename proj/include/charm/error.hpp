#pragma once

#include <stdexcept>
#include <string>

namespace charm {

// Every domain failure carries a stable kind name ("GammaOutOfRange",
// "TooLong", ...). The service echoes it verbatim in error bodies.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define CHARM_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    };

// text-encoder
CHARM_DEFINE_ERROR(TooLong)
CHARM_DEFINE_ERROR(InvalidUtf8)
CHARM_DEFINE_ERROR(EmptyPhrase)

// diffusion-core
CHARM_DEFINE_ERROR(InvalidConfig)
CHARM_DEFINE_ERROR(DimensionMismatch)

// attention-control
CHARM_DEFINE_ERROR(GammaOutOfRange)
CHARM_DEFINE_ERROR(IndexOutOfRange)

// attention-explain
CHARM_DEFINE_ERROR(IncompleteTrace)

// modifier-catalog
CHARM_DEFINE_ERROR(EmptyQuery)

// inpaint
CHARM_DEFINE_ERROR(EmptyImage)
CHARM_DEFINE_ERROR(InvalidStroke)

// refine
CHARM_DEFINE_ERROR(EmptyPrompt)
CHARM_DEFINE_ERROR(ExternalUnavailable)

// session-store
CHARM_DEFINE_ERROR(UnknownParent)
CHARM_DEFINE_ERROR(UnknownVersion)
CHARM_DEFINE_ERROR(UnknownSession)
CHARM_DEFINE_ERROR(CorruptSession)

// eval-metrics
CHARM_DEFINE_ERROR(MissingArtifact)

// service-api / io
CHARM_DEFINE_ERROR(PortInUse)
CHARM_DEFINE_ERROR(BadConfig)
CHARM_DEFINE_ERROR(UnknownJob)
CHARM_DEFINE_ERROR(SessionBusy)
CHARM_DEFINE_ERROR(ParseError)
CHARM_DEFINE_ERROR(IoError)

#undef CHARM_DEFINE_ERROR

}  // namespace charm
