#pragma once

#include <stdexcept>
#include <string>

namespace agentnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define AGENTNET_ERROR(Name)                    \
    class Name : public Error {                 \
    public:                                     \
        using Error::Error;                     \
    }

AGENTNET_ERROR(InvalidWorkflow);
AGENTNET_ERROR(BadPath);
AGENTNET_ERROR(EmptyGoal);
AGENTNET_ERROR(DuplicateGoal);
AGENTNET_ERROR(NoEligibleAgent);
AGENTNET_ERROR(DecompositionFailure);
AGENTNET_ERROR(MissingOracle);
AGENTNET_ERROR(NotAFailure);
AGENTNET_ERROR(RejectedRepair);
AGENTNET_ERROR(InfeasibleProfile);
AGENTNET_ERROR(PreconditionViolation);
AGENTNET_ERROR(ConfigError);
AGENTNET_ERROR(IoError);
AGENTNET_ERROR(InternalError);

#undef AGENTNET_ERROR

} // namespace agentnet
