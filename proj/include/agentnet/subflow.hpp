#pragma once

#include <cstddef>
#include <vector>

#include "agentnet/workflow.hpp"

namespace agentnet {

struct SubflowMatch {
    std::size_t pattern_index = 0;
    Path path; // position of the first matched Task inside flatten(w)

    bool operator==(const SubflowMatch&) const = default;
};

// Every contiguous run of Tasks inside a Sequence of flatten(w) whose tool ids
// equal a library pattern. Patterns must be flat with 2..5 Tasks.
std::vector<SubflowMatch> find_subflows(const Workflow& w, const std::vector<Workflow>& library);

} // namespace agentnet
