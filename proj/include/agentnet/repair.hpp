#pragma once

#include <optional>
#include <vector>

#include "agentnet/orchestrator.hpp"

namespace agentnet {

struct FailureHypothesis {
    HypothesisKind kind = HypothesisKind::MissingStep;
    Path location;
    std::optional<Goal> needed_goal;
    FieldSet needed_fields;
    // Expected fragment at `location` (oracle mode only).
    std::optional<Node> evidence;
    std::vector<std::size_t> permutation;
    // Siblings replaced starting at `location`; 0 means a pure insertion.
    std::size_t span = 0;
};

RepairOp repair_op_for(HypothesisKind k);

// Throws NotAFailure on a passing verdict.
std::vector<FailureHypothesis> diagnose(const Verdict& verdict, const Workflow& candidate, const Target& target);

struct RepairContext {
    const AgentNetwork& net;
    const Target& target;
    const SolveConfig& config;
    Rng& rng;
};

// Throws NoEligibleAgent when nothing can realize the hypothesis and
// RejectedRepair when the result has more violations than the candidate.
Workflow apply(const Workflow& candidate, const FailureHypothesis& h, RepairContext& ctx,
    std::vector<AgentId>* used_agents = nullptr);

enum class RepairStatus { Passed, Stalled, BudgetExhausted };

const char* to_string(RepairStatus s);

struct RepairResult {
    RepairStatus status = RepairStatus::Stalled;
    Workflow candidate;
    Verdict verdict;
    std::vector<RepairStep> trace;
    std::vector<AgentId> agents;
};

// Edit-script length in oracle mode, missing outputs plus unbound inputs otherwise.
std::size_t repair_distance(const Verdict& v);

// Throws PreconditionViolation when budget is 0.
RepairResult repair_loop(RepairContext& ctx, const Workflow& candidate, const Verdict& verdict, std::size_t budget);

} // namespace agentnet
