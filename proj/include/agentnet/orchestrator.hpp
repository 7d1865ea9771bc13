#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/agent_net.hpp"
#include "agentnet/edit_script.hpp"
#include "agentnet/goal.hpp"
#include "agentnet/rng.hpp"
#include "agentnet/workflow.hpp"

namespace agentnet {

enum class VerifyMode { Oracle, GoalAnchored };

const char* to_string(VerifyMode m);

// Resolved when `agent` is set, Expanded otherwise.
struct DecompositionTree {
    Goal goal;
    std::optional<AgentId> agent;
    std::vector<DecompositionTree> children;
    // Expanded nodes below the root compose into a Nest under goal.id.
    bool sub_workflow = false;
    std::size_t depth_bound = 0;

    bool resolved() const { return agent.has_value(); }
};

struct Verdict {
    bool passed = false;
    double score = 0.0;
    VerifyMode mode = VerifyMode::Oracle;
    std::optional<EditScript> edit_script;
    FieldSet missing_outputs;
    FieldSet unbound_inputs;
    double dead_node_ratio = 0.0;
};

// What a candidate is checked against. `expected` is required in oracle mode
// and is also used for ground-truth scoring when present.
struct Target {
    Goal goal;
    std::optional<Workflow> expected;
};

struct SolveConfig {
    double theta = 0.8;
    double eta = 0.95;
    std::size_t max_depth = 8;
    std::size_t budget = 5;
    std::size_t k = 1;
    VerifyMode mode = VerifyMode::Oracle;
    std::uint64_t seed = 0;

    bool scale_control = true;
    bool verification = true;
    bool hypothesis = true;
    bool input_goal = true;
    bool output_goal = true;

    bool split_allowed() const { return hypothesis; }
    bool repair_enabled() const { return hypothesis && verification && budget > 0; }
};

struct DecomposeOptions {
    double theta = 0.8;
    std::size_t max_depth = 8;
    bool allow_split = true;
    // When false every candidate weighs in with life 1.
    bool use_life = true;
};

DecomposeOptions decompose_options(const SolveConfig& config);

DecompositionTree decompose(const AgentNetwork& net, const Goal& g, const DecomposeOptions& options, Rng& rng);

struct Composed {
    Workflow workflow;
    // Contributing agent of every root-level item of the canonical result.
    std::vector<AgentId> root_owner;
    std::vector<AgentId> agents;
};

Composed compose_traced(const AgentNetwork& net, const DecompositionTree& tree);
Workflow compose(const AgentNetwork& net, const DecompositionTree& tree);

// Throws MissingOracle in oracle mode without an expected workflow.
Verdict verify(const Workflow& candidate, const Target& target, VerifyMode mode, double eta,
    bool check_inputs = true, bool check_outputs = true);

enum class HypothesisKind { MissingStep, WrongOrder, MissingBranch, OverAbstraction };
enum class RepairOp { Insert, Branch, Nest, Reorder };

const char* to_string(HypothesisKind k);
const char* to_string(RepairOp op);

struct RepairStep {
    HypothesisKind hypothesis;
    RepairOp op;
    Path location;
    double score = 0.0;
    std::size_t distance = 0;
    Workflow candidate;
};

struct CandidateRecord {
    std::size_t rank = 1;
    std::uint64_t seed = 0;
    Workflow workflow;
    Verdict verdict;
    // Structural equality with the expected workflow, when one is known.
    bool correct = false;
    std::vector<RepairStep> repairs;
    std::string repair_status;
    std::optional<std::string> failure;
};

struct IssuedOutcome {
    AgentId agent;
    Outcome outcome;
};

struct EpisodeResult {
    std::string goal_id;
    std::uint64_t seed = 0;
    std::vector<CandidateRecord> candidates;
    std::vector<IssuedOutcome> outcomes;
    std::size_t steps = 0;
    std::optional<std::string> failure;

    // Rank of the first correct candidate, if any.
    std::optional<std::size_t> first_correct_rank() const;
};

// Runs every rank against a read-only network; no life is touched.
EpisodeResult plan_episode(const AgentNetwork& net, const Target& target, const SolveConfig& config);
// Applies the episode's outcomes and solved shape to the network.
void commit_episode(AgentNetwork& net, const EpisodeResult& episode, const SolveConfig& config);

// plan + commit. Rethrows DecompositionFailure only when hypothesis is disabled.
EpisodeResult solve(AgentNetwork& net, const Target& target, const SolveConfig& config);

nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const EpisodeResult& e);

} // namespace agentnet
