#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "agentnet/goal.hpp"
#include "agentnet/rng.hpp"
#include "agentnet/workflow.hpp"

namespace agentnet {

struct AgentId {
    std::uint32_t value = 0;

    auto operator<=>(const AgentId&) const = default;
};

struct AgentStats {
    std::uint64_t successes = 0;
    std::uint64_t failures = 0;
    std::uint64_t reuses = 0;
    std::uint64_t generalizations = 0;

    bool operator==(const AgentStats&) const = default;
};

struct AtomicAgent {
    AgentId id;
    Goal goal;
    Workflow procedure;
    std::set<std::string> toolset;
    // context constraints: the schemas the procedure needs and yields
    FieldSet required_inputs;
    FieldSet provided_outputs;
    double life = 0.0;
    AgentStats stats;

    double success_ratio() const;
};

struct LifeConfig {
    double L_init = 10.0;
    double L_max = 100.0;
    std::array<double, 3> alphas { 3.0, 1.0, 2.0 }; // R_c, R_s, R_g
    std::array<double, 3> betas { 4.0, 2.0, 1.0 };  // P_e, P_s, P_r
    double drift_threshold = 0.5;
    std::uint64_t refresh_period = 10;

    // Throws ConfigError on an invalid configuration.
    void check() const;
};

struct CompatWeights {
    double familiarity = 0.5;
    double prior = 0.5;
};

// Reward/penalty signals of one execution event. P_r is a magnitude in [0,1].
struct Outcome {
    bool R_c = false;
    bool R_s = false;
    bool R_g = false;
    bool P_e = false;
    bool P_s = false;
    double P_r = 0.0;

    bool operator==(const Outcome&) const = default;
};

struct Transition {
    Goal subgoal;
    FieldSet available_inputs;
    StructMetrics shape_context;
};

struct ChangeLogEntry {
    enum class Kind { Archived, Revived, Spawned };
    Kind kind;
    AgentId agent;
    std::string goal_id;

    bool operator==(const ChangeLogEntry&) const = default;
};

using ChangeLog = std::vector<ChangeLogEntry>;

struct TrainingPair {
    Goal goal;
    Workflow procedure;
};

class AgentNetwork {
public:
    AgentNetwork() = default;
    explicit AgentNetwork(LifeConfig config, SimilarityBackend backend = {}, std::uint64_t rng_seed = 0);

    const std::vector<AtomicAgent>& active() const { return active_; }
    const std::vector<AtomicAgent>& archive() const { return archive_; }
    const std::vector<TrainingPair>& training() const { return training_; }
    const LifeConfig& config() const { return config_; }
    const SimilarityBackend& backend() const { return backend_; }
    std::uint64_t rng_seed() const { return rng_seed_; }
    std::uint64_t epoch() const { return epoch_; }

    CompatWeights weights;
    // When false the schema hard gate of compatibility() always passes.
    bool enforce_input_schema = true;

    const AtomicAgent* find(AgentId id) const;
    AtomicAgent* find_active(AgentId id);

    // Adds an active agent at L_init; the procedure must validate.
    AgentId add_agent(Goal goal, Workflow procedure);
    void add_training(Goal goal, Workflow procedure);

    // Indices into active() of agents sharing at least one token.
    std::vector<std::size_t> token_candidates(const TokenSet& tokens) const;
    // Indices into active() whose canonical procedure equals `block`.
    std::vector<std::size_t> shape_candidates(const Node& block) const;

    bool shape_solved_by_other_goal(const std::string& shape, const std::string& goal_id) const;
    void record_solved_shape(const std::string& shape, const std::string& goal_id);
    const std::map<std::string, std::set<std::string>>& solved_shapes() const { return solved_shapes_; }

    void move_to_archive(std::size_t active_index);
    void revive(std::size_t archive_index);
    void advance_epoch() { ++epoch_; }

    nlohmann::json snapshot() const;
    // Restores lives, stats, membership and epoch; procedures come from the
    // training pairs already added to this network. Throws IoError.
    void restore(const nlohmann::json& snapshot);

private:
    void index_agent(std::size_t active_index);
    void reindex();

    LifeConfig config_;
    SimilarityBackend backend_;
    std::uint64_t rng_seed_ = 0;
    std::uint64_t epoch_ = 0;
    std::uint32_t next_id_ = 1;
    std::vector<AtomicAgent> active_;
    std::vector<AtomicAgent> archive_;
    std::vector<TrainingPair> training_;
    std::map<std::string, std::set<std::string>> solved_shapes_;
    std::map<std::string, std::vector<std::size_t>> token_index_;
    std::map<std::string, std::vector<std::size_t>> shape_index_;
    // serialized canonical procedure per agent id
    std::map<std::uint32_t, std::string> shape_keys_;
};

struct ScoredAgent {
    AgentId id;
    double score = 0.0;

    bool operator==(const ScoredAgent&) const = default;
};

struct WeightedCandidate {
    AgentId id;
    double life = 0.0;
    double gamma = 0.0;
};

// One agent per pair, each holding exactly its paired workflow.
// Throws DuplicateGoal / InvalidWorkflow.
AgentNetwork build_agents(const std::vector<TrainingPair>& dataset, const LifeConfig& config,
    const SimilarityBackend& backend = {}, std::uint64_t rng_seed = 0);

// Active agents with similarity strictly above theta, score-descending, ties by id.
std::vector<ScoredAgent> retrieve(const AgentNetwork& net, const Goal& g, double theta);

double compatibility(const AgentNetwork& net, const AtomicAgent& agent, const Transition& t);

std::vector<double> selection_probabilities(std::span<const WeightedCandidate> candidates);
// Samples proportionally to life * gamma; throws NoEligibleAgent if all weights vanish.
std::size_t select(std::span<const WeightedCandidate> candidates, Rng& rng);

// Unclamped reward minus penalty of one outcome.
double life_delta(const Outcome& outcome, const LifeConfig& config);
void record_stats(AtomicAgent& agent, const Outcome& outcome);
double update_life(AtomicAgent& agent, const Outcome& outcome, const LifeConfig& config);

ChangeLog eliminate_and_refresh(AgentNetwork& net);

std::string agent_label(AgentId id);

} // namespace agentnet
