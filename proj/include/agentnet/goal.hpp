#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/workflow.hpp"

namespace agentnet {

using TokenSet = std::set<std::string>;

struct Goal {
    std::string id;
    TokenSet tokens;
    FieldSet input_schema;
    FieldSet output_schema;
    // Ground-truth decomposition; oracle-only, never read by the solver.
    std::optional<std::vector<std::string>> subgoal_template;

    bool operator==(const Goal&) const = default;
};

enum class SimilarityKind { Jaccard, WeightedOverlap };

// Pluggable goal similarity. WeightedOverlap reads per-token weights from
// parameters "w:<token>" (default "default_weight", else 1).
struct SimilarityBackend {
    SimilarityKind kind = SimilarityKind::Jaccard;
    std::map<std::string, double> parameters;
};

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Throws EmptyGoal when either token set is empty.
double similarity(const SimilarityBackend& backend, const Goal& a, const Goal& b);

bool schema_compat(const FieldSet& producer_outputs, const Goal& consumer);

// Oracle-only data lives under the "oracle" key so loaders can strip it.
nlohmann::json to_json(const Goal& g, bool include_oracle = true);
Goal goal_from_json(const nlohmann::json& j, bool keep_oracle = true);

nlohmann::json goal_library_to_json(const std::vector<Goal>& goals, bool include_oracle = true);
std::vector<Goal> goal_library_from_json(const nlohmann::json& j, bool keep_oracle = true);

} // namespace agentnet
