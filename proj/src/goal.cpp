#include "agentnet/goal.hpp"

#include <algorithm>

#include "agentnet/errors.hpp"
#include "agentnet/workflow_json.hpp"

namespace agentnet {

using nlohmann::json;

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

namespace {

double weight_of(const SimilarityBackend& backend, const std::string& token)
{
    if (auto it = backend.parameters.find("w:" + token); it != backend.parameters.end()) {
        return std::max(0.0, it->second);
    }
    if (auto it = backend.parameters.find("default_weight"); it != backend.parameters.end()) {
        return std::max(0.0, it->second);
    }
    return 1.0;
}

double weighted_overlap(const SimilarityBackend& backend, const TokenSet& a, const TokenSet& b)
{
    double inter = 0.0;
    double uni = 0.0;
    for (const auto& t : a) {
        const double w = weight_of(backend, t);
        uni += w;
        if (b.contains(t)) {
            inter += w;
        }
    }
    for (const auto& t : b) {
        if (!a.contains(t)) {
            uni += weight_of(backend, t);
        }
    }
    if (uni <= 0.0) {
        return a == b ? 1.0 : 0.0;
    }
    return inter / uni;
}

} // namespace

double similarity(const SimilarityBackend& backend, const Goal& a, const Goal& b)
{
    if (a.tokens.empty() || b.tokens.empty()) {
        throw EmptyGoal("similarity on goal with empty token set ('" + (a.tokens.empty() ? a.id : b.id) + "')");
    }
    switch (backend.kind) {
    case SimilarityKind::Jaccard:
        return jaccard(a.tokens, b.tokens);
    case SimilarityKind::WeightedOverlap:
        return weighted_overlap(backend, a.tokens, b.tokens);
    }
    return 0.0;
}

bool schema_compat(const FieldSet& producer_outputs, const Goal& consumer)
{
    return std::includes(producer_outputs.begin(), producer_outputs.end(), consumer.input_schema.begin(), consumer.input_schema.end());
}

json to_json(const Goal& g, bool include_oracle)
{
    json j = { { "id", g.id }, { "tokens", to_json(g.tokens) }, { "input_schema", to_json(g.input_schema) }, { "output_schema", to_json(g.output_schema) } };
    if (include_oracle && g.subgoal_template) {
        j["oracle"] = { { "subgoal_template", *g.subgoal_template } };
    }
    return j;
}

Goal goal_from_json(const json& j, bool keep_oracle)
{
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("tokens")) {
        throw IoError("goal record needs string 'id' and 'tokens'");
    }
    Goal g;
    g.id = j["id"].get<std::string>();
    g.tokens = fieldset_from_json(j["tokens"]);
    if (j.contains("input_schema")) {
        g.input_schema = fieldset_from_json(j["input_schema"]);
    }
    if (j.contains("output_schema")) {
        g.output_schema = fieldset_from_json(j["output_schema"]);
    }
    if (keep_oracle && j.contains("oracle") && j["oracle"].contains("subgoal_template")) {
        const auto& t = j["oracle"]["subgoal_template"];
        if (!t.is_array()) {
            throw IoError("subgoal_template must be an array");
        }
        std::vector<std::string> ids;
        for (const auto& id : t) {
            ids.push_back(id.get<std::string>());
        }
        g.subgoal_template = std::move(ids);
    }
    return g;
}

json goal_library_to_json(const std::vector<Goal>& goals, bool include_oracle)
{
    json a = json::array();
    for (const auto& g : goals) {
        a.push_back(to_json(g, include_oracle));
    }
    return a;
}

std::vector<Goal> goal_library_from_json(const json& j, bool keep_oracle)
{
    if (!j.is_array()) {
        throw IoError("goal library must be a JSON array");
    }
    std::vector<Goal> out;
    for (const auto& g : j) {
        out.push_back(goal_from_json(g, keep_oracle));
    }
    return out;
}

} // namespace agentnet
