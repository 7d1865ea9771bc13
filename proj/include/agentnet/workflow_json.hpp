#pragma once

#include <string>

#include "json.hpp"

#include "agentnet/edit_script.hpp"
#include "agentnet/workflow.hpp"

namespace agentnet {

// Workflow document layout (keys sorted, no insignificant whitespace):
//   {"declared_inputs":[..],"declared_outputs":[..],"goal_id":..,"id":..,"root":NODE}
//   NODE = {"inputs":[..],"kind":"task","outputs":[..],"params":{..},"tool":..}
//        | {"children":[NODE..],"kind":"seq"}
//        | {"cond":{"key":..,"op":"equals|exists|not_exists"[,"value":..]},"else":NODE?,"kind":"branch","then":NODE}
//        | {"body":NODE,"kind":"nest","sub_goal":..}
nlohmann::json to_json(const Node& n);
nlohmann::json to_json(const Workflow& w);
nlohmann::json to_json(const Predicate& p);
nlohmann::json to_json(const Edit& e);
nlohmann::json to_json(const EditScript& s);
nlohmann::json to_json(const FieldSet& s);
nlohmann::json to_json(const Path& p);

// Throws IoError on malformed documents.
Node node_from_json(const nlohmann::json& j);
Workflow workflow_from_json(const nlohmann::json& j);
Predicate predicate_from_json(const nlohmann::json& j);
FieldSet fieldset_from_json(const nlohmann::json& j);

std::string serialize(const Workflow& w);
Workflow deserialize_workflow(const std::string& text);

const char* to_string(PredicateOp op);

} // namespace agentnet
