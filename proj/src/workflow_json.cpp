#include "agentnet/workflow_json.hpp"

#include "agentnet/errors.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) {
        throw IoError(std::string("missing key '") + key + "'");
    }
    return j.at(key);
}

std::string require_string(const json& j, const char* key)
{
    const json& v = require(j, key);
    if (!v.is_string()) {
        throw IoError(std::string("key '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

PredicateOp op_from_string(const std::string& s)
{
    if (s == "equals") {
        return PredicateOp::Equals;
    }
    if (s == "exists") {
        return PredicateOp::Exists;
    }
    if (s == "not_exists") {
        return PredicateOp::NotExists;
    }
    throw IoError("unknown predicate op '" + s + "'");
}

} // namespace

const char* to_string(PredicateOp op)
{
    switch (op) {
    case PredicateOp::Equals:
        return "equals";
    case PredicateOp::Exists:
        return "exists";
    case PredicateOp::NotExists:
        return "not_exists";
    }
    return "?";
}

json to_json(const FieldSet& s)
{
    json a = json::array();
    for (const auto& f : s) {
        a.push_back(f);
    }
    return a;
}

json to_json(const Path& p)
{
    json a = json::array();
    for (auto i : p) {
        a.push_back(i);
    }
    return a;
}

json to_json(const Predicate& p)
{
    json j = { { "key", p.key }, { "op", to_string(p.op) } };
    if (p.value) {
        j["value"] = *p.value;
    }
    return j;
}

json to_json(const Node& n)
{
    switch (n.kind) {
    case NodeKind::Task: {
        json params = json::object();
        for (const auto& [k, v] : n.task.params) {
            params[k] = v;
        }
        return { { "kind", "task" }, { "tool", n.task.tool_id }, { "inputs", to_json(n.task.inputs) }, { "outputs", to_json(n.task.outputs) }, { "params", params } };
    }
    case NodeKind::Sequence: {
        json items = json::array();
        for (const auto& c : n.children) {
            items.push_back(to_json(c));
        }
        return { { "kind", "seq" }, { "children", items } };
    }
    case NodeKind::Branch: {
        json j = { { "kind", "branch" }, { "cond", to_json(n.cond) }, { "then", to_json(n.children.at(0)) } };
        if (n.has_else()) {
            j["else"] = to_json(n.children[1]);
        }
        return j;
    }
    case NodeKind::Nest:
        return { { "kind", "nest" }, { "sub_goal", n.sub_goal }, { "body", to_json(n.children.at(0)) } };
    }
    return {};
}

json to_json(const Workflow& w)
{
    return { { "id", w.id }, { "goal_id", w.goal_id }, { "declared_inputs", to_json(w.declared_inputs) }, { "declared_outputs", to_json(w.declared_outputs) }, { "root", to_json(w.root) } };
}

json to_json(const Edit& e)
{
    json j = { { "op", to_string(e.kind) }, { "path", to_json(e.path) } };
    if (e.node) {
        j["node"] = to_json(*e.node);
    }
    if (e.kind == EditKind::ReorderChildren) {
        j["permutation"] = e.permutation;
    }
    return j;
}

json to_json(const EditScript& s)
{
    json a = json::array();
    for (const auto& e : s) {
        a.push_back(to_json(e));
    }
    return a;
}

FieldSet fieldset_from_json(const json& j)
{
    if (!j.is_array()) {
        throw IoError("field set must be an array");
    }
    FieldSet s;
    for (const auto& f : j) {
        if (!f.is_string()) {
            throw IoError("field names must be strings");
        }
        s.insert(f.get<std::string>());
    }
    return s;
}

Predicate predicate_from_json(const json& j)
{
    Predicate p;
    p.key = require_string(j, "key");
    p.op = op_from_string(require_string(j, "op"));
    if (j.contains("value")) {
        if (!j["value"].is_string()) {
            throw IoError("predicate value must be a string");
        }
        p.value = j["value"].get<std::string>();
    }
    return p;
}

Node node_from_json(const json& j)
{
    const std::string kind = require_string(j, "kind");
    if (kind == "task") {
        TaskNode t;
        t.tool_id = require_string(j, "tool");
        t.inputs = fieldset_from_json(require(j, "inputs"));
        t.outputs = fieldset_from_json(require(j, "outputs"));
        if (j.contains("params")) {
            if (!j["params"].is_object()) {
                throw IoError("params must be an object");
            }
            for (const auto& [k, v] : j["params"].items()) {
                if (!v.is_string()) {
                    throw IoError("param values must be strings");
                }
                t.params[k] = v.get<std::string>();
            }
        }
        return Node::make_task(std::move(t));
    }
    if (kind == "seq") {
        const json& items = require(j, "children");
        if (!items.is_array()) {
            throw IoError("seq children must be an array");
        }
        std::vector<Node> children;
        for (const auto& c : items) {
            children.push_back(node_from_json(c));
        }
        return Node::make_seq(std::move(children));
    }
    if (kind == "branch") {
        std::optional<Node> else_arm;
        if (j.contains("else")) {
            else_arm = node_from_json(j["else"]);
        }
        return Node::make_branch(predicate_from_json(require(j, "cond")), node_from_json(require(j, "then")), std::move(else_arm));
    }
    if (kind == "nest") {
        return Node::make_nest(require_string(j, "sub_goal"), node_from_json(require(j, "body")));
    }
    throw IoError("unknown node kind '" + kind + "'");
}

Workflow workflow_from_json(const json& j)
{
    Workflow w;
    w.id = require_string(j, "id");
    w.goal_id = require_string(j, "goal_id");
    w.declared_inputs = fieldset_from_json(require(j, "declared_inputs"));
    w.declared_outputs = fieldset_from_json(require(j, "declared_outputs"));
    w.root = node_from_json(require(j, "root"));
    return w;
}

std::string serialize(const Workflow& w)
{
    return to_json(w).dump();
}

Workflow deserialize_workflow(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("malformed workflow document: ") + e.what());
    }
    return workflow_from_json(j);
}

} // namespace agentnet
