#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace agentnet {

using FieldSet = std::set<std::string>;
using Path = std::vector<std::size_t>;

enum class PredicateOp { Equals, Exists, NotExists };

struct Predicate {
    std::string key;
    PredicateOp op = PredicateOp::Exists;
    std::optional<std::string> value;

    bool operator==(const Predicate&) const = default;
};

struct TaskNode {
    std::string tool_id;
    FieldSet inputs;
    FieldSet outputs;
    std::map<std::string, std::string> params;

    bool operator==(const TaskNode&) const = default;
};

enum class NodeKind { Task, Sequence, Branch, Nest };

// One node of a workflow tree. Children layout by kind:
//   Sequence: the ordered items
//   Branch:   [then] or [then, else]
//   Nest:     [body]
struct Node {
    NodeKind kind = NodeKind::Sequence;
    TaskNode task;
    std::vector<Node> children;
    Predicate cond;
    std::string sub_goal;

    static Node make_task(TaskNode t);
    static Node make_seq(std::vector<Node> items = {});
    static Node make_branch(Predicate cond, Node then_arm, std::optional<Node> else_arm = std::nullopt);
    static Node make_nest(std::string sub_goal, Node body);

    bool is_task() const { return kind == NodeKind::Task; }
    bool is_seq() const { return kind == NodeKind::Sequence; }
    bool is_branch() const { return kind == NodeKind::Branch; }
    bool is_nest() const { return kind == NodeKind::Nest; }

    bool has_else() const { return is_branch() && children.size() > 1; }

    bool operator==(const Node&) const = default;
};

struct Workflow {
    std::string id;
    std::string goal_id;
    FieldSet declared_inputs;
    FieldSet declared_outputs;
    Node root = Node::make_seq();

    bool operator==(const Workflow&) const = default;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

struct StructMetrics {
    std::size_t length = 0;
    std::size_t depth = 0;
    std::size_t branch_count = 0;

    bool operator==(const StructMetrics&) const = default;
};

ValidationReport validate(const Workflow& w);

// Requires a valid workflow; throws InvalidWorkflow otherwise.
StructMetrics metrics(const Workflow& w);
// Same traversal without the validity precondition.
StructMetrics measure(const Node& root);

// Canonical form: the root and every Branch arm / Nest body is a Sequence
// block, Sequences never directly contain Sequences, empty Sequences vanish
// and an empty else arm is dropped. Paths address this form.
Node canonical(const Node& n);
Workflow canonical(const Workflow& w);

// Ordered-tree equality modulo Sequence normalization.
bool structurally_equal(const Node& a, const Node& b);
bool structurally_equal(const Workflow& a, const Workflow& b);

Workflow flatten(const Workflow& w);

Workflow concat(const Workflow& a, const Workflow& b);
Workflow branch(const Workflow& host, const Predicate& cond, const Workflow& alt);
Workflow nest(const Workflow& host, const Path& slot_path, const std::string& sub_goal, const Workflow& body);

// Node addressed by `path` inside a canonical tree; throws BadPath.
const Node& node_at(const Node& canonical_root, const Path& path);
Node& node_at(Node& canonical_root, const Path& path);

// Left-to-right Task list of a tree.
std::vector<const TaskNode*> tasks_in_order(const Node& n);
std::vector<std::string> tool_sequence(const Node& n);
FieldSet all_task_outputs(const Node& n);

// Fields guaranteed bound after running `w` from its declared inputs
// (Branch arms contribute only what every arm binds).
FieldSet bound_fields(const Workflow& w);
// Fields bound just before the node at `path` of a canonical tree executes.
FieldSet scope_at(const Node& canonical_root, const FieldSet& declared_inputs, const Path& path);

// Tasks not backward-reachable from `required_outputs`.
std::size_t dead_task_count(const Node& root, const FieldSet& required_outputs);
double dead_node_ratio(const Node& root, const FieldSet& required_outputs);

// Key describing the flattened skeleton plus tool multiset.
std::string shape_key(const Workflow& w);

bool path_less(const Path& a, const Path& b);
std::string path_string(const Path& p);

} // namespace agentnet
