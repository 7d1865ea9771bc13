#include "agentnet/workflow.hpp"

#include <algorithm>
#include <sstream>

#include "agentnet/errors.hpp"

namespace agentnet {

Node Node::make_task(TaskNode t)
{
    Node n;
    n.kind = NodeKind::Task;
    n.task = std::move(t);
    return n;
}

Node Node::make_seq(std::vector<Node> items)
{
    Node n;
    n.kind = NodeKind::Sequence;
    n.children = std::move(items);
    return n;
}

Node Node::make_branch(Predicate cond, Node then_arm, std::optional<Node> else_arm)
{
    Node n;
    n.kind = NodeKind::Branch;
    n.cond = std::move(cond);
    n.children.push_back(std::move(then_arm));
    if (else_arm) {
        n.children.push_back(std::move(*else_arm));
    }
    return n;
}

Node Node::make_nest(std::string sub_goal, Node body)
{
    Node n;
    n.kind = NodeKind::Nest;
    n.sub_goal = std::move(sub_goal);
    n.children.push_back(std::move(body));
    return n;
}

namespace {

void propagate(const Node& n, FieldSet& scope, std::vector<std::string>* violations, Path& path)
{
    auto report = [&](const std::string& msg) {
        if (violations) {
            violations->push_back(msg + " at " + path_string(path));
        }
    };

    switch (n.kind) {
    case NodeKind::Task:
        if (n.task.tool_id.empty()) {
            report("empty tool id");
        }
        for (const auto& f : n.task.inputs) {
            if (!scope.contains(f)) {
                report("unbound input '" + f + "' of tool '" + n.task.tool_id + "'");
            }
        }
        scope.insert(n.task.outputs.begin(), n.task.outputs.end());
        break;
    case NodeKind::Sequence:
        if (n.children.empty()) {
            report("empty sequence");
        }
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            path.push_back(i);
            propagate(n.children[i], scope, violations, path);
            path.pop_back();
        }
        break;
    case NodeKind::Branch: {
        const auto& c = n.cond;
        if (c.key.empty()) {
            report("predicate without key");
        }
        if (c.op == PredicateOp::Equals && !c.value) {
            report("equals predicate without value");
        }
        if (c.op != PredicateOp::Equals && c.value) {
            report("existence predicate with value");
        }
        if (n.children.empty() || n.children.size() > 2) {
            report("branch must have a then arm and at most one else arm");
            break;
        }
        FieldSet then_scope = scope;
        path.push_back(0);
        propagate(n.children[0], then_scope, violations, path);
        path.pop_back();
        FieldSet else_scope = scope;
        if (n.children.size() == 2) {
            path.push_back(1);
            propagate(n.children[1], else_scope, violations, path);
            path.pop_back();
        }
        for (const auto& f : then_scope) {
            if (else_scope.contains(f)) {
                scope.insert(f);
            }
        }
        break;
    }
    case NodeKind::Nest:
        if (n.sub_goal.empty()) {
            report("nest without sub-goal id");
        }
        if (n.children.size() != 1) {
            report("nest must have exactly one body");
            break;
        }
        path.push_back(0);
        propagate(n.children[0], scope, violations, path);
        path.pop_back();
        break;
    }
}

void measure_into(const Node& n, std::size_t level, StructMetrics& m)
{
    switch (n.kind) {
    case NodeKind::Task:
        ++m.length;
        m.depth = std::max(m.depth, level);
        return;
    case NodeKind::Branch:
        ++m.branch_count;
        break;
    case NodeKind::Nest:
        ++level;
        m.depth = std::max(m.depth, level);
        break;
    case NodeKind::Sequence:
        break;
    }
    for (const auto& c : n.children) {
        measure_into(c, level, m);
    }
}

Node as_block(Node n)
{
    if (n.is_seq()) {
        return n;
    }
    std::vector<Node> items;
    items.push_back(std::move(n));
    return Node::make_seq(std::move(items));
}

Node canonical_node(const Node& n);

Node canonical_block(const Node& n)
{
    return as_block(canonical_node(n));
}

Node canonical_node(const Node& n)
{
    switch (n.kind) {
    case NodeKind::Task:
        return n;
    case NodeKind::Sequence: {
        std::vector<Node> items;
        for (const auto& c : n.children) {
            Node cc = canonical_node(c);
            if (cc.is_seq()) {
                for (auto& g : cc.children) {
                    items.push_back(std::move(g));
                }
            } else {
                items.push_back(std::move(cc));
            }
        }
        return Node::make_seq(std::move(items));
    }
    case NodeKind::Branch: {
        Node then_arm = n.children.empty() ? Node::make_seq() : canonical_block(n.children[0]);
        std::optional<Node> else_arm;
        if (n.children.size() > 1) {
            Node e = canonical_block(n.children[1]);
            if (!e.children.empty()) {
                else_arm = std::move(e);
            }
        }
        return Node::make_branch(n.cond, std::move(then_arm), std::move(else_arm));
    }
    case NodeKind::Nest:
        return Node::make_nest(n.sub_goal, n.children.empty() ? Node::make_seq() : canonical_block(n.children[0]));
    }
    return n;
}

// Inline Nest bodies of a canonical block.
Node inline_block(const Node& block)
{
    std::vector<Node> items;
    for (const auto& c : block.children) {
        if (c.is_nest()) {
            Node body = inline_block(c.children[0]);
            for (auto& b : body.children) {
                items.push_back(std::move(b));
            }
        } else if (c.is_branch()) {
            std::optional<Node> else_arm;
            if (c.has_else()) {
                else_arm = inline_block(c.children[1]);
            }
            items.push_back(Node::make_branch(c.cond, inline_block(c.children[0]), std::move(else_arm)));
        } else {
            items.push_back(c);
        }
    }
    return Node::make_seq(std::move(items));
}

void collect_tasks(const Node& n, std::vector<const TaskNode*>& out)
{
    if (n.is_task()) {
        out.push_back(&n.task);
        return;
    }
    for (const auto& c : n.children) {
        collect_tasks(c, out);
    }
}

void skeleton(const Node& n, std::string& out)
{
    switch (n.kind) {
    case NodeKind::Task:
        out += 'T';
        return;
    case NodeKind::Sequence:
        out += "S[";
        break;
    case NodeKind::Branch:
        out += "B[";
        break;
    case NodeKind::Nest:
        out += "N[";
        break;
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) {
            out += ',';
        }
        skeleton(n.children[i], out);
    }
    out += ']';
}

template <typename NodeT>
NodeT& walk(NodeT& root, const Path& path)
{
    NodeT* cur = &root;
    for (std::size_t depth = 0; depth < path.size(); ++depth) {
        const std::size_t i = path[depth];
        if (cur->is_task() || i >= cur->children.size()) {
            throw BadPath("path " + path_string(path) + " does not resolve");
        }
        cur = &cur->children[i];
    }
    return *cur;
}

} // namespace

ValidationReport validate(const Workflow& w)
{
    ValidationReport r;
    FieldSet scope = w.declared_inputs;
    Path path;
    propagate(w.root, scope, &r.violations, path);
    r.ok = r.violations.empty();
    return r;
}

StructMetrics measure(const Node& root)
{
    StructMetrics m;
    measure_into(root, 0, m);
    return m;
}

StructMetrics metrics(const Workflow& w)
{
    const auto report = validate(w);
    if (!report.ok) {
        throw InvalidWorkflow("metrics on invalid workflow '" + w.id + "': " + report.violations.front());
    }
    return measure(w.root);
}

Node canonical(const Node& n)
{
    return canonical_block(n);
}

Workflow canonical(const Workflow& w)
{
    Workflow c = w;
    c.root = canonical(w.root);
    return c;
}

bool structurally_equal(const Node& a, const Node& b)
{
    return canonical(a) == canonical(b);
}

bool structurally_equal(const Workflow& a, const Workflow& b)
{
    return structurally_equal(a.root, b.root);
}

Workflow flatten(const Workflow& w)
{
    Workflow r = w;
    r.root = canonical(inline_block(canonical(w.root)));
    return r;
}

Workflow concat(const Workflow& a, const Workflow& b)
{
    Workflow r;
    r.id = a.id;
    r.goal_id = a.goal_id;
    r.declared_inputs = a.declared_inputs;
    r.declared_outputs = a.declared_outputs;
    r.declared_outputs.insert(b.declared_outputs.begin(), b.declared_outputs.end());

    Node ca = canonical(a.root);
    Node cb = canonical(b.root);
    for (auto& c : cb.children) {
        ca.children.push_back(std::move(c));
    }
    r.root = std::move(ca);
    return r;
}

Workflow branch(const Workflow& host, const Predicate& cond, const Workflow& alt)
{
    Workflow r = host;
    r.root = canonical(host.root);
    r.root.children.push_back(Node::make_branch(cond, canonical(alt.root)));
    return r;
}

Workflow nest(const Workflow& host, const Path& slot_path, const std::string& sub_goal, const Workflow& body)
{
    Workflow r = host;
    r.root = canonical(host.root);
    Node& slot = node_at(r.root, slot_path);
    Node wrapped = Node::make_nest(sub_goal, canonical(body.root));
    if (slot.is_seq()) {
        slot = Node::make_seq({ std::move(wrapped) });
    } else {
        slot = std::move(wrapped);
    }
    r.declared_outputs.insert(body.declared_outputs.begin(), body.declared_outputs.end());
    return r;
}

const Node& node_at(const Node& canonical_root, const Path& path)
{
    return walk(canonical_root, path);
}

Node& node_at(Node& canonical_root, const Path& path)
{
    return walk(canonical_root, path);
}

std::vector<const TaskNode*> tasks_in_order(const Node& n)
{
    std::vector<const TaskNode*> out;
    collect_tasks(n, out);
    return out;
}

std::vector<std::string> tool_sequence(const Node& n)
{
    std::vector<std::string> out;
    for (const auto* t : tasks_in_order(n)) {
        out.push_back(t->tool_id);
    }
    return out;
}

FieldSet all_task_outputs(const Node& n)
{
    FieldSet out;
    for (const auto* t : tasks_in_order(n)) {
        out.insert(t->outputs.begin(), t->outputs.end());
    }
    return out;
}

FieldSet bound_fields(const Workflow& w)
{
    FieldSet scope = w.declared_inputs;
    Path path;
    propagate(w.root, scope, nullptr, path);
    return scope;
}

FieldSet scope_at(const Node& canonical_root, const FieldSet& declared_inputs, const Path& path)
{
    FieldSet scope = declared_inputs;
    const Node* cur = &canonical_root;
    Path scratch;
    for (std::size_t depth = 0; depth < path.size(); ++depth) {
        const std::size_t i = path[depth];
        const bool last = depth + 1 == path.size();
        if (cur->is_task() || i > cur->children.size() || (i == cur->children.size() && !(last && cur->is_seq()))) {
            throw BadPath("path " + path_string(path) + " does not resolve");
        }
        if (cur->is_seq()) {
            for (std::size_t j = 0; j < i; ++j) {
                propagate(cur->children[j], scope, nullptr, scratch);
            }
        }
        if (i == cur->children.size()) {
            break;
        }
        cur = &cur->children[i];
    }
    return scope;
}

std::size_t dead_task_count(const Node& root, const FieldSet& required_outputs)
{
    const auto tasks = tasks_in_order(root);
    FieldSet live = required_outputs;
    std::size_t dead = 0;
    for (auto it = tasks.rbegin(); it != tasks.rend(); ++it) {
        const TaskNode& t = **it;
        const bool useful = std::any_of(t.outputs.begin(), t.outputs.end(), [&](const std::string& f) { return live.contains(f); });
        if (useful) {
            live.insert(t.inputs.begin(), t.inputs.end());
        } else {
            ++dead;
        }
    }
    return dead;
}

double dead_node_ratio(const Node& root, const FieldSet& required_outputs)
{
    const auto total = tasks_in_order(root).size();
    if (total == 0) {
        return 0.0;
    }
    return static_cast<double>(dead_task_count(root, required_outputs)) / static_cast<double>(total);
}

std::string shape_key(const Workflow& w)
{
    const Workflow f = flatten(w);
    std::string out;
    skeleton(f.root, out);
    auto tools = tool_sequence(f.root);
    std::sort(tools.begin(), tools.end());
    out += '|';
    for (const auto& t : tools) {
        out += t;
        out += ';';
    }
    return out;
}

bool path_less(const Path& a, const Path& b)
{
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::string path_string(const Path& p)
{
    std::ostringstream os;
    os << '/';
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) {
            os << '/';
        }
        os << p[i];
    }
    return os.str();
}

} // namespace agentnet
