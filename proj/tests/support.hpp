#pragma once

// Builders and independent reference implementations shared by the tests.
// The reference code deliberately avoids the library's own traversal helpers.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "agentnet/corpus.hpp"
#include "agentnet/workflow.hpp"

namespace testing {

using agentnet::FieldSet;
using agentnet::Node;
using agentnet::NodeKind;
using agentnet::Predicate;
using agentnet::PredicateOp;
using agentnet::TaskNode;
using agentnet::Workflow;

inline Node T(const std::string& tool, FieldSet in = {}, FieldSet out = {})
{
    TaskNode t;
    t.tool_id = tool;
    t.inputs = std::move(in);
    t.outputs = std::move(out);
    return Node::make_task(std::move(t));
}

inline Node S(std::vector<Node> items) { return Node::make_seq(std::move(items)); }

inline Predicate exists(const std::string& key) { return { key, PredicateOp::Exists, std::nullopt }; }

inline Workflow W(Node root, FieldSet in = {}, FieldSet out = {}, const std::string& id = "w")
{
    Workflow w;
    w.id = id;
    w.goal_id = "g-" + id;
    w.declared_inputs = std::move(in);
    w.declared_outputs = std::move(out);
    w.root = std::move(root);
    return w;
}

// Flat workflow of tools t0..t{n-1} where each consumes its predecessor's output.
inline Workflow chain(const std::string& prefix, std::size_t n)
{
    std::vector<Node> items;
    for (std::size_t i = 0; i < n; ++i) {
        FieldSet in;
        if (i > 0) {
            in.insert(prefix + "_f" + std::to_string(i - 1));
        }
        items.push_back(T(prefix + std::to_string(i), in, { prefix + "_f" + std::to_string(i) }));
    }
    return W(S(std::move(items)), {}, { prefix + "_f" + std::to_string(n - 1) }, prefix);
}

// ---- reference traversal ---------------------------------------------------

struct RefCounts {
    std::size_t tasks = 0;
    std::size_t max_nest = 0;
    std::size_t branches = 0;
};

inline void ref_count(const Node& n, std::size_t nest_level, RefCounts& c)
{
    if (n.kind == NodeKind::Task) {
        ++c.tasks;
    }
    if (n.kind == NodeKind::Branch) {
        ++c.branches;
    }
    if (n.kind == NodeKind::Nest) {
        ++nest_level;
        c.max_nest = std::max(c.max_nest, nest_level);
    }
    for (const auto& ch : n.children) {
        ref_count(ch, nest_level, c);
    }
}

inline RefCounts ref_counts(const Node& n)
{
    RefCounts c;
    ref_count(n, 0, c);
    return c;
}

inline void ref_tools(const Node& n, std::vector<std::string>& out)
{
    if (n.kind == NodeKind::Task) {
        out.push_back(n.task.tool_id);
    }
    for (const auto& ch : n.children) {
        ref_tools(ch, out);
    }
}

inline std::vector<std::string> ref_tools(const Node& n)
{
    std::vector<std::string> out;
    ref_tools(n, out);
    return out;
}

// Renders a tree with nested sequences spliced and empty sequences dropped;
// two trees are structurally equal iff their renderings match.
inline void ref_render_items(const Node& n, std::vector<std::string>& items);

inline std::string ref_render_block(const Node& n)
{
    std::vector<std::string> items;
    ref_render_items(n, items);
    std::string s = "[";
    for (const auto& i : items) {
        s += i + ",";
    }
    return s + "]";
}

inline std::string ref_render_task(const TaskNode& t)
{
    std::string s = "T(" + t.tool_id + ";";
    for (const auto& f : t.inputs) {
        s += f + " ";
    }
    s += ";";
    for (const auto& f : t.outputs) {
        s += f + " ";
    }
    for (const auto& [k, v] : t.params) {
        s += ";" + k + "=" + v;
    }
    return s + ")";
}

inline void ref_render_items(const Node& n, std::vector<std::string>& items)
{
    switch (n.kind) {
    case NodeKind::Task:
        items.push_back(ref_render_task(n.task));
        return;
    case NodeKind::Sequence:
        for (const auto& c : n.children) {
            ref_render_items(c, items);
        }
        return;
    case NodeKind::Branch: {
        std::string s = "B(" + n.cond.key + "#" + std::to_string(static_cast<int>(n.cond.op)) + "#" + n.cond.value.value_or("") + ":";
        s += ref_render_block(n.children.at(0));
        if (n.children.size() > 1) {
            const std::string e = ref_render_block(n.children[1]);
            if (e != "[]") {
                s += "|" + e;
            }
        }
        items.push_back(s + ")");
        return;
    }
    case NodeKind::Nest:
        items.push_back("N(" + n.sub_goal + ":" + ref_render_block(n.children.at(0)) + ")");
        return;
    }
}

inline bool ref_equal(const Node& a, const Node& b) { return ref_render_block(a) == ref_render_block(b); }

// Dataflow validator written as a plain recursive descent over scopes.
inline bool ref_valid_node(const Node& n, FieldSet& scope)
{
    switch (n.kind) {
    case NodeKind::Task:
        if (n.task.tool_id.empty()) {
            return false;
        }
        for (const auto& f : n.task.inputs) {
            if (scope.count(f) == 0) {
                return false;
            }
        }
        for (const auto& f : n.task.outputs) {
            scope.insert(f);
        }
        return true;
    case NodeKind::Sequence:
        if (n.children.empty()) {
            return false;
        }
        for (const auto& c : n.children) {
            if (!ref_valid_node(c, scope)) {
                return false;
            }
        }
        return true;
    case NodeKind::Branch: {
        if (n.children.empty() || n.children.size() > 2) {
            return false;
        }
        FieldSet a = scope;
        FieldSet b = scope;
        if (!ref_valid_node(n.children[0], a)) {
            return false;
        }
        if (n.children.size() == 2 && !ref_valid_node(n.children[1], b)) {
            return false;
        }
        for (const auto& f : a) {
            if (b.count(f)) {
                scope.insert(f);
            }
        }
        return true;
    }
    case NodeKind::Nest:
        return n.children.size() == 1 && !n.sub_goal.empty() && ref_valid_node(n.children[0], scope);
    }
    return false;
}

inline bool ref_valid(const Workflow& w)
{
    FieldSet scope = w.declared_inputs;
    return ref_valid_node(w.root, scope);
}

// ---- single-edit enumeration ----------------------------------------------

struct Neighbor {
    enum Kind { Deletion, Swap } kind;
    Node tree;
};

// Every tree obtained from `root` by deleting one child of a Sequence block
// or swapping two adjacent children of one. Sequences that would become empty
// are skipped.
inline void enumerate_single_edits(const Node& root, const std::function<void(const Neighbor&)>& visit)
{
    std::function<void(const Node&, const std::function<Node(Node)>&)> walk = [&](const Node& n, const std::function<Node(Node)>& rebuild) {
        if (n.kind == NodeKind::Sequence) {
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (n.children.size() > 1) {
                    Node del = n;
                    del.children.erase(del.children.begin() + static_cast<std::ptrdiff_t>(i));
                    visit({ Neighbor::Deletion, rebuild(del) });
                }
                if (i + 1 < n.children.size() && !(n.children[i] == n.children[i + 1])) {
                    Node sw = n;
                    std::swap(sw.children[i], sw.children[i + 1]);
                    visit({ Neighbor::Swap, rebuild(sw) });
                }
            }
        }
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            walk(n.children[i], [&, i](Node child) {
                Node copy = n;
                copy.children[i] = std::move(child);
                return rebuild(std::move(copy));
            });
        }
    };
    walk(root, [](Node n) { return n; });
}

inline std::vector<agentnet::CorpusRecord> small_corpus(std::size_t n, std::uint64_t seed)
{
    auto profile = agentnet::default_profile();
    profile.total = n;
    return agentnet::generate(profile, seed);
}

} // namespace testing
