#pragma once

#include <optional>
#include <vector>

#include "agentnet/workflow.hpp"

namespace agentnet {

enum class EditKind { InsertNode, DeleteNode, ReorderChildren, ReplaceSubtree };

// Paths address the canonical form as it stands when the edit is applied;
// edits apply in order. For InsertNode/DeleteNode the last path element is
// the position inside the parent Sequence. ReorderChildren rewrites the
// Sequence at `path` so that new_children[j] = old_children[permutation[j]].
struct Edit {
    EditKind kind = EditKind::InsertNode;
    Path path;
    std::optional<Node> node;
    std::vector<std::size_t> permutation;

    bool operator==(const Edit&) const = default;
};

using EditScript = std::vector<Edit>;

// Deterministic structural diff. Produces a single edit for one inserted or
// deleted node, one adjacent transposition, or one substituted node.
EditScript diff(const Node& source, const Node& target);
EditScript diff(const Workflow& source, const Workflow& target);

Node apply(const EditScript& script, const Node& root);
Workflow apply(const EditScript& script, const Workflow& w);

const char* to_string(EditKind k);

} // namespace agentnet
