#include "agentnet/edit_script.hpp"

#include <algorithm>
#include <numeric>

#include "agentnet/errors.hpp"

namespace agentnet {

namespace {

enum class Op { Match, Delete, Insert };

struct Step {
    Op op;
    std::size_t s;
    std::size_t t;
};

std::vector<Step> lcs_alignment(const std::vector<Node>& a, const std::vector<Node>& b)
{
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<std::vector<std::size_t>> len(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            len[i][j] = a[i] == b[j] ? len[i + 1][j + 1] + 1 : std::max(len[i + 1][j], len[i][j + 1]);
        }
    }
    std::vector<Step> steps;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j] && len[i][j] == len[i + 1][j + 1] + 1) {
            steps.push_back({ Op::Match, i++, j++ });
        } else if (j == m || (i < n && len[i + 1][j] >= len[i][j + 1])) {
            steps.push_back({ Op::Delete, i++, j });
        } else {
            steps.push_back({ Op::Insert, i, j++ });
        }
    }
    return steps;
}

// Permutation that turns `from` into `to` when both hold the same multiset.
std::optional<std::vector<std::size_t>> permutation_between(const std::vector<Node>& from, const std::vector<Node>& to)
{
    if (from.size() != to.size()) {
        return std::nullopt;
    }
    std::vector<bool> used(from.size(), false);
    std::vector<std::size_t> perm;
    perm.reserve(to.size());
    for (const auto& item : to) {
        bool found = false;
        for (std::size_t i = 0; i < from.size(); ++i) {
            if (!used[i] && from[i] == item) {
                used[i] = true;
                perm.push_back(i);
                found = true;
                break;
            }
        }
        if (!found) {
            return std::nullopt;
        }
    }
    return perm;
}

bool recursable(const Node& a, const Node& b)
{
    if (a.kind != b.kind) {
        return false;
    }
    if (a.is_nest()) {
        return a.sub_goal == b.sub_goal;
    }
    if (a.is_branch()) {
        return a.cond == b.cond && a.has_else() == b.has_else();
    }
    return false;
}

void diff_block(const Node& source, const Node& target, Path& path, EditScript& out);

void diff_paired(const Node& a, const Node& b, Path& path, EditScript& out)
{
    for (std::size_t k = 0; k < a.children.size(); ++k) {
        path.push_back(k);
        diff_block(a.children[k], b.children[k], path, out);
        path.pop_back();
    }
}

void diff_block(const Node& source, const Node& target, Path& path, EditScript& out)
{
    if (source.children == target.children) {
        return;
    }
    if (auto perm = permutation_between(source.children, target.children)) {
        out.push_back({ EditKind::ReorderChildren, path, std::nullopt, std::move(*perm) });
        return;
    }

    std::vector<Node> items = source.children;
    auto steps = lcs_alignment(items, target.children);

    // Items outside the common subsequence that reappear elsewhere are moves:
    // gather every matched item into target order with one reorder first.
    std::vector<std::pair<std::size_t, std::size_t>> pairs; // (source idx, target idx)
    std::vector<std::size_t> loose_s;
    std::vector<std::size_t> loose_t;
    for (const auto& st : steps) {
        if (st.op == Op::Match) {
            pairs.emplace_back(st.s, st.t);
        } else if (st.op == Op::Delete) {
            loose_s.push_back(st.s);
        } else {
            loose_t.push_back(st.t);
        }
    }
    bool moved = false;
    std::vector<bool> t_taken(target.children.size(), false);
    for (std::size_t s : loose_s) {
        for (std::size_t t : loose_t) {
            if (!t_taken[t] && items[s] == target.children[t]) {
                t_taken[t] = true;
                pairs.emplace_back(s, t);
                moved = true;
                break;
            }
        }
    }
    if (moved) {
        std::vector<std::size_t> slots;
        for (const auto& p : pairs) {
            slots.push_back(p.first);
        }
        std::sort(slots.begin(), slots.end());
        std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
        std::vector<std::size_t> perm(items.size());
        std::iota(perm.begin(), perm.end(), std::size_t{ 0 });
        for (std::size_t k = 0; k < slots.size(); ++k) {
            perm[slots[k]] = pairs[k].first;
        }
        std::vector<Node> reordered;
        reordered.reserve(items.size());
        for (std::size_t idx : perm) {
            reordered.push_back(items[idx]);
        }
        out.push_back({ EditKind::ReorderChildren, path, std::nullopt, std::move(perm) });
        items = std::move(reordered);
        steps = lcs_alignment(items, target.children);
    }

    std::size_t cur = 0;
    std::size_t k = 0;
    while (k < steps.size()) {
        if (steps[k].op == Op::Match) {
            ++cur;
            ++k;
            continue;
        }
        std::vector<std::size_t> del;
        std::vector<std::size_t> ins;
        while (k < steps.size() && steps[k].op != Op::Match) {
            (steps[k].op == Op::Delete ? del : ins).push_back(steps[k].op == Op::Delete ? steps[k].s : steps[k].t);
            ++k;
        }
        const std::size_t paired = std::min(del.size(), ins.size());
        for (std::size_t p = 0; p < paired; ++p) {
            const Node& a = items[del[p]];
            const Node& b = target.children[ins[p]];
            path.push_back(cur);
            if (recursable(a, b)) {
                diff_paired(a, b, path, out);
            } else {
                out.push_back({ EditKind::ReplaceSubtree, path, b, {} });
            }
            path.pop_back();
            ++cur;
        }
        for (std::size_t p = paired; p < del.size(); ++p) {
            Path at = path;
            at.push_back(cur);
            out.push_back({ EditKind::DeleteNode, std::move(at), std::nullopt, {} });
        }
        for (std::size_t p = paired; p < ins.size(); ++p) {
            Path at = path;
            at.push_back(cur);
            out.push_back({ EditKind::InsertNode, std::move(at), target.children[ins[p]], {} });
            ++cur;
        }
    }
}

Node& parent_block(Node& root, const Path& path)
{
    if (path.empty()) {
        throw BadPath("edit requires a non-root position");
    }
    Path parent(path.begin(), path.end() - 1);
    Node& p = node_at(root, parent);
    if (!p.is_seq()) {
        throw BadPath("parent of " + path_string(path) + " is not a sequence");
    }
    return p;
}

void apply_one(const Edit& e, Node& root)
{
    switch (e.kind) {
    case EditKind::InsertNode: {
        Node& p = parent_block(root, e.path);
        const std::size_t at = e.path.back();
        if (at > p.children.size() || !e.node) {
            throw BadPath("cannot insert at " + path_string(e.path));
        }
        p.children.insert(p.children.begin() + static_cast<std::ptrdiff_t>(at), *e.node);
        break;
    }
    case EditKind::DeleteNode: {
        Node& p = parent_block(root, e.path);
        const std::size_t at = e.path.back();
        if (at >= p.children.size()) {
            throw BadPath("cannot delete at " + path_string(e.path));
        }
        p.children.erase(p.children.begin() + static_cast<std::ptrdiff_t>(at));
        break;
    }
    case EditKind::ReorderChildren: {
        Node& s = node_at(root, e.path);
        std::vector<std::size_t> sorted = e.permutation;
        std::sort(sorted.begin(), sorted.end());
        bool is_perm = s.is_seq() && sorted.size() == s.children.size();
        for (std::size_t i = 0; is_perm && i < sorted.size(); ++i) {
            is_perm = sorted[i] == i;
        }
        if (!is_perm) {
            throw BadPath("invalid reorder at " + path_string(e.path));
        }
        std::vector<Node> next;
        next.reserve(s.children.size());
        for (std::size_t idx : e.permutation) {
            next.push_back(std::move(s.children[idx]));
        }
        s.children = std::move(next);
        break;
    }
    case EditKind::ReplaceSubtree: {
        if (!e.node) {
            throw BadPath("replace without node at " + path_string(e.path));
        }
        node_at(root, e.path) = *e.node;
        break;
    }
    }
}

} // namespace

EditScript diff(const Node& source, const Node& target)
{
    EditScript out;
    Path path;
    diff_block(canonical(source), canonical(target), path, out);
    return out;
}

EditScript diff(const Workflow& source, const Workflow& target)
{
    return diff(source.root, target.root);
}

Node apply(const EditScript& script, const Node& root)
{
    Node cur = canonical(root);
    for (const auto& e : script) {
        apply_one(e, cur);
    }
    return canonical(cur);
}

Workflow apply(const EditScript& script, const Workflow& w)
{
    Workflow r = w;
    r.root = apply(script, w.root);
    return r;
}

const char* to_string(EditKind k)
{
    switch (k) {
    case EditKind::InsertNode:
        return "insert";
    case EditKind::DeleteNode:
        return "delete";
    case EditKind::ReorderChildren:
        return "reorder";
    case EditKind::ReplaceSubtree:
        return "replace";
    }
    return "?";
}

} // namespace agentnet
