#include "agentnet/subflow.hpp"

#include <algorithm>

#include "agentnet/errors.hpp"

namespace agentnet {

namespace {

std::vector<std::string> pattern_tools(const Workflow& p)
{
    const Node root = canonical(p.root);
    std::vector<std::string> tools;
    for (const auto& c : root.children) {
        if (!c.is_task()) {
            throw PreconditionViolation("subflow pattern '" + p.id + "' must be a flat run of tasks");
        }
        tools.push_back(c.task.tool_id);
    }
    if (tools.size() < 2 || tools.size() > 5) {
        throw PreconditionViolation("subflow pattern '" + p.id + "' must have 2..5 tasks");
    }
    return tools;
}

void scan(const Node& block, Path& path, const std::vector<std::vector<std::string>>& patterns, std::vector<SubflowMatch>& out)
{
    const auto& items = block.children;
    for (std::size_t pi = 0; pi < patterns.size(); ++pi) {
        const auto& pat = patterns[pi];
        if (pat.size() > items.size()) {
            continue;
        }
        for (std::size_t start = 0; start + pat.size() <= items.size(); ++start) {
            bool hit = true;
            for (std::size_t k = 0; k < pat.size() && hit; ++k) {
                const Node& n = items[start + k];
                hit = n.is_task() && n.task.tool_id == pat[k];
            }
            if (hit) {
                Path at = path;
                at.push_back(start);
                out.push_back({ pi, std::move(at) });
            }
        }
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Node& n = items[i];
        if (n.is_task()) {
            continue;
        }
        path.push_back(i);
        for (std::size_t k = 0; k < n.children.size(); ++k) {
            path.push_back(k);
            scan(n.children[k], path, patterns, out);
            path.pop_back();
        }
        path.pop_back();
    }
}

} // namespace

std::vector<SubflowMatch> find_subflows(const Workflow& w, const std::vector<Workflow>& library)
{
    std::vector<std::vector<std::string>> patterns;
    patterns.reserve(library.size());
    for (const auto& p : library) {
        patterns.push_back(pattern_tools(p));
    }
    std::vector<SubflowMatch> out;
    if (patterns.empty()) {
        return out;
    }
    const Workflow flat = flatten(w);
    Path path;
    scan(flat.root, path, patterns, out);
    std::sort(out.begin(), out.end(), [](const SubflowMatch& a, const SubflowMatch& b) {
        if (a.pattern_index != b.pattern_index) {
            return a.pattern_index < b.pattern_index;
        }
        return path_less(a.path, b.path);
    });
    return out;
}

} // namespace agentnet
