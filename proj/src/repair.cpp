#include "agentnet/repair.hpp"

#include <algorithm>

#include "agentnet/errors.hpp"

namespace agentnet {

RepairOp repair_op_for(HypothesisKind k)
{
    switch (k) {
    case HypothesisKind::MissingStep:
        return RepairOp::Insert;
    case HypothesisKind::WrongOrder:
        return RepairOp::Reorder;
    case HypothesisKind::MissingBranch:
        return RepairOp::Branch;
    case HypothesisKind::OverAbstraction:
        return RepairOp::Nest;
    }
    return RepairOp::Insert;
}

const char* to_string(RepairStatus s)
{
    switch (s) {
    case RepairStatus::Passed:
        return "passed";
    case RepairStatus::Stalled:
        return "stalled";
    case RepairStatus::BudgetExhausted:
        return "budget_exhausted";
    }
    return "?";
}

namespace {

// True when the parent block of `path` is an arm of a Branch.
bool inside_branch_arm(const Node& root, const Path& path)
{
    if (path.size() < 2) {
        return false;
    }
    const Path owner(path.begin(), path.end() - 2);
    return node_at(root, owner).is_branch();
}

HypothesisKind kind_for_fragment(const Node& root, const Path& path, const Node& fragment)
{
    if (fragment.is_nest()) {
        return HypothesisKind::OverAbstraction;
    }
    if (fragment.is_branch() || inside_branch_arm(root, path)) {
        return HypothesisKind::MissingBranch;
    }
    return HypothesisKind::MissingStep;
}

FailureHypothesis fragment_hypothesis(const Node& root, const Path& path, const Node& fragment, std::size_t span, const Target& target)
{
    FailureHypothesis h;
    h.kind = kind_for_fragment(root, path, fragment);
    h.location = path;
    h.evidence = fragment;
    h.span = span;
    h.needed_fields = all_task_outputs(fragment);
    if (fragment.is_nest() && fragment.sub_goal == target.goal.id) {
        h.needed_goal = target.goal;
    }
    return h;
}

Path sibling(const Path& p, std::size_t offset)
{
    Path q = p;
    q.back() += offset;
    return q;
}

double life_weight(const AtomicAgent& a, const SolveConfig& config)
{
    return config.scale_control ? a.life : 1.0;
}

AgentId pick(RepairContext& ctx, const std::vector<const AtomicAgent*>& agents)
{
    std::vector<WeightedCandidate> cands;
    for (const auto* a : agents) {
        cands.push_back({ a->id, life_weight(*a, ctx.config), 1.0 });
    }
    return cands[select(cands, ctx.rng)].id;
}

Node realize(RepairContext& ctx, const Node& fragment, std::vector<AgentId>& used);

// An agent whose whole procedure equals `block`, if any.
std::optional<Node> realize_by_shape(RepairContext& ctx, const Node& block, std::vector<AgentId>& used)
{
    const auto idx = ctx.net.shape_candidates(block);
    if (idx.empty()) {
        return std::nullopt;
    }
    std::vector<const AtomicAgent*> agents;
    for (std::size_t i : idx) {
        agents.push_back(&ctx.net.active()[i]);
    }
    const AgentId id = pick(ctx, agents);
    used.push_back(id);
    return canonical(ctx.net.find(id)->procedure.root);
}

Node realize_block(RepairContext& ctx, const Node& block, std::vector<AgentId>& used)
{
    if (auto whole = realize_by_shape(ctx, block, used)) {
        return *whole;
    }
    Node out = Node::make_seq();
    for (const auto& item : block.children) {
        out.children.push_back(realize(ctx, item, used));
    }
    return out;
}

Node realize(RepairContext& ctx, const Node& fragment, std::vector<AgentId>& used)
{
    if (auto whole = realize_by_shape(ctx, canonical(Node::make_seq({ fragment })), used)) {
        if (whole->children.size() == 1) {
            return whole->children.front();
        }
    }
    switch (fragment.kind) {
    case NodeKind::Nest:
        return Node::make_nest(fragment.sub_goal, realize_block(ctx, fragment.children.front(), used));
    case NodeKind::Branch: {
        std::optional<Node> alt;
        if (fragment.has_else()) {
            alt = realize_block(ctx, fragment.children[1], used);
        }
        return Node::make_branch(fragment.cond, realize_block(ctx, fragment.children.front(), used), std::move(alt));
    }
    case NodeKind::Sequence:
        return realize_block(ctx, fragment, used);
    case NodeKind::Task:
        break;
    }
    std::vector<const AtomicAgent*> holders;
    for (const auto& a : ctx.net.active()) {
        for (const auto* t : tasks_in_order(a.procedure.root)) {
            if (*t == fragment.task) {
                holders.push_back(&a);
                break;
            }
        }
    }
    if (holders.empty()) {
        throw NoEligibleAgent("no agent performs tool '" + fragment.task.tool_id + "'");
    }
    used.push_back(pick(ctx, holders));
    return fragment;
}

// Realizes an OverAbstraction that wraps the target goal itself.
Node realize_goal_nest(RepairContext& ctx, const Goal& needed, std::vector<AgentId>& used)
{
    auto opts = decompose_options(ctx.config);
    opts.allow_split = true;
    const Composed body = compose_traced(ctx.net, decompose(ctx.net, needed, opts, ctx.rng));
    used.insert(used.end(), body.agents.begin(), body.agents.end());
    return Node::make_nest(needed.id, body.workflow.root);
}

// Goal-anchored insertion: an agent producing the needed field, appended at the end.
Workflow append_producer(RepairContext& ctx, const Workflow& candidate, const FailureHypothesis& h, std::vector<AgentId>& used)
{
    const FieldSet scope = bound_fields(candidate);
    std::vector<WeightedCandidate> cands;
    for (const auto& a : ctx.net.active()) {
        const bool produces = std::all_of(h.needed_fields.begin(), h.needed_fields.end(),
            [&](const std::string& f) { return a.provided_outputs.contains(f); });
        if (!produces) {
            continue;
        }
        const bool gate = !ctx.config.input_goal || std::includes(scope.begin(), scope.end(), a.required_inputs.begin(), a.required_inputs.end());
        if (!gate) {
            continue;
        }
        const double prior = static_cast<double>(a.stats.successes) / static_cast<double>(std::max<std::uint64_t>(1, a.stats.successes + a.stats.failures));
        cands.push_back({ a.id, life_weight(a, ctx.config), ctx.net.weights.familiarity + ctx.net.weights.prior * prior });
    }
    if (cands.empty()) {
        throw NoEligibleAgent("no compatible agent produces the needed fields");
    }
    const AgentId id = cands[select(cands, ctx.rng)].id;
    used.push_back(id);
    Workflow r = concat(candidate, ctx.net.find(id)->procedure);
    r.declared_outputs = candidate.declared_outputs;
    return r;
}

} // namespace

std::vector<FailureHypothesis> diagnose(const Verdict& verdict, const Workflow& candidate, const Target& target)
{
    if (verdict.passed) {
        throw NotAFailure("diagnose called on a passing verdict");
    }
    std::vector<FailureHypothesis> out;
    if (verdict.mode == VerifyMode::GoalAnchored) {
        const Node root = canonical(candidate.root);
        for (const auto& f : verdict.missing_outputs) {
            FailureHypothesis h;
            h.kind = HypothesisKind::MissingStep;
            h.location = { root.children.size() };
            h.needed_fields = { f };
            out.push_back(std::move(h));
        }
        return out;
    }

    const EditScript script = verdict.edit_script ? *verdict.edit_script
                                                  : (target.expected ? diff(candidate, *target.expected) : EditScript {});
    // Track the tree as the script rewrites it so every edit is read in its own frame.
    Node cur = canonical(candidate.root);
    for (std::size_t i = 0; i < script.size(); ++i) {
        const Edit& e = script[i];
        switch (e.kind) {
        case EditKind::InsertNode:
            out.push_back(fragment_hypothesis(cur, e.path, *e.node, 0, target));
            break;
        case EditKind::ReorderChildren: {
            FailureHypothesis h;
            h.kind = HypothesisKind::WrongOrder;
            h.location = e.path;
            h.permutation = e.permutation;
            out.push_back(std::move(h));
            break;
        }
        case EditKind::ReplaceSubtree: {
            std::size_t span = 1;
            EditScript group { e };
            while (i + 1 < script.size() && script[i + 1].kind == EditKind::DeleteNode && script[i + 1].path == sibling(e.path, 1)) {
                group.push_back(script[++i]);
                ++span;
            }
            out.push_back(fragment_hypothesis(cur, e.path, *e.node, span, target));
            cur = agentnet::apply(group, cur);
            continue;
        }
        case EditKind::DeleteNode:
            // surplus nodes carry no hypothesis
            break;
        }
        cur = agentnet::apply(EditScript { e }, cur);
    }
    std::stable_sort(out.begin(), out.end(), [](const FailureHypothesis& a, const FailureHypothesis& b) { return path_less(a.location, b.location); });
    return out;
}

Workflow apply(const Workflow& candidate, const FailureHypothesis& h, RepairContext& ctx, std::vector<AgentId>* used_agents)
{
    std::vector<AgentId> used;
    Workflow w = canonical(candidate);
    if (h.kind == HypothesisKind::WrongOrder) {
        w = agentnet::apply(EditScript { { EditKind::ReorderChildren, h.location, std::nullopt, h.permutation } }, w);
    } else if (!h.evidence) {
        if (h.needed_fields.empty()) {
            throw PreconditionViolation("hypothesis carries neither evidence nor needed fields");
        }
        w = append_producer(ctx, w, h, used);
    } else {
        const Node fragment = h.needed_goal ? realize_goal_nest(ctx, *h.needed_goal, used) : realize(ctx, *h.evidence, used);
        EditScript script;
        if (h.span == 0) {
            script.push_back({ EditKind::InsertNode, h.location, fragment, {} });
        } else {
            script.push_back({ EditKind::ReplaceSubtree, h.location, fragment, {} });
            for (std::size_t k = 1; k < h.span; ++k) {
                script.push_back({ EditKind::DeleteNode, sibling(h.location, 1), std::nullopt, {} });
            }
        }
        w = agentnet::apply(script, w);
    }
    if (validate(w).violations.size() > validate(candidate).violations.size()) {
        throw RejectedRepair("repair at " + path_string(h.location) + " adds validation violations");
    }
    if (used_agents) {
        used_agents->insert(used_agents->end(), used.begin(), used.end());
    }
    return w;
}

std::size_t repair_distance(const Verdict& v)
{
    if (v.mode == VerifyMode::Oracle) {
        return v.edit_script ? v.edit_script->size() : 0;
    }
    return v.missing_outputs.size() + v.unbound_inputs.size();
}

RepairResult repair_loop(RepairContext& ctx, const Workflow& candidate, const Verdict& verdict, std::size_t budget)
{
    if (budget == 0) {
        throw PreconditionViolation("repair budget must be at least 1");
    }
    RepairResult res;
    res.candidate = candidate;
    res.verdict = verdict;
    for (std::size_t iter = 0; iter < budget; ++iter) {
        if (res.verdict.passed) {
            res.status = RepairStatus::Passed;
            return res;
        }
        const std::size_t before = repair_distance(res.verdict);
        bool progressed = false;
        for (const auto& h : diagnose(res.verdict, res.candidate, ctx.target)) {
            std::vector<AgentId> used;
            Workflow next;
            try {
                next = apply(res.candidate, h, ctx, &used);
            } catch (const NoEligibleAgent&) {
                continue;
            } catch (const RejectedRepair&) {
                continue;
            } catch (const BadPath&) {
                continue;
            } catch (const DecompositionFailure&) {
                continue;
            }
            Verdict v = verify(next, ctx.target, ctx.config.mode, ctx.config.eta, ctx.config.input_goal, ctx.config.output_goal);
            const std::size_t after = repair_distance(v);
            if (!v.passed && after >= before) {
                continue;
            }
            res.trace.push_back({ h.kind, repair_op_for(h.kind), h.location, v.score, after, next });
            res.agents.insert(res.agents.end(), used.begin(), used.end());
            res.candidate = std::move(next);
            res.verdict = std::move(v);
            progressed = true;
            break;
        }
        if (!progressed) {
            res.status = RepairStatus::Stalled;
            return res;
        }
    }
    res.status = res.verdict.passed ? RepairStatus::Passed : RepairStatus::BudgetExhausted;
    return res;
}

} // namespace agentnet
