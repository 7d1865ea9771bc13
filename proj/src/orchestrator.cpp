#include "agentnet/orchestrator.hpp"

#include <algorithm>

#include "agentnet/errors.hpp"
#include "agentnet/repair.hpp"
#include "agentnet/workflow_json.hpp"

namespace agentnet {

using nlohmann::json;

const char* to_string(VerifyMode m)
{
    return m == VerifyMode::Oracle ? "oracle" : "goal_anchored";
}

const char* to_string(HypothesisKind k)
{
    switch (k) {
    case HypothesisKind::MissingStep:
        return "missing_step";
    case HypothesisKind::WrongOrder:
        return "wrong_order";
    case HypothesisKind::MissingBranch:
        return "missing_branch";
    case HypothesisKind::OverAbstraction:
        return "over_abstraction";
    }
    return "?";
}

const char* to_string(RepairOp op)
{
    switch (op) {
    case RepairOp::Insert:
        return "insert";
    case RepairOp::Branch:
        return "branch";
    case RepairOp::Nest:
        return "nest";
    case RepairOp::Reorder:
        return "reorder";
    }
    return "?";
}

DecomposeOptions decompose_options(const SolveConfig& config)
{
    return { config.theta, config.max_depth, config.split_allowed(), config.scale_control };
}

namespace {

const AtomicAgent& agent_ref(const AgentNetwork& net, AgentId id)
{
    const AtomicAgent* a = net.find(id);
    if (!a) {
        throw InternalError("unknown agent " + agent_label(id));
    }
    return *a;
}

double weight_life(const AtomicAgent& a, bool use_life)
{
    return use_life ? a.life : 1.0;
}

DecompositionTree decompose_at(const AgentNetwork& net, const Goal& g, const DecomposeOptions& opt, Rng& rng, std::size_t depth)
{
    DecompositionTree tree;
    tree.goal = g;
    tree.depth_bound = opt.max_depth;

    const auto hits = retrieve(net, g, opt.theta);
    if (!hits.empty()) {
        std::vector<WeightedCandidate> cands;
        const Transition t { g, g.input_schema, {} };
        for (const auto& h : hits) {
            const auto& a = agent_ref(net, h.id);
            cands.push_back({ a.id, weight_life(a, opt.use_life), compatibility(net, a, t) });
        }
        try {
            tree.agent = cands[select(cands, rng)].id;
            return tree;
        } catch (const NoEligibleAgent&) {
            // every retrieved agent is gated out; fall through to splitting
        }
    }
    if (!opt.allow_split) {
        throw DecompositionFailure("no agent resolves goal '" + g.id + "' and splitting is disabled");
    }
    if (depth + 1 > opt.max_depth) {
        throw DecompositionFailure("depth budget exhausted at goal '" + g.id + "'");
    }

    // Greedy set cover over agents whose goal lies inside g.
    std::vector<const AtomicAgent*> pool;
    for (std::size_t i : net.token_candidates(g.tokens)) {
        const auto& a = net.active()[i];
        if (a.goal.tokens.size() < g.tokens.size()
            && std::includes(g.tokens.begin(), g.tokens.end(), a.goal.tokens.begin(), a.goal.tokens.end())) {
            pool.push_back(&a);
        }
    }
    TokenSet uncovered = g.tokens;
    std::vector<const AtomicAgent*> cover;
    while (!uncovered.empty()) {
        const AtomicAgent* best = nullptr;
        std::size_t best_gain = 0;
        for (const auto* a : pool) {
            std::size_t gain = 0;
            for (const auto& t : a->goal.tokens) {
                gain += uncovered.contains(t);
            }
            if (gain > best_gain || (gain == best_gain && gain > 0 && a->id < best->id)) {
                best = a;
                best_gain = gain;
            }
        }
        if (!best) {
            throw DecompositionFailure("no cover for goal '" + g.id + "'");
        }
        for (const auto& t : best->goal.tokens) {
            uncovered.erase(t);
        }
        cover.push_back(best);
    }

    // Order the subgoals by competing for each transition in turn.
    FieldSet available = g.input_schema;
    std::vector<const AtomicAgent*> remaining = cover;
    while (!remaining.empty()) {
        std::vector<WeightedCandidate> cands;
        std::vector<std::size_t> slot;
        for (std::size_t r = 0; r < remaining.size(); ++r) {
            const Goal& sub = remaining[r]->goal;
            const Transition t { sub, available, {} };
            for (const auto& h : retrieve(net, sub, opt.theta)) {
                const auto& a = agent_ref(net, h.id);
                cands.push_back({ a.id, weight_life(a, opt.use_life), compatibility(net, a, t) });
                slot.push_back(r);
            }
        }
        DecompositionTree child;
        child.depth_bound = opt.max_depth;
        std::size_t taken = 0;
        try {
            const std::size_t pick = select(cands, rng);
            taken = slot[pick];
            child.goal = remaining[taken]->goal;
            child.agent = cands[pick].id;
        } catch (const NoEligibleAgent&) {
            child.goal = remaining[0]->goal;
            child.agent = remaining[0]->id;
        }
        const auto& chosen = agent_ref(net, *child.agent);
        const FieldSet produced = bound_fields(chosen.procedure);
        available.insert(produced.begin(), produced.end());
        tree.children.push_back(std::move(child));
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(taken));
    }
    return tree;
}

Composed compose_at(const AgentNetwork& net, const DecompositionTree& tree, bool is_root)
{
    Composed out;
    if (tree.resolved()) {
        const auto& a = agent_ref(net, *tree.agent);
        out.workflow = a.procedure;
        out.workflow.root = canonical(a.procedure.root);
        out.root_owner.assign(out.workflow.root.children.size(), a.id);
        out.agents.push_back(a.id);
        return out;
    }
    for (const auto& c : tree.children) {
        Composed part = compose_at(net, c, false);
        out.workflow = concat(out.workflow, part.workflow);
        out.root_owner.insert(out.root_owner.end(), part.root_owner.begin(), part.root_owner.end());
        out.agents.insert(out.agents.end(), part.agents.begin(), part.agents.end());
    }
    if (!is_root && tree.sub_workflow && !out.agents.empty()) {
        out.workflow.root = Node::make_seq({ Node::make_nest(tree.goal.id, canonical(out.workflow.root)) });
        out.root_owner.assign(1, out.agents.front());
    }
    return out;
}

void scan_unbound(const Node& n, FieldSet& scope, FieldSet& unbound)
{
    switch (n.kind) {
    case NodeKind::Task:
        for (const auto& f : n.task.inputs) {
            if (!scope.contains(f)) {
                unbound.insert(f);
            }
        }
        scope.insert(n.task.outputs.begin(), n.task.outputs.end());
        break;
    case NodeKind::Sequence:
    case NodeKind::Nest:
        for (const auto& c : n.children) {
            scan_unbound(c, scope, unbound);
        }
        break;
    case NodeKind::Branch: {
        std::vector<FieldSet> arms;
        for (const auto& c : n.children) {
            arms.push_back(scope);
            scan_unbound(c, arms.back(), unbound);
        }
        if (arms.size() == 1) {
            arms.push_back(scope);
        }
        for (const auto& f : arms[0]) {
            if (arms[1].contains(f)) {
                scope.insert(f);
            }
        }
        break;
    }
    }
}

bool is_novel(const AgentNetwork& net, const Goal& g)
{
    return std::none_of(net.training().begin(), net.training().end(), [&](const TrainingPair& p) { return p.goal.tokens == g.tokens; });
}

} // namespace

DecompositionTree decompose(const AgentNetwork& net, const Goal& g, const DecomposeOptions& options, Rng& rng)
{
    if (options.max_depth < 1) {
        throw PreconditionViolation("max_depth must be at least 1");
    }
    if (g.tokens.empty()) {
        throw EmptyGoal("goal '" + g.id + "' has no tokens");
    }
    return decompose_at(net, g, options, rng, 0);
}

Composed compose_traced(const AgentNetwork& net, const DecompositionTree& tree)
{
    Composed c = compose_at(net, tree, true);
    c.workflow.id = "cand-" + tree.goal.id;
    c.workflow.goal_id = tree.goal.id;
    c.workflow.declared_inputs = tree.goal.input_schema;
    c.workflow.declared_outputs = tree.goal.output_schema;
    c.workflow.root = canonical(c.workflow.root);
    return c;
}

Workflow compose(const AgentNetwork& net, const DecompositionTree& tree)
{
    return compose_traced(net, tree).workflow;
}

Verdict verify(const Workflow& candidate, const Target& target, VerifyMode mode, double eta, bool check_inputs, bool check_outputs)
{
    Verdict v;
    v.mode = mode;
    v.dead_node_ratio = check_outputs ? dead_node_ratio(candidate.root, target.goal.output_schema) : 0.0;
    if (mode == VerifyMode::Oracle) {
        if (!target.expected) {
            throw MissingOracle("oracle verification of goal '" + target.goal.id + "' without an expected workflow");
        }
        const bool eq = structurally_equal(candidate, *target.expected);
        v.score = eq ? 1.0 : 0.0;
        v.edit_script = eq ? EditScript {} : diff(candidate, *target.expected);
        v.passed = v.score >= eta;
        return v;
    }
    FieldSet scope = target.goal.input_schema;
    scan_unbound(canonical(candidate.root), scope, v.unbound_inputs);
    const auto& required = target.goal.output_schema;
    std::size_t hit = 0;
    for (const auto& f : required) {
        if (scope.contains(f)) {
            ++hit;
        } else if (check_outputs) {
            v.missing_outputs.insert(f);
        }
    }
    v.score = (!check_outputs || required.empty()) ? 1.0 : static_cast<double>(hit) / static_cast<double>(required.size());
    if (check_inputs && !v.unbound_inputs.empty()) {
        v.score = 0.0;
    }
    if (!check_inputs) {
        v.unbound_inputs.clear();
    }
    v.passed = v.score >= eta;
    return v;
}

std::optional<std::size_t> EpisodeResult::first_correct_rank() const
{
    for (const auto& c : candidates) {
        if (c.correct) {
            return c.rank;
        }
    }
    return std::nullopt;
}

EpisodeResult plan_episode(const AgentNetwork& net, const Target& target, const SolveConfig& config)
{
    if (config.k == 0) {
        throw PreconditionViolation("k must be at least 1");
    }
    EpisodeResult ep;
    ep.goal_id = target.goal.id;
    ep.seed = config.seed;
    const auto opts = decompose_options(config);
    const std::size_t ranks = config.verification ? config.k : 1;

    Composed first_composed;
    Verdict first_initial;

    for (std::size_t r = 1; r <= ranks; ++r) {
        CandidateRecord rec;
        rec.rank = r;
        rec.seed = derive_seed(config.seed, hash_string(target.goal.id), r);
        Rng rng(rec.seed);
        Composed composed;
        try {
            composed = compose_traced(net, decompose(net, target.goal, opts, rng));
        } catch (const DecompositionFailure& e) {
            if (!config.hypothesis) {
                throw;
            }
            rec.failure = e.what();
            ep.candidates.push_back(std::move(rec));
            ++ep.steps;
            continue;
        }
        Verdict verdict;
        if (config.verification) {
            verdict = verify(composed.workflow, target, config.mode, config.eta, config.input_goal, config.output_goal);
        } else {
            // accepted unverified
            verdict.mode = config.mode;
            verdict.passed = true;
            verdict.score = 1.0;
            verdict.dead_node_ratio = config.output_goal ? dead_node_ratio(composed.workflow.root, target.goal.output_schema) : 0.0;
        }
        if (r == 1) {
            first_composed = composed;
            first_initial = verdict;
        }
        rec.workflow = composed.workflow;
        std::vector<AgentId> path_agents = composed.agents;
        if (!verdict.passed && config.repair_enabled()) {
            RepairContext ctx { net, target, config, rng };
            auto result = repair_loop(ctx, composed.workflow, verdict, config.budget);
            rec.workflow = std::move(result.candidate);
            verdict = std::move(result.verdict);
            rec.repairs = std::move(result.trace);
            rec.repair_status = to_string(result.status);
            path_agents.insert(path_agents.end(), result.agents.begin(), result.agents.end());
        }
        rec.verdict = verdict;
        rec.correct = target.expected ? structurally_equal(rec.workflow, *target.expected) : verdict.passed;
        ep.steps += 1 + rec.repairs.size();

        if (r == 1) {
            const double delta = net.config().drift_threshold;
            if (!first_initial.passed && !first_composed.root_owner.empty()) {
                std::size_t idx = first_composed.root_owner.size() - 1;
                if (first_initial.edit_script && !first_initial.edit_script->empty() && !first_initial.edit_script->front().path.empty()) {
                    idx = std::min(idx, first_initial.edit_script->front().path.front());
                }
                const FieldSet produced = all_task_outputs(first_composed.workflow.root);
                const FieldSet expected = target.expected ? all_task_outputs(target.expected->root) : target.goal.output_schema;
                Outcome blame;
                blame.P_e = true;
                blame.P_s = 1.0 - jaccard(produced, expected) > delta;
                ep.outcomes.push_back({ first_composed.root_owner[idx], blame });
            }
            if (verdict.passed) {
                const bool reuse = net.shape_solved_by_other_goal(shape_key(rec.workflow), target.goal.id);
                const bool novel = is_novel(net, target.goal);
                std::vector<AgentId> seen;
                for (AgentId id : path_agents) {
                    if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
                        continue;
                    }
                    seen.push_back(id);
                    Outcome o;
                    o.R_c = true;
                    o.R_s = reuse;
                    o.R_g = novel;
                    o.P_r = verdict.dead_node_ratio;
                    ep.outcomes.push_back({ id, o });
                }
            }
        }
        ep.candidates.push_back(std::move(rec));
    }
    return ep;
}

void commit_episode(AgentNetwork& net, const EpisodeResult& episode, const SolveConfig& config)
{
    if (config.scale_control) {
        for (const auto& o : episode.outcomes) {
            if (AtomicAgent* a = net.find_active(o.agent)) {
                update_life(*a, o.outcome, net.config());
            }
        }
    }
    if (!episode.candidates.empty() && !episode.candidates.front().failure && episode.candidates.front().verdict.passed) {
        net.record_solved_shape(shape_key(episode.candidates.front().workflow), episode.goal_id);
    }
}

EpisodeResult solve(AgentNetwork& net, const Target& target, const SolveConfig& config)
{
    net.enforce_input_schema = config.input_goal;
    EpisodeResult ep = plan_episode(net, target, config);
    commit_episode(net, ep, config);
    return ep;
}

json to_json(const Verdict& v)
{
    json j = { { "passed", v.passed }, { "score", v.score }, { "mode", to_string(v.mode) }, { "dead_node_ratio", v.dead_node_ratio } };
    if (v.edit_script) {
        j["edit_script"] = to_json(*v.edit_script);
    }
    if (v.mode == VerifyMode::GoalAnchored) {
        j["missing_outputs"] = to_json(v.missing_outputs);
        j["unbound_inputs"] = to_json(v.unbound_inputs);
    }
    return j;
}

namespace {

json outcome_json(const Outcome& o)
{
    return { { "R_c", o.R_c }, { "R_s", o.R_s }, { "R_g", o.R_g }, { "P_e", o.P_e }, { "P_s", o.P_s }, { "P_r", o.P_r } };
}

} // namespace

json to_json(const EpisodeResult& e)
{
    json cands = json::array();
    for (const auto& c : e.candidates) {
        json jc = { { "rank", c.rank }, { "seed", c.seed }, { "correct", c.correct } };
        if (c.failure) {
            jc["failure"] = *c.failure;
        } else {
            jc["workflow"] = to_json(c.workflow);
            jc["verdict"] = to_json(c.verdict);
        }
        if (!c.repair_status.empty()) {
            jc["repair_status"] = c.repair_status;
        }
        json reps = json::array();
        for (const auto& s : c.repairs) {
            reps.push_back({ { "hypothesis", to_string(s.hypothesis) }, { "action", to_string(s.op) }, { "location", to_json(s.location) },
                { "score", s.score }, { "distance", s.distance } });
        }
        jc["repairs"] = std::move(reps);
        cands.push_back(std::move(jc));
    }
    json outs = json::array();
    for (const auto& o : e.outcomes) {
        outs.push_back({ { "agent", agent_label(o.agent) }, { "outcome", outcome_json(o.outcome) } });
    }
    json j = { { "goal_id", e.goal_id }, { "seed", e.seed }, { "steps", e.steps }, { "candidates", std::move(cands) }, { "outcomes", std::move(outs) } };
    if (e.failure) {
        j["failure"] = *e.failure;
    }
    return j;
}

} // namespace agentnet
