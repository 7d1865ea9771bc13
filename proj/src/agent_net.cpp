#include "agentnet/agent_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "agentnet/errors.hpp"
#include "agentnet/workflow_json.hpp"

namespace agentnet {

using nlohmann::json;

double AtomicAgent::success_ratio() const
{
    const auto total = stats.successes + stats.failures;
    return static_cast<double>(stats.successes) / static_cast<double>(std::max<std::uint64_t>(1, total));
}

void LifeConfig::check() const
{
    if (!(L_max > 0.0) || !(L_init > 0.0) || L_init > L_max) {
        throw ConfigError("life config needs 0 < L_init <= L_max");
    }
    for (double a : alphas) {
        if (a < 0.0) {
            throw ConfigError("alphas must be non-negative");
        }
    }
    for (double b : betas) {
        if (b < 0.0) {
            throw ConfigError("betas must be non-negative");
        }
    }
    if (refresh_period < 1) {
        throw ConfigError("refresh period must be at least 1");
    }
}

std::string agent_label(AgentId id)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "A%06u", id.value);
    return buf;
}

AgentNetwork::AgentNetwork(LifeConfig config, SimilarityBackend backend, std::uint64_t rng_seed)
    : config_(config)
    , backend_(std::move(backend))
    , rng_seed_(rng_seed)
{
    config_.check();
}

const AtomicAgent* AgentNetwork::find(AgentId id) const
{
    for (const auto* pool : { &active_, &archive_ }) {
        for (const auto& a : *pool) {
            if (a.id == id) {
                return &a;
            }
        }
    }
    return nullptr;
}

AtomicAgent* AgentNetwork::find_active(AgentId id)
{
    // ids are assigned in increasing order but archive/revive reshuffles
    for (auto& a : active_) {
        if (a.id == id) {
            return &a;
        }
    }
    return nullptr;
}

AgentId AgentNetwork::add_agent(Goal goal, Workflow procedure)
{
    const auto report = validate(procedure);
    if (!report.ok) {
        throw InvalidWorkflow("procedure for goal '" + goal.id + "' is invalid: " + report.violations.front());
    }
    if (goal.tokens.empty()) {
        throw EmptyGoal("goal '" + goal.id + "' has no tokens");
    }
    AtomicAgent a;
    a.id = AgentId { next_id_++ };
    goal.subgoal_template.reset();
    a.goal = std::move(goal);
    for (const auto* t : tasks_in_order(procedure.root)) {
        a.toolset.insert(t->tool_id);
    }
    a.required_inputs = procedure.declared_inputs;
    a.provided_outputs = procedure.declared_outputs;
    a.procedure = std::move(procedure);
    a.life = config_.L_init;
    active_.push_back(std::move(a));
    index_agent(active_.size() - 1);
    return active_.back().id;
}

void AgentNetwork::add_training(Goal goal, Workflow procedure)
{
    goal.subgoal_template.reset();
    training_.push_back({ std::move(goal), std::move(procedure) });
}

void AgentNetwork::index_agent(std::size_t i)
{
    const auto& a = active_[i];
    for (const auto& t : a.goal.tokens) {
        token_index_[t].push_back(i);
    }
    auto key = shape_keys_.find(a.id.value);
    if (key == shape_keys_.end()) {
        key = shape_keys_.emplace(a.id.value, to_json(canonical(a.procedure.root)).dump()).first;
    }
    shape_index_[key->second].push_back(i);
}

void AgentNetwork::reindex()
{
    token_index_.clear();
    shape_index_.clear();
    for (std::size_t i = 0; i < active_.size(); ++i) {
        index_agent(i);
    }
}

std::vector<std::size_t> AgentNetwork::token_candidates(const TokenSet& tokens) const
{
    std::vector<std::size_t> out;
    for (const auto& t : tokens) {
        if (auto it = token_index_.find(t); it != token_index_.end()) {
            out.insert(out.end(), it->second.begin(), it->second.end());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::size_t> AgentNetwork::shape_candidates(const Node& block) const
{
    if (auto it = shape_index_.find(to_json(canonical(block)).dump()); it != shape_index_.end()) {
        return it->second;
    }
    return {};
}

bool AgentNetwork::shape_solved_by_other_goal(const std::string& shape, const std::string& goal_id) const
{
    auto it = solved_shapes_.find(shape);
    if (it == solved_shapes_.end()) {
        return false;
    }
    return std::any_of(it->second.begin(), it->second.end(), [&](const std::string& g) { return g != goal_id; });
}

void AgentNetwork::record_solved_shape(const std::string& shape, const std::string& goal_id)
{
    solved_shapes_[shape].insert(goal_id);
}

void AgentNetwork::move_to_archive(std::size_t active_index)
{
    archive_.push_back(std::move(active_.at(active_index)));
    active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(active_index));
    reindex();
}

void AgentNetwork::revive(std::size_t archive_index)
{
    AtomicAgent a = std::move(archive_.at(archive_index));
    archive_.erase(archive_.begin() + static_cast<std::ptrdiff_t>(archive_index));
    a.life = config_.L_init;
    active_.push_back(std::move(a));
    reindex();
}

namespace {

json agent_record(const AtomicAgent& a)
{
    return { { "id", a.id.value }, { "goal_id", a.goal.id }, { "life", a.life },
        { "stats", { { "successes", a.stats.successes }, { "failures", a.stats.failures }, { "reuses", a.stats.reuses }, { "generalizations", a.stats.generalizations } } } };
}

} // namespace

json AgentNetwork::snapshot() const
{
    json active = json::array();
    for (const auto& a : active_) {
        active.push_back(agent_record(a));
    }
    json archive = json::array();
    for (const auto& a : archive_) {
        archive.push_back(agent_record(a));
    }
    json shapes = json::object();
    for (const auto& [k, goals] : solved_shapes_) {
        shapes[k] = goals;
    }
    return { { "epoch", epoch_ }, { "rng_seed", rng_seed_ }, { "next_id", next_id_ }, { "active", active }, { "archive", archive }, { "solved_shapes", shapes } };
}

void AgentNetwork::restore(const json& snap)
{
    try {
        std::map<std::string, const TrainingPair*> by_goal;
        for (const auto& p : training_) {
            by_goal[p.goal.id] = &p;
        }
        auto load = [&](const json& rec) {
            const auto gid = rec.at("goal_id").get<std::string>();
            auto it = by_goal.find(gid);
            if (it == by_goal.end()) {
                throw IoError("snapshot references unknown goal '" + gid + "'");
            }
            AtomicAgent a;
            a.id = AgentId { rec.at("id").get<std::uint32_t>() };
            a.goal = it->second->goal;
            a.procedure = it->second->procedure;
            for (const auto* t : tasks_in_order(a.procedure.root)) {
                a.toolset.insert(t->tool_id);
            }
            a.required_inputs = a.procedure.declared_inputs;
            a.provided_outputs = a.procedure.declared_outputs;
            a.life = rec.at("life").get<double>();
            const auto& s = rec.at("stats");
            a.stats = { s.at("successes").get<std::uint64_t>(), s.at("failures").get<std::uint64_t>(), s.at("reuses").get<std::uint64_t>(), s.at("generalizations").get<std::uint64_t>() };
            return a;
        };
        std::vector<AtomicAgent> active;
        std::vector<AtomicAgent> archive;
        for (const auto& rec : snap.at("active")) {
            active.push_back(load(rec));
        }
        for (const auto& rec : snap.at("archive")) {
            archive.push_back(load(rec));
        }
        std::map<std::string, std::set<std::string>> shapes;
        if (snap.contains("solved_shapes")) {
            for (const auto& [k, v] : snap.at("solved_shapes").items()) {
                shapes[k] = v.get<std::set<std::string>>();
            }
        }
        epoch_ = snap.at("epoch").get<std::uint64_t>();
        rng_seed_ = snap.at("rng_seed").get<std::uint64_t>();
        next_id_ = snap.at("next_id").get<std::uint32_t>();
        active_ = std::move(active);
        archive_ = std::move(archive);
        solved_shapes_ = std::move(shapes);
        shape_keys_.clear();
        reindex();
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed network snapshot: ") + e.what());
    }
}

AgentNetwork build_agents(const std::vector<TrainingPair>& dataset, const LifeConfig& config, const SimilarityBackend& backend, std::uint64_t rng_seed)
{
    AgentNetwork net(config, backend, rng_seed);
    std::set<std::string> seen;
    for (const auto& pair : dataset) {
        if (!seen.insert(pair.goal.id).second) {
            throw DuplicateGoal("duplicate goal id '" + pair.goal.id + "'");
        }
        net.add_agent(pair.goal, pair.procedure);
        net.add_training(pair.goal, pair.procedure);
    }
    return net;
}

std::vector<ScoredAgent> retrieve(const AgentNetwork& net, const Goal& g, double theta)
{
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw PreconditionViolation("retrieval threshold must lie in [0, 1]");
    }
    std::vector<ScoredAgent> out;
    // a score above theta >= 0 needs a shared token
    for (std::size_t i : net.token_candidates(g.tokens)) {
        const auto& a = net.active()[i];
        const double s = similarity(net.backend(), a.goal, g);
        if (s > theta) {
            out.push_back({ a.id, s });
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredAgent& x, const ScoredAgent& y) {
        if (x.score != y.score) {
            return x.score > y.score;
        }
        return x.id < y.id;
    });
    return out;
}

double compatibility(const AgentNetwork& net, const AtomicAgent& agent, const Transition& t)
{
    const bool gate = !net.enforce_input_schema || schema_compat(t.available_inputs, agent.goal);
    if (!gate) {
        return 0.0;
    }
    const double familiarity = similarity(net.backend(), agent.goal, t.subgoal);
    const auto total = agent.stats.successes + agent.stats.failures;
    const double prior = static_cast<double>(agent.stats.successes) / static_cast<double>(std::max<std::uint64_t>(1, total));
    return net.weights.familiarity * familiarity + net.weights.prior * prior;
}

std::vector<double> selection_probabilities(std::span<const WeightedCandidate> candidates)
{
    std::vector<double> w;
    w.reserve(candidates.size());
    double total = 0.0;
    for (const auto& c : candidates) {
        const double x = std::max(0.0, c.life) * std::max(0.0, c.gamma);
        w.push_back(x);
        total += x;
    }
    if (!(total > 0.0)) {
        throw NoEligibleAgent("no candidate has positive life * compatibility");
    }
    for (auto& x : w) {
        x /= total;
    }
    return w;
}

std::size_t select(std::span<const WeightedCandidate> candidates, Rng& rng)
{
    double total = 0.0;
    for (const auto& c : candidates) {
        total += std::max(0.0, c.life) * std::max(0.0, c.gamma);
    }
    if (!(total > 0.0)) {
        throw NoEligibleAgent("no candidate has positive life * compatibility");
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double w = std::max(0.0, candidates[i].life) * std::max(0.0, candidates[i].gamma);
        if (w <= 0.0) {
            continue;
        }
        last_positive = i;
        cum += w;
        if (u < cum) {
            return i;
        }
    }
    return last_positive;
}

double life_delta(const Outcome& o, const LifeConfig& config)
{
    const double gain = config.alphas[0] * o.R_c + config.alphas[1] * o.R_s + config.alphas[2] * o.R_g;
    const double loss = config.betas[0] * o.P_e + config.betas[1] * o.P_s + config.betas[2] * std::clamp(o.P_r, 0.0, 1.0);
    return gain - loss;
}

void record_stats(AtomicAgent& agent, const Outcome& o)
{
    agent.stats.successes += o.R_c;
    agent.stats.failures += o.P_e;
    agent.stats.reuses += o.R_s;
    agent.stats.generalizations += o.R_g;
}

double update_life(AtomicAgent& agent, const Outcome& o, const LifeConfig& config)
{
    if (o.R_c && o.P_e) {
        throw PreconditionViolation("an outcome cannot both reward and penalize execution");
    }
    agent.life = std::clamp(agent.life + life_delta(o, config), 0.0, config.L_max);
    record_stats(agent, o);
    return agent.life;
}

ChangeLog eliminate_and_refresh(AgentNetwork& net)
{
    ChangeLog log;
    for (std::size_t i = net.active().size(); i-- > 0;) {
        if (net.active()[i].life <= 0.0) {
            log.push_back({ ChangeLogEntry::Kind::Archived, net.active()[i].id, net.active()[i].goal.id });
            net.move_to_archive(i);
        }
    }
    // archived in active order
    std::reverse(log.begin(), log.end());

    if (net.epoch() % net.config().refresh_period == 0) {
        // similarity 1.0 means an identical token set
        std::set<TokenSet> covered;
        for (const auto& a : net.active()) {
            covered.insert(a.goal.tokens);
        }
        for (const auto& pair : net.training()) {
            if (covered.contains(pair.goal.tokens)) {
                continue;
            }
            std::optional<std::size_t> best;
            for (std::size_t i = 0; i < net.archive().size(); ++i) {
                const auto& a = net.archive()[i];
                if (a.goal.tokens != pair.goal.tokens) {
                    continue;
                }
                if (!best) {
                    best = i;
                    continue;
                }
                const auto& b = net.archive()[*best];
                if (a.success_ratio() > b.success_ratio() || (a.success_ratio() == b.success_ratio() && a.id < b.id)) {
                    best = i;
                }
            }
            if (best) {
                const auto& a = net.archive()[*best];
                log.push_back({ ChangeLogEntry::Kind::Revived, a.id, a.goal.id });
                net.revive(*best);
            } else {
                const AgentId id = net.add_agent(pair.goal, pair.procedure);
                log.push_back({ ChangeLogEntry::Kind::Spawned, id, pair.goal.id });
            }
            covered.insert(pair.goal.tokens);
        }
    }
    net.advance_epoch();
    return log;
}

} // namespace agentnet
