#pragma once

// A hand-built network of chainable atomic agents:
//   pa: {} -> fa,  pb: fa -> fb,  pc: fb -> fc,  pd: {} -> fd
// plus goals composed from them.

#include "agentnet/agent_net.hpp"
#include "agentnet/orchestrator.hpp"

#include "support.hpp"

namespace testing {

inline agentnet::Goal make_goal(const std::string& id, agentnet::TokenSet tokens, agentnet::FieldSet in = {}, agentnet::FieldSet out = {})
{
    agentnet::Goal g;
    g.id = id;
    g.tokens = std::move(tokens);
    g.input_schema = std::move(in);
    g.output_schema = std::move(out);
    return g;
}

struct World {
    std::vector<agentnet::TrainingPair> pairs;

    World()
    {
        add("ga", { "a1", "a2" }, T("pa", {}, { "fa" }), {}, { "fa" });
        add("gb", { "b1", "b2" }, T("pb", { "fa" }, { "fb" }), { "fa" }, { "fb" });
        add("gc", { "c1", "c2" }, T("pc", { "fb" }, { "fc" }), { "fb" }, { "fc" });
        add("gd", { "d1", "d2" }, T("pd", {}, { "fd" }), {}, { "fd" });
    }

    void add(const std::string& id, agentnet::TokenSet tokens, Node task, FieldSet in, FieldSet out)
    {
        auto g = make_goal(id, std::move(tokens), in, out);
        pairs.push_back({ g, W(S({ std::move(task) }), in, out, "w" + id) });
    }

    agentnet::AgentNetwork net(agentnet::LifeConfig cfg = {}) const { return agentnet::build_agents(pairs, cfg); }

    const agentnet::TrainingPair& pair(const std::string& id) const
    {
        for (const auto& p : pairs) {
            if (p.goal.id == id) {
                return p;
            }
        }
        throw std::out_of_range(id);
    }

    // Composite of the named parts in order, with its expected flat workflow.
    agentnet::Target composite(const std::string& id, const std::vector<std::string>& parts) const
    {
        agentnet::Goal g;
        g.id = id;
        Workflow expected = W(S({}), {}, {}, "w" + id);
        for (const auto& p : parts) {
            const auto& tp = pair(p);
            g.tokens.insert(tp.goal.tokens.begin(), tp.goal.tokens.end());
            expected = agentnet::concat(expected, tp.procedure);
        }
        g.input_schema = pair(parts.front()).goal.input_schema;
        g.output_schema = expected.declared_outputs;
        expected.declared_inputs = g.input_schema;
        expected.goal_id = id;
        return { g, expected };
    }

    agentnet::Target trained(const std::string& id) const
    {
        const auto& p = pair(id);
        return { p.goal, p.procedure };
    }
};

} // namespace testing
