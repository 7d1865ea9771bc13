#include "doctest.h"

#include <cmath>
#include <numeric>

#include "agentnet/agent_net.hpp"
#include "agentnet/errors.hpp"
#include "agentnet/goal.hpp"

#include "support.hpp"

using namespace agentnet;
using namespace testing;

namespace {

Goal goal(const std::string& id, TokenSet tokens, FieldSet in = {}, FieldSet out = {})
{
    Goal g;
    g.id = id;
    g.tokens = std::move(tokens);
    g.input_schema = std::move(in);
    g.output_schema = std::move(out);
    return g;
}

// |a ∩ b| / |a ∪ b| by counting over a merged vector.
double ref_jaccard(const TokenSet& a, const TokenSet& b)
{
    std::vector<std::string> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    std::size_t both = 0;
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
        if (all[i] == all[i + 1]) {
            ++both;
        }
    }
    const std::size_t uni = all.size() - both;
    return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

double ref_life(double L, const Outcome& o, const LifeConfig& c)
{
    const double reward = c.alphas[0] * o.R_c + c.alphas[1] * o.R_s + c.alphas[2] * o.R_g;
    const double penalty = c.betas[0] * o.P_e + c.betas[1] * o.P_s + c.betas[2] * o.P_r;
    return std::min(c.L_max, std::max(0.0, L + reward - penalty));
}

TrainingPair pair(const std::string& id, TokenSet tokens, const std::string& tool)
{
    return { goal(id, std::move(tokens)), W(S({ T(tool) }), {}, {}, "w" + id) };
}

} // namespace

TEST_SUITE("goal_model")
{
    TEST_CASE("similarity examples")
    {
        const auto a = goal("a", { "query", "customer", "id" });
        const auto b = goal("b", { "query", "customer", "email" });
        const SimilarityBackend jac;
        CHECK(similarity(jac, a, a) == 1.0);
        CHECK(similarity(jac, a, goal("c", { "x", "y" })) == 0.0);
        CHECK(ref_jaccard(a.tokens, b.tokens) == doctest::Approx(0.5));
        CHECK(similarity(jac, a, b) == doctest::Approx(0.5));
        CHECK_THROWS_AS(similarity(jac, a, goal("e", {})), EmptyGoal);
    }

    TEST_CASE("jaccard matches the counting oracle and is symmetric")
    {
        Rng rng(42);
        const SimilarityBackend jac;
        for (int i = 0; i < 10000; ++i) {
            TokenSet a;
            TokenSet b;
            for (int k = 0; k < 6; ++k) {
                if (rng.bernoulli(0.5)) {
                    a.insert("t" + std::to_string(rng.below(10)));
                }
                if (rng.bernoulli(0.5)) {
                    b.insert("t" + std::to_string(rng.below(10)));
                }
            }
            a.insert("t" + std::to_string(rng.below(10)));
            b.insert("t" + std::to_string(rng.below(10)));
            const double s = similarity(jac, goal("a", a), goal("b", b));
            REQUIRE(s == doctest::Approx(ref_jaccard(a, b)));
            REQUIRE(s == similarity(jac, goal("b", b), goal("a", a)));
            REQUIRE(s >= 0.0);
            REQUIRE(s <= 1.0);
            REQUIRE((s == 1.0) == (a == b));
        }
    }

    TEST_CASE("weighted overlap honours token weights")
    {
        SimilarityBackend w { SimilarityKind::WeightedOverlap, { { "w:rare", 3.0 } } };
        const auto a = goal("a", { "rare", "common" });
        const auto b = goal("b", { "rare", "other" });
        // shared 3, union 3 + 1 + 1
        CHECK(similarity(w, a, b) == doctest::Approx(0.6));
        CHECK(similarity(w, a, a) == 1.0);
    }

    TEST_CASE("schema compatibility")
    {
        CHECK(schema_compat({}, goal("c", { "t" })));
        CHECK_FALSE(schema_compat({}, goal("c", { "t" }, { "x" })));
        CHECK(schema_compat({ "x", "y" }, goal("c", { "t" }, { "x" })));
    }

    TEST_CASE("schema compatibility agrees with the validator along a chain")
    {
        // g0 -> g1 -> g2 -> g3 with g2 needing a field nobody produces
        const std::vector<std::pair<FieldSet, FieldSet>> io { { {}, { "a" } }, { { "a" }, { "b" } }, { { "b", "z" }, { "c" } }, { { "c" }, { "d" } } };
        FieldSet produced;
        Workflow w = W(S({}));
        bool all_compat = true;
        for (std::size_t i = 0; i < io.size(); ++i) {
            const auto g = goal("g" + std::to_string(i), { "t" }, io[i].first, io[i].second);
            all_compat = all_compat && schema_compat(produced, g);
            produced.insert(io[i].second.begin(), io[i].second.end());
            w = concat(w, W(S({ T("tool" + std::to_string(i), io[i].first, io[i].second) })));
        }
        CHECK(all_compat == validate(w).ok);
        CHECK_FALSE(all_compat);
    }

    TEST_CASE("goal library round-trip strips oracle data on request")
    {
        auto g = goal("g", { "a", "b" }, { "x" }, { "y" });
        g.subgoal_template = std::vector<std::string> { "p", "q" };
        const auto j = goal_library_to_json({ g });
        CHECK(j[0].contains("oracle"));
        CHECK(goal_library_from_json(j)[0] == g);
        CHECK_FALSE(goal_library_from_json(j, false)[0].subgoal_template.has_value());
        CHECK_FALSE(goal_library_to_json({ g }, false)[0].contains("oracle"));
    }
}

TEST_SUITE("agent_net")
{
    TEST_CASE("build_agents")
    {
        CHECK(build_agents({}, {}).active().empty());
        const auto net = build_agents({ pair("g1", { "a" }, "t1"), pair("g2", { "b" }, "t2") }, {});
        REQUIRE(net.active().size() == 2);
        CHECK(net.archive().empty());
        CHECK(net.active()[0].life == 10.0);
        CHECK(net.active()[0].toolset == std::set<std::string> { "t1" });
        CHECK_THROWS_AS(build_agents({ pair("g1", { "a" }, "t1"), pair("g1", { "b" }, "t2") }, {}), DuplicateGoal);
        TrainingPair bad { goal("g", { "a" }), W(S({ T("t", { "missing" }, {}) })) };
        CHECK_THROWS_AS(build_agents({ bad }, {}), InvalidWorkflow);
    }

    TEST_CASE("exact recall over corpus pairs")
    {
        const auto corpus = small_corpus(500, 21);
        std::vector<TrainingPair> pairs;
        for (const auto& r : corpus) {
            pairs.push_back({ r.goal, r.workflow });
        }
        const auto net = build_agents(pairs, {});
        REQUIRE(net.active().size() == 500);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto hits = retrieve(net, pairs[i].goal, 0.8);
            REQUIRE_FALSE(hits.empty());
            CHECK(hits[0].score == 1.0);
            CHECK(net.find(hits[0].id)->procedure == pairs[i].procedure);
        }
    }

    TEST_CASE("retrieve thresholds, ordering and archived exclusion")
    {
        auto net = build_agents({ pair("g1", { "a", "b" }, "t1"), pair("g2", { "c", "d" }, "t2"), pair("g3", { "a", "b", "c" }, "t3") }, {});
        const auto q = goal("q", { "a", "b", "c", "d" });
        // brute force: score every agent and keep the ones above theta
        std::vector<ScoredAgent> expect;
        for (const auto& a : net.active()) {
            const double s = ref_jaccard(a.goal.tokens, q.tokens);
            if (s > 0.4) {
                expect.push_back({ a.id, s });
            }
        }
        std::sort(expect.begin(), expect.end(), [](auto& x, auto& y) { return x.score != y.score ? x.score > y.score : x.id < y.id; });
        const auto got = retrieve(net, q, 0.4);
        REQUIRE(got.size() == 3);
        CHECK(got[0].id == AgentId { 3 });
        CHECK(got[1].id == AgentId { 1 });
        CHECK(got[2].id == AgentId { 2 });
        REQUIRE(got.size() == expect.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].id == expect[i].id);
            CHECK(got[i].score == doctest::Approx(expect[i].score));
        }
        CHECK(retrieve(net, goal("x", { "a", "b" }), 1.0).empty());

        // theta monotonicity
        for (double lo = 0.0; lo < 1.0; lo += 0.1) {
            for (double hi = lo; hi <= 1.0; hi += 0.1) {
                const auto big = retrieve(net, q, lo);
                for (const auto& s : retrieve(net, q, hi)) {
                    CHECK(std::any_of(big.begin(), big.end(), [&](const ScoredAgent& b) { return b.id == s.id; }));
                }
            }
        }

        net.move_to_archive(0);
        for (const auto& s : retrieve(net, q, 0.0)) {
            CHECK(s.id != AgentId { 1 });
        }
    }

    TEST_CASE("compatibility arithmetic")
    {
        auto net = build_agents({ { goal("g", { "a", "b", "c", "d" }, { "x" }), W(S({ T("t", { "x" }, {}) }), { "x" }) } }, {});
        const auto& agent = net.active()[0];
        CHECK(compatibility(net, agent, { goal("s", { "a", "b", "c", "d" }), {}, {} }) == 0.0);
        // fresh agent, exact match: 1 * (0.5 * 1 + 0.5 * 0)
        CHECK(compatibility(net, agent, { goal("s", { "a", "b", "c", "d" }), { "x" }, {} }) == doctest::Approx(0.5));

        net.find_active(agent.id)->stats = { 3, 1, 0, 0 };
        // similarity 3/5, prior 3/4: 0.5 * 0.6 + 0.5 * 0.75
        const auto t = Transition { goal("s", { "a", "b", "c", "e" }), { "x" }, {} };
        CHECK(ref_jaccard(agent.goal.tokens, t.subgoal.tokens) == doctest::Approx(0.6));
        CHECK(compatibility(net, net.active()[0], t) == doctest::Approx(0.675));

        net.enforce_input_schema = false;
        CHECK(compatibility(net, net.active()[0], { goal("s", { "a", "b", "c", "e" }), {}, {} }) == doctest::Approx(0.675));
    }

    TEST_CASE("selection probabilities")
    {
        const std::vector<WeightedCandidate> two { { AgentId { 1 }, 10.0, 1.0 }, { AgentId { 2 }, 30.0, 1.0 } };
        const auto p = selection_probabilities(two);
        CHECK(p[0] == doctest::Approx(0.25));
        CHECK(p[1] == doctest::Approx(0.75));

        const std::vector<WeightedCandidate> one { { AgentId { 9 }, 3.0, 0.2 } };
        Rng rng(1);
        CHECK(select(one, rng) == 0);

        const std::vector<WeightedCandidate> zero { { AgentId { 1 }, 0.0, 1.0 }, { AgentId { 2 }, 5.0, 0.0 } };
        CHECK_THROWS_AS(select(zero, rng), NoEligibleAgent);

        Rng sample(7);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<WeightedCandidate> c;
            const std::size_t n = 1 + sample.below(8);
            for (std::size_t i = 0; i < n; ++i) {
                c.push_back({ AgentId { static_cast<std::uint32_t>(i) }, sample.uniform() * 50.0, sample.bernoulli(0.2) ? 0.0 : sample.uniform() });
            }
            c.push_back({ AgentId { 99 }, 1.0, 1.0 });
            const auto probs = selection_probabilities(c);
            CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
            for (int d = 0; d < 20; ++d) {
                const auto i = select(c, sample);
                CHECK(c[i].life * c[i].gamma > 0.0);
            }
        }
    }

    TEST_CASE("select is deterministic for a seed")
    {
        const std::vector<WeightedCandidate> c { { AgentId { 1 }, 1.0, 1.0 }, { AgentId { 2 }, 2.0, 1.0 }, { AgentId { 3 }, 3.0, 1.0 } };
        Rng a(5);
        Rng b(5);
        for (int i = 0; i < 100; ++i) {
            CHECK(select(c, a) == select(c, b));
        }
    }

    TEST_CASE("life update examples")
    {
        const LifeConfig cfg;
        AtomicAgent a;
        a.life = 10.0;
        CHECK(update_life(a, {}, cfg) == 10.0);
        CHECK(ref_life(10.0, { .R_c = true }, cfg) == 13.0);
        CHECK(update_life(a, { .R_c = true }, cfg) == 13.0);
        CHECK(a.stats.successes == 1);

        AtomicAgent b;
        b.life = 2.0;
        CHECK(ref_life(2.0, { .P_e = true }, cfg) == 0.0);
        CHECK(update_life(b, { .P_e = true }, cfg) == 0.0);
        CHECK(b.stats.failures == 1);

        AtomicAgent c;
        c.life = 99.0;
        CHECK(update_life(c, { .R_c = true, .R_s = true, .R_g = true }, cfg) == 100.0);
        CHECK(c.stats.reuses == 1);
        CHECK(c.stats.generalizations == 1);
    }

    TEST_CASE("life stays bounded and moves monotonically under one-sided streams")
    {
        const LifeConfig cfg;
        Rng rng(3);
        for (int run = 0; run < 100; ++run) {
            AtomicAgent a;
            a.life = cfg.L_init;
            double ref = a.life;
            for (int step = 0; step < 200; ++step) {
                Outcome o;
                if (rng.bernoulli(0.5)) {
                    o.R_c = true;
                    o.R_s = rng.bernoulli(0.5);
                    o.R_g = rng.bernoulli(0.5);
                } else {
                    o.P_e = true;
                    o.P_s = rng.bernoulli(0.5);
                }
                o.P_r = rng.uniform();
                ref = ref_life(ref, o, cfg);
                REQUIRE(update_life(a, o, cfg) == doctest::Approx(ref));
                REQUIRE(a.life >= 0.0);
                REQUIRE(a.life <= cfg.L_max);
            }
        }
        AtomicAgent up;
        up.life = 1.0;
        AtomicAgent down;
        down.life = 50.0;
        for (int step = 0; step < 60; ++step) {
            const double u = up.life;
            const double d = down.life;
            update_life(up, { .R_c = true, .R_s = step % 2 == 0 }, cfg);
            update_life(down, { .P_e = true, .P_r = 0.5 }, cfg);
            CHECK(up.life >= u);
            CHECK(down.life <= d);
        }
    }

    TEST_CASE("life_delta is the unclamped difference")
    {
        const LifeConfig cfg;
        CHECK(life_delta({ .R_c = true, .R_g = true }, cfg) == 5.0);
        CHECK(life_delta({ .P_e = true, .P_s = true, .P_r = 0.5 }, cfg) == -6.5);
    }

    TEST_CASE("life config validation")
    {
        LifeConfig c;
        c.L_init = 0.0;
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.L_init = 200.0;
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.betas[1] = -1.0;
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.refresh_period = 0;
        CHECK_THROWS_AS(c.check(), ConfigError);
    }

    TEST_CASE("refresh with full coverage only advances the epoch")
    {
        auto net = build_agents({ pair("g1", { "a" }, "t1"), pair("g2", { "b" }, "t2") }, {});
        const auto before = net.snapshot();
        const auto log = eliminate_and_refresh(net);
        CHECK(log.empty());
        CHECK(net.epoch() == 1);
        auto after = net.snapshot();
        after["epoch"] = before["epoch"];
        CHECK(after == before);
    }

    TEST_CASE("zero-life agent is archived and never selected")
    {
        LifeConfig cfg;
        cfg.refresh_period = 3;
        auto net = build_agents({ pair("g1", { "a" }, "t1"), pair("g2", { "b" }, "t2") }, cfg);
        net.advance_epoch();
        net.find_active(AgentId { 1 })->life = 0.0;
        const auto log = eliminate_and_refresh(net);
        REQUIRE(log.size() == 1);
        CHECK(log[0].kind == ChangeLogEntry::Kind::Archived);
        REQUIRE(net.archive().size() == 1);
        CHECK(net.archive()[0].id == AgentId { 1 });
        CHECK(net.find_active(AgentId { 1 }) == nullptr);
        CHECK(retrieve(net, goal("q", { "a" }), 0.5).empty());

        const std::vector<WeightedCandidate> c { { AgentId { 1 }, 0.0, 1.0 }, { AgentId { 2 }, 10.0, 1.0 } };
        Rng rng(0);
        for (int i = 0; i < 1000; ++i) {
            CHECK(select(c, rng) == 1);
        }
    }

    TEST_CASE("refresh revives the archived agent with the best success ratio")
    {
        LifeConfig cfg;
        cfg.refresh_period = 1;
        AgentNetwork net(cfg);
        net.add_training(goal("g", { "a", "b" }), W(S({ T("t") })));
        const AgentId weak = net.add_agent(goal("g", { "a", "b" }), W(S({ T("t") })));
        const AgentId strong = net.add_agent(goal("g-copy", { "a", "b" }), W(S({ T("t") })));
        net.find_active(weak)->stats = { 2, 1, 0, 0 };
        net.find_active(strong)->stats = { 5, 1, 0, 0 };
        net.find_active(weak)->life = 0.0;
        net.find_active(strong)->life = 0.0;

        // oracle: enumerate archive candidates and keep the best ratio
        const double r_weak = 2.0 / 3.0;
        const double r_strong = 5.0 / 6.0;
        REQUIRE(r_strong > r_weak);

        const auto log = eliminate_and_refresh(net);
        REQUIRE(log.size() == 3);
        CHECK(log[2].kind == ChangeLogEntry::Kind::Revived);
        CHECK(log[2].agent == strong);
        REQUIRE(net.active().size() == 1);
        CHECK(net.active()[0].id == strong);
        CHECK(net.active()[0].life == cfg.L_init);
        REQUIRE(net.archive().size() == 1);
        CHECK(net.archive()[0].id == weak);
    }

    TEST_CASE("refresh spawns when no archived agent covers the hole")
    {
        LifeConfig cfg;
        cfg.refresh_period = 1;
        AgentNetwork fresh(cfg);
        fresh.add_training(goal("g1", { "a" }), W(S({ T("t1") })));
        const auto log = eliminate_and_refresh(fresh);
        REQUIRE(log.size() == 1);
        CHECK(log[0].kind == ChangeLogEntry::Kind::Spawned);
        REQUIRE(fresh.active().size() == 1);
        CHECK(fresh.active()[0].goal.id == "g1");
    }

    TEST_CASE("refresh keeps the active/archive partition")
    {
        LifeConfig cfg;
        cfg.refresh_period = 2;
        std::vector<TrainingPair> pairs;
        for (int i = 0; i < 30; ++i) {
            pairs.push_back(pair("g" + std::to_string(i), { "tok" + std::to_string(i) }, "t" + std::to_string(i)));
        }
        auto net = build_agents(pairs, cfg);
        Rng rng(8);
        for (int round = 0; round < 40; ++round) {
            for (const auto& a : net.active()) {
                if (rng.bernoulli(0.2)) {
                    net.find_active(a.id)->life = 0.0;
                }
            }
            eliminate_and_refresh(net);
            std::set<AgentId> ids;
            for (const auto& a : net.active()) {
                CHECK(a.life > 0.0);
                CHECK(ids.insert(a.id).second);
            }
            for (const auto& a : net.archive()) {
                CHECK(ids.insert(a.id).second);
            }
        }
    }

    TEST_CASE("snapshot restore round-trip")
    {
        auto pairs = std::vector<TrainingPair> { pair("g1", { "a" }, "t1"), pair("g2", { "b" }, "t2") };
        auto net = build_agents(pairs, {}, {}, 77);
        net.find_active(AgentId { 2 })->stats = { 4, 1, 2, 0 };
        net.find_active(AgentId { 1 })->life = 0.0;
        eliminate_and_refresh(net);
        const auto snap = net.snapshot();

        auto other = build_agents(pairs, {});
        other.restore(snap);
        CHECK(other.snapshot() == snap);
        CHECK(other.rng_seed() == 77);
        CHECK_THROWS_AS(other.restore(nlohmann::json::object()), IoError);
    }

    TEST_CASE("agent labels")
    {
        CHECK(agent_label(AgentId { 42 }) == "A000042");
    }
}
