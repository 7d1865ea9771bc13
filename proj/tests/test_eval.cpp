#include "doctest.h"

#include "agentnet/errors.hpp"
#include "agentnet/eval.hpp"

#include "support.hpp"

using namespace agentnet;
using namespace testing;

namespace {

ScoredEpisode ep(const std::string& bucket, std::optional<std::size_t> rank, std::optional<Workflow> solution = std::nullopt)
{
    return { bucket, rank, std::move(solution) };
}

struct Split {
    std::vector<CorpusRecord> train;
    std::vector<CorpusRecord> novel;
};

const Split& shared_split()
{
    static const Split s = [] {
        Split out;
        out.train = small_corpus(1500, 31);
        out.novel = make_novel_goals(out.train, 31, { 40, 2, 3, Structure::Linear });
        auto nested = make_novel_goals(out.train, 32, { 15, 2, 3, Structure::Nested });
        out.novel.insert(out.novel.end(), nested.begin(), nested.end());
        return out;
    }();
    return s;
}

} // namespace

TEST_SUITE("eval_harness")
{
    TEST_CASE("pass@k hand counts")
    {
        const std::vector<ScoredEpisode> eps { ep("b", 1), ep("b", 2), ep("b", 4), ep("b", std::nullopt) };
        const auto t = pass_at_k(eps, { 1, 3, 5 });
        CHECK(t.at("b").at(1) == doctest::Approx(0.25));
        CHECK(t.at("b").at(3) == doctest::Approx(0.50));
        CHECK(t.at("b").at(5) == doctest::Approx(0.75));
        CHECK(t.at("all") == t.at("b"));

        const std::vector<ScoredEpisode> second { ep("x", 2) };
        const auto s = pass_at_k(second, { 1, 3, 5 });
        CHECK(s.at("x").at(1) == 0.0);
        CHECK(s.at("x").at(3) == 1.0);
        CHECK(s.at("x").at(5) == 1.0);

        const std::vector<ScoredEpisode> none { ep("x", std::nullopt), ep("y", std::nullopt) };
        for (const auto& [bucket, row] : pass_at_k(none, { 1, 3 })) {
            for (const auto& [k, v] : row) {
                CHECK(v == 0.0);
            }
        }
    }

    TEST_CASE("monotonicity is enforced on reports")
    {
        MetricsReport r;
        r.pass_at["b"] = { { 1, 0.5 }, { 3, 0.4 } };
        CHECK_THROWS_AS(r.check_monotone(), InternalError);
        r.pass_at["b"] = { { 1, 0.4 }, { 3, 0.4 } };
        CHECK_NOTHROW(r.check_monotone());
    }

    TEST_CASE("reuse efficiency hand counts")
    {
        const Workflow pattern = W(S({ T("a"), T("b") }));
        const std::vector<ScoredEpisode> eps {
            ep("x", 1, W(S({ T("a"), T("b"), T("c") }))),
            ep("x", 1, W(S({ T("z"), T("a"), T("b") }))),
            ep("x", 2, W(S({ Node::make_nest("g", S({ T("a"), T("b") })) }))),
            ep("x", 1, W(S({ T("b"), T("a") }))),
            ep("x", std::nullopt),
        };
        CHECK(reuse_efficiency(eps, {}) == 0.0);
        CHECK(reuse_efficiency(eps, { pattern }) == doctest::Approx(75.0));
    }

    TEST_CASE("library mining keeps frequent contiguous runs")
    {
        std::vector<CorpusRecord> train(3);
        train[0].workflow = W(S({ T("a"), T("b"), T("c") }));
        train[1].workflow = W(S({ T("a"), T("b"), T("d") }));
        train[2].workflow = W(S({ T("x"), T("y") }));
        const auto lib = mine_library(train);
        REQUIRE(lib.size() == 1);
        CHECK(ref_tools(lib[0].root) == std::vector<std::string> { "a", "b" });
    }

    TEST_CASE("config validation")
    {
        ExperimentConfig c;
        c.k_list = { 3, 1 };
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.disabled = { "nonsense" };
        CHECK_THROWS_AS(c.check(), ConfigError);
        c = {};
        c.solve.theta = 1.5;
        CHECK_THROWS_AS(c.check(), ConfigError);
        CHECK_THROWS_AS(ablate({}, "nonsense", {}, {}), ConfigError);

        c = {};
        c.disabled = { "verification", "input_goal" };
        const auto s = c.effective_solve();
        CHECK_FALSE(s.verification);
        CHECK_FALSE(s.input_goal);
        CHECK(s.hypothesis);
        CHECK(s.k == 5);
    }

    TEST_CASE("exact recall gives full pass@1 in every bucket")
    {
        const auto corpus = small_corpus(400, 8);
        const auto out = run_experiment({}, corpus, corpus);
        for (const auto& [bucket, row] : out.report.pass_at) {
            CHECK_MESSAGE(row.at(1) == 1.0, bucket);
        }
        CHECK(out.report.episodes == 400);
        CHECK(out.transcripts.size() == 400);
    }

    TEST_CASE("novel split: hypothesis ablation is zero and full dominates no-verification")
    {
        const auto& s = shared_split();
        const auto full = run_experiment({}, s.train, s.novel);
        const auto no_hyp = ablate({}, "hypothesis", s.train, s.novel);
        const auto no_ver = ablate({}, "verification", s.train, s.novel);
        for (const auto& [bucket, row] : no_hyp.report.pass_at) {
            for (const auto& [k, v] : row) {
                CHECK(v == 0.0);
            }
        }
        CHECK(no_hyp.report.early_failures == s.novel.size());
        CHECK(no_ver.report.pass_at.at("all").at(1) <= full.report.pass_at.at("all").at(1));
        CHECK(full.report.pass_at.at("all").at(1) > 0.9);
        full.report.check_monotone();
    }

    TEST_CASE("same seed gives byte-identical reports and transcripts")
    {
        const auto& s = shared_split();
        ExperimentConfig c;
        c.solve.seed = 12;
        const auto a = run_experiment(c, s.train, s.novel);
        const auto b = run_experiment(c, s.train, s.novel);
        CHECK(to_json(a.report).dump() == to_json(b.report).dump());
        REQUIRE(a.transcripts.size() == b.transcripts.size());
        for (std::size_t i = 0; i < a.transcripts.size(); ++i) {
            CHECK(a.transcripts[i].dump() == b.transcripts[i].dump());
        }
    }

    TEST_CASE("parallel aggregates do not depend on the thread count")
    {
        const auto& s = shared_split();
        ExperimentConfig c;
        c.solve.seed = 12;
        c.batch_size = 8;
        c.parallelism = 2;
        const auto two = run_experiment(c, s.train, s.novel);
        c.parallelism = 6;
        const auto six = run_experiment(c, s.train, s.novel);
        CHECK(two.report.pass_at == six.report.pass_at);
        CHECK(two.report.reuse_efficiency == six.report.reuse_efficiency);
        CHECK(two.report.life.eliminations == six.report.life.eliminations);
        CHECK(two.report.total_steps == six.report.total_steps);
    }

    TEST_CASE("report json and csv")
    {
        MetricsReport r;
        r.pass_at["linear/small"] = { { 1, 0.5 }, { 3, 0.75 } };
        r.pass_at["all"] = { { 1, 0.5 }, { 3, 0.75 } };
        r.bucket_sizes["linear/small"] = 4;
        r.reuse_efficiency = 25.0;
        r.sweep = { { 1, 0.0 }, { 10, 0.5 } };
        r.config = { { "seed", 1 } };
        const auto back = report_from_json(to_json(r));
        CHECK(to_json(back) == to_json(r));
        CHECK(to_csv(r) == "bucket,k,value\nall,1,0.500000\nall,3,0.750000\nlinear/small,1,0.500000\nlinear/small,3,0.750000\n");
        CHECK_THROWS_AS(report_from_json(nlohmann::json::object()), IoError);
    }

    TEST_CASE("procedure sweep covers every size")
    {
        const auto& s = shared_split();
        const auto points = procedure_sweep({}, s.train, { 3, 10, 50 });
        REQUIRE(points.size() == 3);
        CHECK(points[0].procedures == 3);
        for (const auto& p : points) {
            CHECK(p.pass_at_1 >= 0.0);
            CHECK(p.pass_at_1 <= 1.0);
        }
        CHECK(points[2].pass_at_1 == 1.0);
    }
}
