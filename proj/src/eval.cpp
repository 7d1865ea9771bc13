#include "agentnet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "agentnet/errors.hpp"
#include "agentnet/subflow.hpp"
#include "agentnet/workflow_json.hpp"

namespace agentnet {

using nlohmann::json;

const std::set<std::string>& ablation_components()
{
    static const std::set<std::string> c { "scale_control", "verification", "hypothesis", "input_goal", "output_goal" };
    return c;
}

void ExperimentConfig::check() const
{
    if (k_list.empty()) {
        throw ConfigError("k list must not be empty");
    }
    for (std::size_t i = 0; i < k_list.size(); ++i) {
        if (k_list[i] == 0 || (i > 0 && k_list[i] <= k_list[i - 1])) {
            throw ConfigError("k list must be positive and strictly ascending");
        }
    }
    for (const auto& d : disabled) {
        if (!ablation_components().contains(d)) {
            throw ConfigError("unknown component '" + d + "'");
        }
    }
    if (!(solve.theta >= 0.0 && solve.theta <= 1.0)) {
        throw ConfigError("theta must lie in [0, 1]");
    }
    if (!(solve.eta > 0.0 && solve.eta <= 1.0)) {
        throw ConfigError("eta must lie in (0, 1]");
    }
    if (solve.max_depth < 1) {
        throw ConfigError("max_depth must be at least 1");
    }
    if (parallelism < 1 || batch_size < 1) {
        throw ConfigError("parallelism and batch size must be at least 1");
    }
    life.check();
}

SolveConfig ExperimentConfig::effective_solve() const
{
    SolveConfig s = solve;
    s.k = k_list.back();
    s.scale_control = !disabled.contains("scale_control");
    s.verification = !disabled.contains("verification");
    s.hypothesis = !disabled.contains("hypothesis");
    s.input_goal = !disabled.contains("input_goal");
    s.output_goal = !disabled.contains("output_goal");
    return s;
}

PassTable pass_at_k(std::span<const ScoredEpisode> episodes, const std::vector<std::size_t>& ks)
{
    std::map<std::string, std::vector<const ScoredEpisode*>> rows;
    for (const auto& e : episodes) {
        rows[e.bucket].push_back(&e);
        rows["all"].push_back(&e);
    }
    PassTable table;
    for (const auto& [bucket, eps] : rows) {
        auto& row = table[bucket];
        for (std::size_t k : ks) {
            std::size_t hit = 0;
            for (const auto* e : eps) {
                hit += e->first_correct_rank && *e->first_correct_rank <= k;
            }
            row[k] = static_cast<double>(hit) / static_cast<double>(eps.size());
        }
        double prev = 0.0;
        for (const auto& [k, v] : row) {
            if (v < prev) {
                throw InternalError("pass@k decreases in k for bucket " + bucket);
            }
            prev = v;
        }
    }
    return table;
}

double reuse_efficiency(std::span<const ScoredEpisode> episodes, const std::vector<Workflow>& library)
{
    if (library.empty()) {
        return 0.0;
    }
    std::size_t solved = 0;
    std::size_t reusing = 0;
    for (const auto& e : episodes) {
        if (!e.solution) {
            continue;
        }
        ++solved;
        reusing += !find_subflows(*e.solution, library).empty();
    }
    return solved == 0 ? 0.0 : 100.0 * static_cast<double>(reusing) / static_cast<double>(solved);
}

namespace {

void collect_blocks(const Node& n, std::vector<const Node*>& out)
{
    if (n.is_seq()) {
        out.push_back(&n);
    }
    for (const auto& c : n.children) {
        collect_blocks(c, out);
    }
}

EpisodeResult plan_or_fail(const AgentNetwork& net, const CorpusRecord& rec, const SolveConfig& sc)
{
    Target t { rec.goal, rec.workflow };
    t.goal.subgoal_template.reset();
    try {
        return plan_episode(net, t, sc);
    } catch (const DecompositionFailure& e) {
        EpisodeResult ep;
        ep.goal_id = rec.goal.id;
        ep.seed = sc.seed;
        ep.failure = e.what();
        return ep;
    }
}

void tally(LifeSummary& s, const ChangeLog& log)
{
    for (const auto& e : log) {
        switch (e.kind) {
        case ChangeLogEntry::Kind::Archived:
            ++s.eliminations;
            break;
        case ChangeLogEntry::Kind::Revived:
            ++s.revivals;
            break;
        case ChangeLogEntry::Kind::Spawned:
            ++s.spawns;
            break;
        }
    }
}

void plan_batch(const AgentNetwork& net, const std::vector<CorpusRecord>& test, std::size_t begin, std::size_t end,
    const SolveConfig& sc, std::size_t threads, std::vector<EpisodeResult>& out)
{
    std::atomic<std::size_t> next { begin };
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < end; i = next++) {
            try {
                out[i] = plan_or_fail(net, test[i], sc);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n = std::min(threads, end - begin);
    for (std::size_t t = 0; t < n; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

// Batch merge: deltas summed per agent, then clamped once.
void merge_batch(AgentNetwork& net, const std::vector<EpisodeResult>& eps, std::size_t begin, std::size_t end, const SolveConfig& sc)
{
    if (sc.scale_control) {
        std::map<AgentId, double> delta;
        for (std::size_t i = begin; i < end; ++i) {
            for (const auto& o : eps[i].outcomes) {
                if (AtomicAgent* a = net.find_active(o.agent)) {
                    delta[o.agent] += life_delta(o.outcome, net.config());
                    record_stats(*a, o.outcome);
                }
            }
        }
        for (const auto& [id, d] : delta) {
            AtomicAgent* a = net.find_active(id);
            a->life = std::clamp(a->life + d, 0.0, net.config().L_max);
        }
    }
    for (std::size_t i = begin; i < end; ++i) {
        const auto& ep = eps[i];
        if (!ep.candidates.empty() && !ep.candidates.front().failure && ep.candidates.front().verdict.passed) {
            net.record_solved_shape(shape_key(ep.candidates.front().workflow), ep.goal_id);
        }
    }
}

} // namespace

std::vector<Workflow> mine_library(const std::vector<CorpusRecord>& train, std::size_t max_patterns)
{
    std::map<std::string, std::pair<std::size_t, std::vector<TaskNode>>> runs;
    for (const auto& r : train) {
        const Workflow f = flatten(r.workflow);
        std::vector<const Node*> blocks;
        collect_blocks(f.root, blocks);
        for (const Node* b : blocks) {
            for (std::size_t s = 0; s < b->children.size(); ++s) {
                std::string key;
                std::vector<TaskNode> tasks;
                for (std::size_t len = 1; len <= 5 && s + len <= b->children.size(); ++len) {
                    const Node& item = b->children[s + len - 1];
                    if (!item.is_task()) {
                        break;
                    }
                    key += item.task.tool_id + ";";
                    tasks.push_back(item.task);
                    if (len >= 2) {
                        auto& slot = runs[key];
                        if (slot.first++ == 0) {
                            slot.second = tasks;
                        }
                    }
                }
            }
        }
    }
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [key, v] : runs) {
        if (v.first >= 2) {
            ranked.emplace_back(v.first, key);
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Workflow> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < max_patterns; ++i) {
        Workflow w;
        w.id = "lib" + std::to_string(out.size());
        for (const auto& t : runs[ranked[i].second].second) {
            w.root.children.push_back(Node::make_task(t));
        }
        out.push_back(std::move(w));
    }
    return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& config, const std::vector<CorpusRecord>& train, const std::vector<CorpusRecord>& test)
{
    config.check();
    const SolveConfig sc = config.effective_solve();

    std::vector<TrainingPair> pairs;
    pairs.reserve(train.size());
    for (const auto& r : train) {
        pairs.push_back({ r.goal, r.workflow });
    }
    AgentNetwork net = build_agents(pairs, config.life, config.backend, sc.seed);
    net.enforce_input_schema = sc.input_goal;

    ExperimentOutput out;
    std::vector<EpisodeResult> results(test.size());
    if (config.parallelism <= 1) {
        for (std::size_t i = 0; i < test.size(); ++i) {
            results[i] = plan_or_fail(net, test[i], sc);
            commit_episode(net, results[i], sc);
            if (sc.scale_control) {
                tally(out.report.life, eliminate_and_refresh(net));
            }
        }
    } else {
        for (std::size_t begin = 0; begin < test.size(); begin += config.batch_size) {
            const std::size_t end = std::min(test.size(), begin + config.batch_size);
            plan_batch(net, test, begin, end, sc, config.parallelism, results);
            merge_batch(net, results, begin, end, sc);
            if (sc.scale_control) {
                tally(out.report.life, eliminate_and_refresh(net));
            }
        }
    }

    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& ep = results[i];
        ScoredEpisode se;
        se.bucket = test[i].labels.key();
        se.first_correct_rank = ep.first_correct_rank();
        if (se.first_correct_rank) {
            se.solution = ep.candidates[*se.first_correct_rank - 1].workflow;
        }
        out.episodes.push_back(std::move(se));
        json t = to_json(ep);
        t["bucket"] = test[i].labels.key();
        out.transcripts.push_back(std::move(t));
        out.report.total_steps += ep.steps;
        out.report.early_failures += ep.failure.has_value();
        ++out.report.bucket_sizes[test[i].labels.key()];
    }
    auto& rep = out.report;
    rep.episodes = test.size();
    rep.pass_at = pass_at_k(out.episodes, config.k_list);
    rep.reuse_efficiency = reuse_efficiency(out.episodes, config.library.empty() ? mine_library(train) : config.library);
    rep.config = to_json(config);
    if (config.sweep) {
        rep.sweep = procedure_sweep(config, train);
    }
    return out;
}

ExperimentOutput ablate(ExperimentConfig config, const std::string& component, const std::vector<CorpusRecord>& train,
    const std::vector<CorpusRecord>& test)
{
    if (!ablation_components().contains(component)) {
        throw ConfigError("unknown component '" + component + "'");
    }
    config.disabled.insert(component);
    return run_experiment(config, train, test);
}

std::vector<SweepPoint> procedure_sweep(const ExperimentConfig& config, const std::vector<CorpusRecord>& train,
    const std::vector<std::size_t>& sizes)
{
    const std::size_t largest = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
    std::vector<CorpusRecord> base;
    for (const auto& r : train) {
        if (base.size() == largest) {
            break;
        }
        if (!r.goal.subgoal_template && measure(r.workflow.root).depth == 0) {
            base.push_back(r);
        }
    }
    if (base.size() < std::max<std::size_t>(largest, 3)) {
        throw PreconditionViolation("sweep needs at least " + std::to_string(largest) + " flat atomic training records");
    }
    const auto novel = make_novel_goals(base, derive_seed(config.solve.seed, hash_string("sweep")), { 60, 2, 3, Structure::Linear });
    ExperimentConfig sub = config;
    sub.sweep = false;
    sub.k_list = { 1 };
    std::vector<SweepPoint> out;
    for (std::size_t n : sizes) {
        const std::vector<CorpusRecord> part(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(std::min(n, base.size())));
        const auto res = run_experiment(sub, part, novel);
        out.push_back({ n, res.report.pass_at.at("all").at(1) });
    }
    return out;
}

void MetricsReport::check_monotone() const
{
    for (const auto& [bucket, row] : pass_at) {
        double prev = 0.0;
        for (const auto& [k, v] : row) {
            if (v < prev) {
                throw InternalError("pass@k decreases in k for bucket " + bucket);
            }
            prev = v;
        }
    }
}

json to_json(const ExperimentConfig& c)
{
    const auto& s = c.solve;
    return { { "k_list", c.k_list }, { "theta", s.theta }, { "eta", s.eta }, { "budget", s.budget }, { "max_depth", s.max_depth },
        { "mode", to_string(s.mode) }, { "seed", s.seed }, { "disabled", c.disabled }, { "batch_size", c.batch_size },
        { "parallel", c.parallelism > 1 },
        { "life", { { "L_init", c.life.L_init }, { "L_max", c.life.L_max }, { "alphas", c.life.alphas }, { "betas", c.life.betas },
                      { "drift_threshold", c.life.drift_threshold }, { "refresh_period", c.life.refresh_period } } } };
}

json to_json(const MetricsReport& r)
{
    json pass = json::object();
    for (const auto& [bucket, row] : r.pass_at) {
        json jr = json::object();
        for (const auto& [k, v] : row) {
            jr[std::to_string(k)] = v;
        }
        pass[bucket] = std::move(jr);
    }
    json sweep = json::array();
    for (const auto& p : r.sweep) {
        sweep.push_back({ { "procedures", p.procedures }, { "pass_at_1", p.pass_at_1 } });
    }
    return { { "pass_at", std::move(pass) }, { "bucket_sizes", r.bucket_sizes }, { "reuse_efficiency", r.reuse_efficiency },
        { "life", { { "eliminations", r.life.eliminations }, { "revivals", r.life.revivals }, { "spawns", r.life.spawns } } },
        { "episodes", r.episodes }, { "early_failures", r.early_failures }, { "total_steps", r.total_steps }, { "sweep", std::move(sweep) },
        { "config", r.config } };
}

MetricsReport report_from_json(const json& j)
{
    try {
        MetricsReport r;
        for (const auto& [bucket, row] : j.at("pass_at").items()) {
            for (const auto& [k, v] : row.items()) {
                r.pass_at[bucket][static_cast<std::size_t>(std::stoul(k))] = v.get<double>();
            }
        }
        r.bucket_sizes = j.at("bucket_sizes").get<std::map<std::string, std::size_t>>();
        r.reuse_efficiency = j.at("reuse_efficiency").get<double>();
        const auto& life = j.at("life");
        r.life = { life.at("eliminations").get<std::size_t>(), life.at("revivals").get<std::size_t>(), life.at("spawns").get<std::size_t>() };
        r.episodes = j.at("episodes").get<std::size_t>();
        r.early_failures = j.at("early_failures").get<std::size_t>();
        r.total_steps = j.at("total_steps").get<std::size_t>();
        for (const auto& p : j.at("sweep")) {
            r.sweep.push_back({ p.at("procedures").get<std::size_t>(), p.at("pass_at_1").get<double>() });
        }
        r.config = j.at("config");
        return r;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed report: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw IoError("malformed report: k keys must be integers");
    }
}

std::string to_csv(const MetricsReport& r)
{
    std::string out = "bucket,k,value\n";
    char buf[64];
    for (const auto& [bucket, row] : r.pass_at) {
        for (const auto& [k, v] : row) {
            std::snprintf(buf, sizeof buf, ",%zu,%.6f\n", k, v);
            out += bucket;
            out += buf;
        }
    }
    return out;
}

} // namespace agentnet
