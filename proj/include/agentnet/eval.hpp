#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentnet/agent_net.hpp"
#include "agentnet/corpus.hpp"
#include "agentnet/orchestrator.hpp"

namespace agentnet {

// Components that ablate() may switch off.
const std::set<std::string>& ablation_components();

struct ExperimentConfig {
    std::vector<std::size_t> k_list { 1, 3, 5 };
    SolveConfig solve;
    LifeConfig life;
    SimilarityBackend backend;
    std::set<std::string> disabled;
    // 1 runs episodes one by one; more plans fixed-size batches on worker threads.
    std::size_t parallelism = 1;
    std::size_t batch_size = 16;
    bool sweep = false;
    // Reuse library; mined from the training set when empty.
    std::vector<Workflow> library;

    // Throws ConfigError.
    void check() const;
    // solve settings with the disabled components applied.
    SolveConfig effective_solve() const;
};

struct ScoredEpisode {
    std::string bucket;
    std::optional<std::size_t> first_correct_rank;
    // First correct candidate, when any.
    std::optional<Workflow> solution;
};

using PassTable = std::map<std::string, std::map<std::size_t, double>>;

// Per bucket plus an "all" row. Throws InternalError if a row is not monotone in k.
PassTable pass_at_k(std::span<const ScoredEpisode> episodes, const std::vector<std::size_t>& ks);

// Percentage of solved episodes whose solution contains a library pattern.
double reuse_efficiency(std::span<const ScoredEpisode> episodes, const std::vector<Workflow>& library);

// Most frequent contiguous tool runs (2..5 tasks) across flattened training flows.
std::vector<Workflow> mine_library(const std::vector<CorpusRecord>& train, std::size_t max_patterns = 10);

struct LifeSummary {
    std::size_t eliminations = 0;
    std::size_t revivals = 0;
    std::size_t spawns = 0;
};

struct SweepPoint {
    std::size_t procedures = 0;
    double pass_at_1 = 0.0;
};

struct MetricsReport {
    PassTable pass_at;
    std::map<std::string, std::size_t> bucket_sizes;
    double reuse_efficiency = 0.0;
    LifeSummary life;
    std::size_t episodes = 0;
    std::size_t early_failures = 0;
    std::size_t total_steps = 0;
    std::vector<SweepPoint> sweep;
    nlohmann::json config;

    void check_monotone() const;
};

struct ExperimentOutput {
    MetricsReport report;
    std::vector<nlohmann::json> transcripts;
    std::vector<ScoredEpisode> episodes;
};

ExperimentOutput run_experiment(const ExperimentConfig& config, const std::vector<CorpusRecord>& train,
    const std::vector<CorpusRecord>& test);

// Throws ConfigError for a component outside ablation_components().
ExperimentOutput ablate(ExperimentConfig config, const std::string& component, const std::vector<CorpusRecord>& train,
    const std::vector<CorpusRecord>& test);

std::vector<SweepPoint> procedure_sweep(const ExperimentConfig& config, const std::vector<CorpusRecord>& train,
    const std::vector<std::size_t>& sizes = { 1, 10, 20, 30, 40, 50 });

nlohmann::json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
std::string to_csv(const MetricsReport& r);
nlohmann::json to_json(const ExperimentConfig& c);

} // namespace agentnet
