#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "agentnet/goal.hpp"
#include "agentnet/workflow.hpp"

namespace agentnet {

struct PlantSpec {
    std::size_t length = 3;
    double rate = 0.2;
};

struct CorpusProfile {
    std::size_t total = 10000;
    std::map<std::size_t, double> node_histogram;
    std::map<std::size_t, double> depth_histogram;
    std::size_t tool_vocab_size = 64;
    std::optional<PlantSpec> planted;

    // Throws ConfigError on malformed proportions.
    void check() const;
};

// Proportions from the reference corpus counts (0-node flows excluded).
CorpusProfile default_profile();
std::map<std::size_t, double> normalized(const std::map<std::size_t, double>& counts);

struct BucketLabels {
    std::string structure; // linear | nested
    std::string size;      // single | small | medium | large

    std::string key() const { return structure + "/" + size; }
    bool operator==(const BucketLabels&) const = default;
};

BucketLabels bucket_for(const StructMetrics& m);

struct PlantedOccurrence {
    std::vector<std::string> pattern; // tool ids
    Path path;                        // inside flatten(workflow)

    bool operator==(const PlantedOccurrence&) const = default;
};

struct CorpusRecord {
    Goal goal;
    Workflow workflow;
    BucketLabels labels;
    std::vector<PlantedOccurrence> planted;

    bool operator==(const CorpusRecord&) const = default;
};

// Deterministic tool with fixed signature; tool `i` is the same for any vocabulary size.
TaskNode catalog_tool(std::size_t i);
// Flat pattern workflow built from reserved tools outside the vocabulary.
Workflow planted_pattern(std::size_t length);

// Throws InfeasibleProfile when no sample can satisfy the profile.
std::vector<CorpusRecord> generate(const CorpusProfile& profile, std::uint64_t seed);

struct SplitResult {
    std::vector<CorpusRecord> train;
    std::vector<CorpusRecord> test;
};

SplitResult split(const std::vector<CorpusRecord>& corpus, double train_fraction, std::uint64_t seed);

enum class Structure { Linear, Nested };

struct NovelSpec {
    std::size_t count = 200;
    std::size_t min_parts = 2;
    std::size_t max_parts = 3;
    Structure structure = Structure::Linear;
};

// Composites of trained atomic records. Throws PreconditionViolation when the
// training set cannot supply chainable parts.
std::vector<CorpusRecord> make_novel_goals(const std::vector<CorpusRecord>& train, std::uint64_t seed, const NovelSpec& spec);

double l1_distance(const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b);
std::map<std::size_t, double> node_histogram(const std::vector<CorpusRecord>& records);
std::map<std::size_t, double> depth_histogram(const std::vector<CorpusRecord>& records);

nlohmann::json to_json(const CorpusRecord& r, bool include_oracle = true);
CorpusRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusProfile& p);
CorpusProfile profile_from_json(const nlohmann::json& j);

// Throws IoError naming the offending line.
std::vector<CorpusRecord> read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records);

} // namespace agentnet
