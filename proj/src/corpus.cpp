#include "agentnet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "agentnet/errors.hpp"
#include "agentnet/io.hpp"
#include "agentnet/rng.hpp"
#include "agentnet/workflow_json.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

constexpr std::size_t kFieldCount = 24;
constexpr double kBranchRate = 0.15;
constexpr std::uint64_t kCatalogSeed = 0x6a09e667f3bcc908ULL;

const char* const kVerbs[] = { "query", "update", "validate", "export", "merge", "notify", "archive", "score" };
const char* const kObjects[] = { "customer", "order", "invoice", "ticket", "report", "account",
    "shipment", "contract", "payment", "product", "employee", "campaign" };

std::string field_name(std::size_t i)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "f%02zu", i);
    return buf;
}

std::string padded(const char* prefix, std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
    return buf;
}

double tail_mass(const std::map<std::size_t, double>& hist, std::size_t at_least)
{
    double p = 0.0;
    for (const auto& [k, v] : hist) {
        if (k >= at_least) {
            p += v;
        }
    }
    return p;
}

std::size_t quantile(const std::map<std::size_t, double>& hist, double u)
{
    double cum = 0.0;
    for (const auto& [k, v] : hist) {
        cum += v;
        if (u < cum) {
            return k;
        }
    }
    return hist.rbegin()->first;
}

void collect_tasks_mut(Node& n, std::vector<TaskNode*>& out)
{
    if (n.is_task()) {
        out.push_back(&n.task);
        return;
    }
    for (auto& c : n.children) {
        collect_tasks_mut(c, out);
    }
}

// Inputs that must come from outside: consumed before any guaranteed binding.
void scan_needs(const Node& n, FieldSet& scope, FieldSet& needs)
{
    switch (n.kind) {
    case NodeKind::Task:
        for (const auto& f : n.task.inputs) {
            if (!scope.contains(f)) {
                needs.insert(f);
                scope.insert(f);
            }
        }
        scope.insert(n.task.outputs.begin(), n.task.outputs.end());
        break;
    case NodeKind::Sequence:
    case NodeKind::Nest:
        for (const auto& c : n.children) {
            scan_needs(c, scope, needs);
        }
        break;
    case NodeKind::Branch: {
        FieldSet then_scope = scope;
        scan_needs(n.children[0], then_scope, needs);
        FieldSet else_scope = scope;
        if (n.children.size() > 1) {
            scan_needs(n.children[1], else_scope, needs);
        }
        for (const auto& f : needs) {
            scope.insert(f);
        }
        for (const auto& f : then_scope) {
            if (else_scope.contains(f)) {
                scope.insert(f);
            }
        }
        break;
    }
    }
}

// Declared io: unbound inputs in, terminal (never consumed later) bound outputs out.
void assign_schemas(Workflow& w)
{
    FieldSet scope;
    FieldSet needs;
    scan_needs(w.root, scope, needs);
    w.declared_inputs = needs;
    FieldSet terminal;
    for (const auto* t : tasks_in_order(w.root)) {
        for (const auto& f : t->inputs) {
            terminal.erase(f);
        }
        terminal.insert(t->outputs.begin(), t->outputs.end());
    }
    const FieldSet bound = bound_fields(w);
    w.declared_outputs.clear();
    for (const auto& f : terminal) {
        if (bound.contains(f) && !needs.contains(f)) {
            w.declared_outputs.insert(f);
        }
    }
}

void wrap_branches(Node& block, Rng& rng)
{
    std::vector<std::size_t> task_slots;
    for (std::size_t i = 0; i < block.children.size(); ++i) {
        if (block.children[i].is_task()) {
            task_slots.push_back(i);
        }
    }
    if (task_slots.size() >= 2 && rng.bernoulli(kBranchRate)) {
        const std::size_t j = task_slots[rng.below(task_slots.size() - 1)];
        Predicate p { field_name(rng.below(kFieldCount)), PredicateOp::Exists, std::nullopt };
        Node arm = Node::make_seq({ block.children[j] });
        block.children[j] = Node::make_branch(std::move(p), std::move(arm));
    }
    for (auto& c : block.children) {
        if (c.is_nest()) {
            wrap_branches(c.children.front(), rng);
        }
    }
}

Goal goal_for(const std::string& id, std::size_t index, Rng& rng, const Workflow& w)
{
    Goal g;
    g.id = id;
    g.tokens = { padded("t", index) + "a", padded("t", index) + "b", kVerbs[rng.below(std::size(kVerbs))],
        kObjects[rng.below(std::size(kObjects))] };
    g.input_schema = w.declared_inputs;
    g.output_schema = w.declared_outputs;
    return g;
}

CorpusRecord generate_one(const CorpusProfile& profile, std::uint64_t seed, std::size_t index)
{
    Rng rng(derive_seed(seed, index));
    const double u = rng.uniform();
    const std::size_t n = quantile(profile.node_histogram, u);
    const std::size_t d = std::min(quantile(profile.depth_histogram, u), n - 1);

    bool plant = false;
    if (profile.planted && n >= profile.planted->length) {
        plant = rng.bernoulli(profile.planted->rate / tail_mass(profile.node_histogram, profile.planted->length));
    }

    std::vector<std::size_t> per_level(d + 1, 1);
    for (std::size_t extra = n - (d + 1); extra > 0; --extra) {
        ++per_level[rng.below(d + 1)];
    }
    const std::string gid = padded("g", index);

    Node body;
    for (std::size_t level = d + 1; level-- > 0;) {
        Node block = Node::make_seq();
        for (std::size_t t = 0; t < per_level[level]; ++t) {
            block.children.push_back(Node::make_task(catalog_tool(rng.below(profile.tool_vocab_size))));
        }
        if (level < d) {
            const std::size_t at = rng.below(per_level[level] + 1);
            const std::string sub = gid + ".s" + std::to_string(level + 1);
            block.children.insert(block.children.begin() + static_cast<std::ptrdiff_t>(at), Node::make_nest(sub, std::move(body)));
        }
        body = std::move(block);
    }

    CorpusRecord rec;
    rec.workflow.id = "w" + gid.substr(1);
    rec.workflow.goal_id = gid;
    rec.workflow.root = std::move(body);

    if (plant) {
        const Workflow pattern = planted_pattern(profile.planted->length);
        std::vector<TaskNode*> slots;
        collect_tasks_mut(rec.workflow.root, slots);
        const std::size_t start = rng.below(n - profile.planted->length + 1);
        const auto pattern_tasks = tasks_in_order(pattern.root);
        for (std::size_t k = 0; k < pattern_tasks.size(); ++k) {
            *slots[start + k] = *pattern_tasks[k];
        }
        rec.planted.push_back({ tool_sequence(pattern.root), { start } });
    } else {
        wrap_branches(rec.workflow.root, rng);
    }
    rec.workflow.root = canonical(rec.workflow.root);
    assign_schemas(rec.workflow);
    rec.goal = goal_for(gid, index, rng, rec.workflow);
    rec.labels = bucket_for(measure(rec.workflow.root));
    return rec;
}

json histogram_json(const std::map<std::size_t, double>& h)
{
    json j = json::object();
    for (const auto& [k, v] : h) {
        j[std::to_string(k)] = v;
    }
    return j;
}

std::map<std::size_t, double> histogram_from_json(const json& j)
{
    std::map<std::size_t, double> h;
    for (const auto& [k, v] : j.items()) {
        h[static_cast<std::size_t>(std::stoul(k))] = v.get<double>();
    }
    return h;
}

std::map<std::size_t, double> empirical(const std::vector<CorpusRecord>& records, bool depth)
{
    std::map<std::size_t, double> h;
    if (records.empty()) {
        return h;
    }
    for (const auto& r : records) {
        const auto m = measure(r.workflow.root);
        h[depth ? m.depth : m.length] += 1.0;
    }
    for (auto& [k, v] : h) {
        v /= static_cast<double>(records.size());
    }
    return h;
}

} // namespace

void CorpusProfile::check() const
{
    auto check_hist = [](const std::map<std::size_t, double>& h, const char* what, std::size_t min_key) {
        if (h.empty()) {
            throw ConfigError(std::string(what) + " histogram is empty");
        }
        double sum = 0.0;
        for (const auto& [k, v] : h) {
            if (k < min_key || v < 0.0) {
                throw ConfigError(std::string(what) + " histogram has an invalid entry");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError(std::string(what) + " proportions must sum to 1");
        }
    };
    check_hist(node_histogram, "node", 1);
    check_hist(depth_histogram, "depth", 0);
    if (tool_vocab_size == 0) {
        throw ConfigError("tool vocabulary must be non-empty");
    }
    if (planted && (planted->length < 2 || planted->length > 5 || planted->rate < 0.0 || planted->rate > 1.0)) {
        throw ConfigError("planted subflows need length 2..5 and a rate in [0, 1]");
    }
}

std::map<std::size_t, double> normalized(const std::map<std::size_t, double>& counts)
{
    double total = 0.0;
    for (const auto& [k, v] : counts) {
        total += v;
    }
    std::map<std::size_t, double> out;
    for (const auto& [k, v] : counts) {
        out[k] = v / total;
    }
    return out;
}

CorpusProfile default_profile()
{
    CorpusProfile p;
    p.node_histogram = normalized({ { 1, 14508 }, { 2, 2252 }, { 3, 4496 }, { 4, 1166 }, { 5, 476 }, { 6, 226 }, { 7, 103 },
        { 8, 143 }, { 9, 51 }, { 10, 5 }, { 11, 28 }, { 12, 2 }, { 13, 33 }, { 14, 1 }, { 16, 11 } });
    p.depth_histogram = normalized({ { 0, 16434 }, { 1, 6425 }, { 2, 451 }, { 3, 121 }, { 4, 56 }, { 5, 18 }, { 6, 16 } });
    return p;
}

BucketLabels bucket_for(const StructMetrics& m)
{
    if (m.depth == 0) {
        const char* size = m.length <= 1 ? "single" : m.length <= 3 ? "small" : m.length <= 6 ? "medium" : "large";
        return { "linear", size };
    }
    const char* size = m.depth <= 2 ? "small" : m.depth <= 4 ? "medium" : "large";
    return { "nested", size };
}

TaskNode catalog_tool(std::size_t i)
{
    Rng r(derive_seed(kCatalogSeed, i));
    static constexpr std::size_t kInputs[] = { 0, 1, 1, 2 };
    const std::size_t n_in = kInputs[r.below(4)];
    const std::size_t n_out = 1 + r.below(2);
    std::vector<std::size_t> fields(kFieldCount);
    std::iota(fields.begin(), fields.end(), std::size_t { 0 });
    r.shuffle(fields);
    TaskNode t;
    char buf[16];
    std::snprintf(buf, sizeof buf, "tool%02zu", i);
    t.tool_id = buf;
    for (std::size_t k = 0; k < n_in; ++k) {
        t.inputs.insert(field_name(fields[k]));
    }
    for (std::size_t k = 0; k < n_out; ++k) {
        t.outputs.insert(field_name(fields[n_in + k]));
    }
    return t;
}

Workflow planted_pattern(std::size_t length)
{
    Workflow w;
    w.id = "pattern" + std::to_string(length);
    w.goal_id = w.id;
    for (std::size_t k = 0; k < length; ++k) {
        TaskNode t;
        t.tool_id = "pat" + std::to_string(length) + "_" + std::to_string(k);
        if (k > 0) {
            t.inputs = { "p" + std::to_string(length) + "_" + std::to_string(k - 1) };
        }
        t.outputs = { "p" + std::to_string(length) + "_" + std::to_string(k) };
        w.root.children.push_back(Node::make_task(std::move(t)));
    }
    w.declared_outputs = { "p" + std::to_string(length) + "_" + std::to_string(length - 1) };
    return w;
}

std::vector<CorpusRecord> generate(const CorpusProfile& profile, std::uint64_t seed)
{
    profile.check();
    // Nodes and depth share one uniform draw, so depth d needs P(depth >= k) <= P(nodes >= k + 1).
    for (const auto& [k, v] : profile.depth_histogram) {
        if (k > 0 && v > 0.0 && tail_mass(profile.depth_histogram, k) > tail_mass(profile.node_histogram, k + 1) + 1e-12) {
            throw InfeasibleProfile("depth " + std::to_string(k) + " carries more mass than flows with enough nodes");
        }
    }
    if (profile.planted && profile.planted->rate > tail_mass(profile.node_histogram, profile.planted->length) + 1e-12) {
        throw InfeasibleProfile("planting rate exceeds the share of flows long enough to hold the pattern");
    }
    std::vector<CorpusRecord> out;
    out.reserve(profile.total);
    for (std::size_t i = 0; i < profile.total; ++i) {
        out.push_back(generate_one(profile, seed, i));
    }
    return out;
}

SplitResult split(const std::vector<CorpusRecord>& corpus, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw PreconditionViolation("train fraction must lie in (0, 1)");
    }
    std::map<std::string, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        buckets[corpus[i].labels.key()].push_back(i);
    }
    // Largest-remainder quotas so the total matches round(fraction * N) exactly.
    const auto total_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(corpus.size())));
    std::map<std::string, std::size_t> quota;
    std::vector<std::pair<double, std::string>> remainders;
    std::size_t assigned = 0;
    for (const auto& [key, idx] : buckets) {
        const double exact = train_fraction * static_cast<double>(idx.size());
        quota[key] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[key];
        remainders.emplace_back(exact - std::floor(exact), key);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total_train && r < remainders.size(); ++r) {
        ++quota[remainders[r].second];
        ++assigned;
    }

    std::vector<bool> in_train(corpus.size(), false);
    for (auto& [key, idx] : buckets) {
        Rng rng(derive_seed(seed, hash_string(key)));
        std::vector<std::size_t> order = idx;
        rng.shuffle(order);
        for (std::size_t k = 0; k < quota[key]; ++k) {
            in_train[order[k]] = true;
        }
    }
    SplitResult out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (in_train[i] ? out.train : out.test).push_back(corpus[i]);
    }
    return out;
}

std::vector<CorpusRecord> make_novel_goals(const std::vector<CorpusRecord>& train, std::uint64_t seed, const NovelSpec& spec)
{
    if (spec.min_parts < 2 || spec.max_parts < spec.min_parts) {
        throw PreconditionViolation("composites need at least two parts");
    }
    std::vector<const CorpusRecord*> atomic;
    for (const auto& r : train) {
        if (!r.goal.subgoal_template) {
            atomic.push_back(&r);
        }
    }
    const bool nested = spec.structure == Structure::Nested;
    std::vector<const CorpusRecord*> pool;
    for (const auto* r : atomic) {
        if (nested || measure(r->workflow.root).depth == 0) {
            pool.push_back(r);
        }
    }
    if (pool.size() < spec.max_parts) {
        throw PreconditionViolation("training set has too few atomic goals for composites");
    }

    std::vector<CorpusRecord> out;
    const std::string prefix = nested ? "nov-n" : "nov-l";
    for (std::size_t i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(seed, hash_string(prefix), i));
        const std::size_t parts = spec.min_parts + rng.below(spec.max_parts - spec.min_parts + 1);

        // Nested composites cycle through target depth bands via an anchor part.
        std::size_t lo = 0;
        std::size_t hi = SIZE_MAX;
        if (nested) {
            static constexpr std::size_t kBands[3][2] = { { 0, 1 }, { 2, 3 }, { 4, SIZE_MAX } };
            lo = kBands[i % 3][0];
            hi = kBands[i % 3][1];
        }
        std::vector<const CorpusRecord*> band;
        for (const auto* r : pool) {
            const auto depth = measure(r->workflow.root).depth;
            if (depth >= lo && depth <= hi) {
                band.push_back(r);
            }
        }
        if (band.empty()) {
            band = pool;
        }

        std::vector<const CorpusRecord*> chosen;
        for (std::size_t attempt = 0; attempt < 64 && chosen.size() < parts; ++attempt) {
            chosen.assign(1, band[rng.below(band.size())]);
            const std::size_t anchor_depth = measure(chosen[0]->workflow.root).depth;
            FieldSet available = bound_fields(chosen[0]->workflow);
            for (std::size_t tries = 0; tries < 4096 && chosen.size() < parts; ++tries) {
                const auto* cand = pool[rng.below(pool.size())];
                if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) {
                    continue;
                }
                if (nested && measure(cand->workflow.root).depth > anchor_depth) {
                    continue;
                }
                const auto& need = cand->workflow.declared_inputs;
                if (!std::includes(available.begin(), available.end(), need.begin(), need.end())) {
                    continue;
                }
                chosen.push_back(cand);
                const FieldSet more = bound_fields(cand->workflow);
                available.insert(more.begin(), more.end());
            }
        }
        if (chosen.size() < parts) {
            throw PreconditionViolation("could not chain " + std::to_string(parts) + " parts from the training set");
        }

        CorpusRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%06zu", prefix.c_str(), i);
        rec.goal.id = buf;
        Workflow body;
        std::vector<std::string> tmpl;
        for (const auto* p : chosen) {
            body = concat(body, p->workflow);
            tmpl.push_back(p->goal.id);
            rec.goal.tokens.insert(p->goal.tokens.begin(), p->goal.tokens.end());
        }
        body.declared_inputs = chosen[0]->workflow.declared_inputs;
        Workflow expected = body;
        if (nested) {
            expected.root = Node::make_seq({ Node::make_nest(rec.goal.id, canonical(body.root)) });
        }
        expected.id = "w" + rec.goal.id;
        expected.goal_id = rec.goal.id;
        expected.root = canonical(expected.root);
        rec.goal.input_schema = expected.declared_inputs;
        rec.goal.output_schema = expected.declared_outputs;
        rec.goal.subgoal_template = std::move(tmpl);
        rec.workflow = std::move(expected);
        rec.labels = bucket_for(measure(rec.workflow.root));
        out.push_back(std::move(rec));
    }
    return out;
}

double l1_distance(const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b)
{
    double d = 0.0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        d += std::abs(v - (it == b.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : b) {
        if (!a.contains(k)) {
            d += std::abs(v);
        }
    }
    return d;
}

std::map<std::size_t, double> node_histogram(const std::vector<CorpusRecord>& records)
{
    return empirical(records, false);
}

std::map<std::size_t, double> depth_histogram(const std::vector<CorpusRecord>& records)
{
    return empirical(records, true);
}

json to_json(const CorpusRecord& r, bool include_oracle)
{
    json j = { { "goal", to_json(r.goal, false) }, { "workflow", to_json(r.workflow) },
        { "labels", { { "structure", r.labels.structure }, { "size", r.labels.size } } } };
    if (include_oracle) {
        json oracle = json::object();
        if (r.goal.subgoal_template) {
            oracle["subgoal_template"] = *r.goal.subgoal_template;
        }
        json planted = json::array();
        for (const auto& p : r.planted) {
            planted.push_back({ { "pattern", p.pattern }, { "path", to_json(p.path) } });
        }
        oracle["planted"] = std::move(planted);
        j["oracle"] = std::move(oracle);
    }
    return j;
}

CorpusRecord record_from_json(const json& j)
{
    try {
        CorpusRecord r;
        r.goal = goal_from_json(j.at("goal"), false);
        r.workflow = workflow_from_json(j.at("workflow"));
        r.labels = { j.at("labels").at("structure").get<std::string>(), j.at("labels").at("size").get<std::string>() };
        if (j.contains("oracle")) {
            const auto& o = j.at("oracle");
            if (o.contains("subgoal_template")) {
                r.goal.subgoal_template = o.at("subgoal_template").get<std::vector<std::string>>();
            }
            if (o.contains("planted")) {
                for (const auto& p : o.at("planted")) {
                    r.planted.push_back({ p.at("pattern").get<std::vector<std::string>>(), p.at("path").get<Path>() });
                }
            }
        }
        return r;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed corpus record: ") + e.what());
    }
}

json to_json(const CorpusProfile& p)
{
    json j = { { "total", p.total }, { "node_histogram", histogram_json(p.node_histogram) },
        { "depth_histogram", histogram_json(p.depth_histogram) }, { "tool_vocab_size", p.tool_vocab_size } };
    if (p.planted) {
        j["planted"] = { { "length", p.planted->length }, { "rate", p.planted->rate } };
    }
    return j;
}

CorpusProfile profile_from_json(const json& j)
{
    try {
        CorpusProfile p = default_profile();
        if (j.contains("total")) {
            p.total = j.at("total").get<std::size_t>();
        }
        if (j.contains("node_histogram")) {
            p.node_histogram = normalized(histogram_from_json(j.at("node_histogram")));
        }
        if (j.contains("depth_histogram")) {
            p.depth_histogram = normalized(histogram_from_json(j.at("depth_histogram")));
        }
        if (j.contains("tool_vocab_size")) {
            p.tool_vocab_size = j.at("tool_vocab_size").get<std::size_t>();
        }
        if (j.contains("planted")) {
            p.planted = PlantSpec { j.at("planted").at("length").get<std::size_t>(), j.at("planted").at("rate").get<double>() };
        }
        p.check();
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed profile: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("malformed profile: histogram keys must be integers");
    }
}

std::vector<CorpusRecord> read_corpus(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::vector<CorpusRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const IoError& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records)
{
    std::string text;
    for (const auto& r : records) {
        text += to_json(r).dump();
        text += '\n';
    }
    write_file_atomic(path, text);
}

} // namespace agentnet
