#include "agentnet/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "agentnet/corpus.hpp"
#include "agentnet/errors.hpp"
#include "agentnet/eval.hpp"
#include "agentnet/io.hpp"
#include "agentnet/orchestrator.hpp"
#include "agentnet/workflow_json.hpp"

namespace agentnet {

using nlohmann::json;

namespace {

struct FlagSpec {
    const char* name;
    bool required = false;
    bool is_switch = false;
    bool repeatable = false;
};

const std::vector<FlagSpec> kCommon { { "config" }, { "seed" } };
const std::vector<FlagSpec> kSolveTuning { { "theta" }, { "eta" }, { "k" }, { "budget" }, { "mode" } };

const std::map<std::string, std::string> kVerbHelp {
    { "gen-corpus", "Generate a synthetic corpus, optionally split it, or build novel composites from a training file" },
    { "build-net", "Build an agent network snapshot from a training corpus" },
    { "solve", "Solve one goal from a test corpus and write the episode transcript" },
    { "eval", "Run every test goal and write report.json, report.csv and transcripts.jsonl" },
    { "ablate", "Same as eval with components switched off (--disable, repeatable)" },
    { "report", "Print a saved report as CSV" },
};

std::map<std::string, std::vector<FlagSpec>> verb_flags()
{
    auto join = [](std::vector<FlagSpec> a, const std::vector<FlagSpec>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    std::vector<FlagSpec> eval_flags = join(join({ { "train", true }, { "test", true }, { "out-dir" }, { "threads" }, { "batch" },
                                                     { "sweep", false, true }, { "library" } },
                                                kSolveTuning),
        kCommon);
    std::vector<FlagSpec> ablate_flags = eval_flags;
    ablate_flags.push_back({ "disable", true, false, true });
    return {
        { "gen-corpus", join({ { "out", true }, { "profile" }, { "n" }, { "plant-length" }, { "plant-rate" }, { "split" }, { "train-out" },
                                 { "test-out" }, { "from-train" }, { "structure" }, { "count" }, { "parts" } },
                            kCommon) },
        { "build-net", join({ { "train", true }, { "out", true } }, kCommon) },
        { "solve", join(join({ { "train", true }, { "test", true }, { "goal", true }, { "net" }, { "out" } }, kSolveTuning), kCommon) },
        { "eval", eval_flags },
        { "ablate", ablate_flags },
        { "report", { { "in", true }, { "csv" } } },
    };
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    std::istringstream in(text);
    T v {};
    in >> v;
    if (!in || !in.eof()) {
        throw ConfigError("--" + key + " expects a number, got '" + text + "'");
    }
    return v;
}

void require_file(const std::string& path)
{
    if (!std::filesystem::exists(path)) {
        throw ConfigError("input file '" + path + "' does not exist");
    }
}

void apply_config_file(Settings& s, const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    static const std::set<std::string> known { "theta", "eta", "k_list", "budget", "seed", "L_init", "L_max", "alphas", "betas",
        "refresh_period", "drift_threshold" };
    try {
        for (const auto& [key, value] : j.items()) {
            if (!known.contains(key)) {
                throw ConfigError("config file '" + path + "': unknown key '" + key + "'");
            }
        }
        if (j.contains("theta")) {
            s.theta = j["theta"].get<double>();
        }
        if (j.contains("eta")) {
            s.eta = j["eta"].get<double>();
        }
        if (j.contains("k_list")) {
            s.k_list = j["k_list"].get<std::vector<std::size_t>>();
        }
        if (j.contains("budget")) {
            s.budget = j["budget"].get<std::size_t>();
        }
        if (j.contains("seed")) {
            s.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("L_init")) {
            s.life.L_init = j["L_init"].get<double>();
        }
        if (j.contains("L_max")) {
            s.life.L_max = j["L_max"].get<double>();
        }
        if (j.contains("alphas")) {
            s.life.alphas = j["alphas"].get<std::array<double, 3>>();
        }
        if (j.contains("betas")) {
            s.life.betas = j["betas"].get<std::array<double, 3>>();
        }
        if (j.contains("refresh_period")) {
            s.life.refresh_period = j["refresh_period"].get<std::uint64_t>();
        }
        if (j.contains("drift_threshold")) {
            s.life.drift_threshold = j["drift_threshold"].get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
}

VerifyMode parse_mode(const Command& cmd)
{
    if (!cmd.has("mode") || cmd.get("mode") == "oracle") {
        return VerifyMode::Oracle;
    }
    if (cmd.get("mode") == "goal") {
        return VerifyMode::GoalAnchored;
    }
    throw ConfigError("--mode must be 'oracle' or 'goal'");
}

SolveConfig solve_config(const Settings& s, const Command& cmd)
{
    SolveConfig sc;
    sc.theta = s.theta;
    sc.eta = s.eta;
    sc.budget = s.budget;
    sc.seed = s.seed;
    sc.k = s.k_list.back();
    sc.mode = parse_mode(cmd);
    return sc;
}

std::vector<TrainingPair> training_pairs(const std::vector<CorpusRecord>& train)
{
    std::vector<TrainingPair> pairs;
    for (const auto& r : train) {
        pairs.push_back({ r.goal, r.workflow });
    }
    return pairs;
}

std::string format_pct(double v)
{
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << v * 100.0 << "%";
    return s.str();
}

int run_gen_corpus(const Command& cmd, const Settings& s, std::ostream& out)
{
    const std::string& dest = cmd.get("out");
    if (cmd.has("from-train")) {
        require_file(cmd.get("from-train"));
        const auto train = read_corpus(cmd.get("from-train"));
        NovelSpec spec;
        if (cmd.has("count")) {
            spec.count = parse_number<std::size_t>("count", cmd.get("count"));
        }
        if (cmd.has("parts")) {
            const auto parts = parse_k_list(cmd.get("parts"));
            if (parts.size() != 2) {
                throw ConfigError("--parts expects MIN,MAX");
            }
            spec.min_parts = parts[0];
            spec.max_parts = parts[1];
        }
        if (cmd.has("structure")) {
            const auto& st = cmd.get("structure");
            if (st != "linear" && st != "nested") {
                throw ConfigError("--structure must be 'linear' or 'nested'");
            }
            spec.structure = st == "nested" ? Structure::Nested : Structure::Linear;
        }
        const auto novel = make_novel_goals(train, s.seed, spec);
        write_corpus(dest, novel);
        out << "wrote " << novel.size() << " novel records to " << dest << "\n";
        return 0;
    }

    CorpusProfile profile = default_profile();
    if (cmd.has("profile") && cmd.get("profile") != "default") {
        require_file(cmd.get("profile"));
        try {
            profile = profile_from_json(json::parse(read_file(cmd.get("profile"))));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("profile: ") + e.what());
        }
    }
    if (cmd.has("n")) {
        profile.total = parse_number<std::size_t>("n", cmd.get("n"));
    }
    if (cmd.has("plant-length") || cmd.has("plant-rate")) {
        PlantSpec p;
        if (cmd.has("plant-length")) {
            p.length = parse_number<std::size_t>("plant-length", cmd.get("plant-length"));
        }
        if (cmd.has("plant-rate")) {
            p.rate = parse_number<double>("plant-rate", cmd.get("plant-rate"));
        }
        profile.planted = p;
    }
    if (cmd.has("split") && !(cmd.has("train-out") && cmd.has("test-out"))) {
        throw ConfigError("--split needs --train-out and --test-out");
    }
    profile.check();
    const auto records = generate(profile, s.seed);
    write_corpus(dest, records);
    out << "wrote " << records.size() << " records to " << dest;
    if (cmd.has("split")) {
        const auto parts = split(records, parse_number<double>("split", cmd.get("split")), s.seed);
        write_corpus(cmd.get("train-out"), parts.train);
        write_corpus(cmd.get("test-out"), parts.test);
        out << " (train " << parts.train.size() << ", test " << parts.test.size() << ")";
    }
    out << "\n";
    return 0;
}

int run_build_net(const Command& cmd, const Settings& s, std::ostream& out)
{
    require_file(cmd.get("train"));
    const auto train = read_corpus(cmd.get("train"));
    const AgentNetwork net = build_agents(training_pairs(train), s.life, {}, s.seed);
    write_file_atomic(cmd.get("out"), net.snapshot().dump() + "\n");
    out << "built " << net.active().size() << " agents into " << cmd.get("out") << "\n";
    return 0;
}

int run_solve(const Command& cmd, const Settings& s, std::ostream& out)
{
    require_file(cmd.get("train"));
    require_file(cmd.get("test"));
    const auto train = read_corpus(cmd.get("train"));
    const auto test = read_corpus(cmd.get("test"));
    const CorpusRecord* rec = nullptr;
    for (const auto& r : test) {
        if (r.goal.id == cmd.get("goal")) {
            rec = &r;
        }
    }
    if (!rec) {
        throw ConfigError("goal '" + cmd.get("goal") + "' not found in " + cmd.get("test"));
    }
    AgentNetwork net = build_agents(training_pairs(train), s.life, {}, s.seed);
    if (cmd.has("net")) {
        require_file(cmd.get("net"));
        try {
            net.restore(json::parse(read_file(cmd.get("net"))));
        } catch (const json::exception& e) {
            throw IoError(cmd.get("net") + ": " + e.what());
        }
    }
    Target target { rec->goal, rec->workflow };
    target.goal.subgoal_template.reset();
    const EpisodeResult ep = solve(net, target, solve_config(s, cmd));
    const std::string line = to_json(ep).dump() + "\n";
    if (cmd.has("out")) {
        write_file_atomic(cmd.get("out"), line);
    }
    const auto rank = ep.first_correct_rank();
    out << "goal " << ep.goal_id << ": " << (rank ? "solved at rank " + std::to_string(*rank) : std::string("unsolved"));
    if (cmd.has("out")) {
        out << ", transcript " << cmd.get("out");
    }
    out << "\n";
    return 0;
}

int run_eval(const Command& cmd, const Settings& s, std::ostream& out)
{
    require_file(cmd.get("train"));
    require_file(cmd.get("test"));
    ExperimentConfig cfg;
    cfg.k_list = s.k_list;
    cfg.solve = solve_config(s, cmd);
    cfg.life = s.life;
    if (cmd.has("threads")) {
        cfg.parallelism = parse_number<std::size_t>("threads", cmd.get("threads"));
    }
    if (cmd.has("batch")) {
        cfg.batch_size = parse_number<std::size_t>("batch", cmd.get("batch"));
    }
    cfg.sweep = cmd.has("sweep");
    if (cmd.has("disable")) {
        std::stringstream list(cmd.get("disable"));
        std::string item;
        while (std::getline(list, item, ',')) {
            if (!ablation_components().contains(item)) {
                throw ConfigError("unknown component '" + item + "'");
            }
            cfg.disabled.insert(item);
        }
    }
    if (cmd.has("library")) {
        require_file(cmd.get("library"));
        for (const auto& row : read_jsonl(cmd.get("library"))) {
            cfg.library.push_back(workflow_from_json(row.contains("workflow") ? row.at("workflow") : row));
        }
    }
    cfg.check();
    const auto train = read_corpus(cmd.get("train"));
    const auto test = read_corpus(cmd.get("test"));
    const auto result = run_experiment(cfg, train, test);
    result.report.check_monotone();

    const std::filesystem::path dir = cmd.has("out-dir") ? cmd.get("out-dir") : ".";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }
    const auto report_path = (dir / "report.json").string();
    write_file_atomic(report_path, to_json(result.report).dump() + "\n");
    write_file_atomic((dir / "report.csv").string(), to_csv(result.report));
    write_file_atomic((dir / "transcripts.jsonl").string(), to_jsonl(result.transcripts));
    out << "pass@" << cfg.k_list.front() << " " << format_pct(result.report.pass_at.contains("all") ? result.report.pass_at.at("all").at(cfg.k_list.front()) : 0.0)
        << " over " << result.report.episodes << " episodes, report " << report_path << "\n";
    return 0;
}

int run_report(const Command& cmd, std::ostream& out)
{
    require_file(cmd.get("in"));
    MetricsReport r;
    try {
        r = report_from_json(json::parse(read_file(cmd.get("in"))));
    } catch (const json::exception& e) {
        throw IoError(cmd.get("in") + ": " + e.what());
    }
    r.check_monotone();
    const std::string csv = to_csv(r);
    if (cmd.has("csv")) {
        write_file_atomic(cmd.get("csv"), csv);
        out << "wrote " << cmd.get("csv") << "\n";
    } else {
        out << csv;
    }
    return 0;
}

} // namespace

std::vector<std::size_t> parse_k_list(const std::string& text)
{
    std::vector<std::size_t> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        out.push_back(parse_number<std::size_t>("k", item));
    }
    if (out.empty()) {
        throw ConfigError("empty list");
    }
    return out;
}

Command parse_args(int argc, const char* const* argv)
{
    CLI::App app("Workflow orchestration engine", "agentnet");
    app.require_subcommand(1);
    const auto specs = verb_flags();
    std::map<std::string, std::map<std::string, std::string>> scalar;
    std::map<std::string, std::map<std::string, std::vector<std::string>>> multi;
    std::map<std::string, std::map<std::string, bool>> switches;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [verb, flags] : specs) {
        CLI::App* sub = app.add_subcommand(verb, kVerbHelp.at(verb));
        subs[verb] = sub;
        for (const auto& f : flags) {
            const std::string flag = std::string("--") + f.name;
            CLI::Option* opt = nullptr;
            if (f.is_switch) {
                opt = sub->add_flag(flag, switches[verb][f.name]);
            } else if (f.repeatable) {
                opt = sub->add_option(flag, multi[verb][f.name]);
            } else {
                opt = sub->add_option(flag, scalar[verb][f.name]);
            }
            if (f.required) {
                opt->required();
            }
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const auto parsed = app.get_subcommands();
        return { "help", { { "text", parsed.empty() ? app.help() : parsed.front()->help() } } };
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }
    Command cmd;
    for (const auto& [verb, sub] : subs) {
        if (!sub->parsed()) {
            continue;
        }
        cmd.verb = verb;
        for (const auto& f : specs.at(verb)) {
            if (sub->get_option(std::string("--") + f.name)->count() == 0) {
                continue;
            }
            if (f.is_switch) {
                cmd.options[f.name] = "true";
            } else if (f.repeatable) {
                std::string joined;
                for (const auto& v : multi[verb][f.name]) {
                    joined += (joined.empty() ? "" : ",") + v;
                }
                cmd.options[f.name] = joined;
            } else {
                cmd.options[f.name] = scalar[verb][f.name];
            }
        }
    }
    return cmd;
}

Settings resolve_settings(const Command& cmd, const char* env_path)
{
    Settings s;
    if (cmd.has("config")) {
        apply_config_file(s, cmd.get("config"));
    } else if (env_path && *env_path) {
        apply_config_file(s, env_path);
    }
    if (cmd.has("theta")) {
        s.theta = parse_number<double>("theta", cmd.get("theta"));
    }
    if (cmd.has("eta")) {
        s.eta = parse_number<double>("eta", cmd.get("eta"));
    }
    if (cmd.has("k")) {
        s.k_list = parse_k_list(cmd.get("k"));
    }
    if (cmd.has("budget")) {
        s.budget = parse_number<std::size_t>("budget", cmd.get("budget"));
    }
    if (cmd.has("seed")) {
        s.seed = parse_number<std::uint64_t>("seed", cmd.get("seed"));
    }
    s.life.check();
    if (s.k_list.empty()) {
        throw ConfigError("k list must not be empty");
    }
    return s;
}

int dispatch(const Command& cmd, std::ostream& out)
{
    if (cmd.verb == "help") {
        out << cmd.get("text");
        return 0;
    }
    const Settings s = resolve_settings(cmd, std::getenv("AGENTNET_CONFIG"));
    if (cmd.verb == "gen-corpus") {
        return run_gen_corpus(cmd, s, out);
    }
    if (cmd.verb == "build-net") {
        return run_build_net(cmd, s, out);
    }
    if (cmd.verb == "solve") {
        return run_solve(cmd, s, out);
    }
    if (cmd.verb == "eval" || cmd.verb == "ablate") {
        return run_eval(cmd, s, out);
    }
    if (cmd.verb == "report") {
        return run_report(cmd, out);
    }
    throw ConfigError("unknown verb '" + cmd.verb + "'");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    try {
        return dispatch(parse_args(argc, argv), out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return 3;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 4;
    }
}

} // namespace agentnet
