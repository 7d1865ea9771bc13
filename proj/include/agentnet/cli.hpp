#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentnet/agent_net.hpp"

namespace agentnet {

struct Command {
    std::string verb;
    // Flag name without dashes -> value; repeated flags are joined with ','.
    std::map<std::string, std::string> options;

    bool has(const std::string& key) const { return options.contains(key); }
    const std::string& get(const std::string& key) const { return options.at(key); }
};

// Throws ConfigError on usage errors (unknown verb or flag, missing required flag).
// --help yields verb "help" with the usage text under "text".
Command parse_args(int argc, const char* const* argv);

// Effective settings after merging built-ins, the config file and flags.
struct Settings {
    double theta = 0.8;
    double eta = 0.95;
    std::vector<std::size_t> k_list { 1, 3, 5 };
    std::size_t budget = 5;
    std::uint64_t seed = 0;
    LifeConfig life;
};

// Config file comes from --config, else the AGENTNET_CONFIG environment
// variable (passed in as `env_path`), else none.
Settings resolve_settings(const Command& cmd, const char* env_path);

std::vector<std::size_t> parse_k_list(const std::string& text);

// Runs the command; returns the process exit code. Errors propagate.
int dispatch(const Command& cmd, std::ostream& out);

// parse + dispatch with exit-code mapping: 0 ok, 2 usage/config, 3 I/O, 4 internal.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace agentnet
