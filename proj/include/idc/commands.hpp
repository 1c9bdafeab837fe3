#pragma once

// Command-line front end. Every subcommand is a function of a resolved JSON
// configuration, so tests can drive it without spawning processes.

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace idc::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kInvalidConfig = 2, kIoError = 3, kStageFailure = 4 };

// Default output directory: $IDC_OUT_DIR if set, else "idc_out".
std::string default_out_dir();

json default_config();

// Parses argv (argv[0] is the program name), runs the subcommand and returns
// the exit code. Diagnostics go to `err`, short summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Subcommands on a fully resolved configuration. Throw idc::Error.
void cmd_simulate(const json& cfg, std::ostream& out);
void cmd_idealise(const json& cfg, std::ostream& out);
void cmd_discretise(const json& cfg, std::ostream& out);
void cmd_infer(const json& cfg, std::ostream& out);
void cmd_pipeline(const json& cfg, std::ostream& out);
void cmd_markov_test(const json& cfg, std::ostream& out);
void cmd_dwell(const json& cfg, std::ostream& out);
void cmd_reproduce(const json& cfg, std::ostream& out);

const std::vector<std::string>& study_ids();

}  // namespace idc::cli
