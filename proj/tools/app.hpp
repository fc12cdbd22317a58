#pragma once

// Resolved configuration of one nmln run and the entry point that executes it.
// Every run writes into out_dir: config.json plus model/, metrics/, samples/
// and logs/.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nmln/potential.hpp>
#include <nmln/tasks.hpp>
#include <nmln/trainer.hpp>

namespace nmln::cli {

struct RunConfig {
  std::string task;  // train | complete | classify | generate | oracle | eval

  std::filesystem::path signature;
  std::vector<std::filesystem::path> train;
  std::filesystem::path valid;
  std::filesystem::path test;
  std::filesystem::path model;
  std::filesystem::path rules;
  std::filesystem::path constraints;
  std::filesystem::path out_dir = "run";
  bool auto_extend = false;

  ModelSpec spec;
  TrainConfig training;
  MarginalConfig marginals;
  std::vector<int> hits = {1, 3, 10};

  int top_n = 10;
  int last_n = 0;
  int collect_from_epoch = 0;
  int log_every = 10;

  std::uint64_t seed = 42;
};

/// Executes the task; returns the process exit status. Errors are reported on
/// `err` with the task name prepended.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv into a RunConfig. Returns nullopt after printing help or a
/// usage error; `status` receives the exit code in that case.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, int& status);

}  // namespace nmln::cli
