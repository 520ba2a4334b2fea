#pragma once

#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace lungforge::cli {

struct Command {
  CLI::App* app = nullptr;
  std::function<int()> run;
};

/// Adds every subcommand to `app`. `argv` is recorded in run manifests.
std::vector<Command> register_commands(CLI::App& app, const std::vector<std::string>& argv);

}  // namespace lungforge::cli
