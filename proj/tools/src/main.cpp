#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "lungforge/errors.hpp"
#include "run_support.hpp"

int main(int argc, char** argv) {
  using namespace lungforge;
  using namespace lungforge::cli;

  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"lungforge: self-supervised contrast enhancement, contrastive pretraining and domain-gap "
               "analysis for chest radiographs"};
  app.set_version_flag("--version", LUNGFORGE_VERSION);
  app.footer(
      "Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.\n"
      "Environment: LUNGFORGE_THREADS caps the number of worker threads.");
  app.require_subcommand(1);
  const auto commands = register_commands(app, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (const auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      return c.run();
    } catch (const DivergenceError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitNumerical;
    } catch (const DegenerateInputError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitNumerical;
    } catch (const UndefinedMetricError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitNumerical;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const LockError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  return kExitUsage;
}
