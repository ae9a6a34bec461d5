// Command-line driver: dddp <command> [--config FILE] [--option value ...]
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dddp/app.hpp"
#include "dddp/io.hpp"

int main(int argc, char** argv) {
  using namespace dddp::app;
  CLI::App cli{"Delayed DDP experiments"};
  std::string command;
  ExperimentConfig cfg;
  cli.add_option("command", command, "solve | oracle | check-derivs | noise | cross | train-pendulum | pendulum")
      ->required()
      ->configurable(false)
      ->check(CLI::IsMember(command_names()));
  cli.set_config("--config", "", "INI-style file of option = value lines; flags override it");
  cli.allow_config_extras(false);
  register_options(cli, cfg);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kBadConfig;
  }

  try {
    cfg.validate();
    std::filesystem::create_directories(cfg.output);
    std::ofstream echo(std::filesystem::path(cfg.output) / "config.cfg");
    echo << cli.config_to_str(true, false);
    echo.close();
    return run_command(command, cfg, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const dddp::io::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kToleranceFailure;
  }
}
