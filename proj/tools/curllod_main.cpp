#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "curllod/scenario.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::string dump_projection;
  int threads = 0;  // 0 = keep the config value
  bool inject_orientation_fault = false;
};

int run(const std::string& command, const Args& args) {
  curllod::Scenario sc = curllod::load_config(args.config);
  if (!args.out.empty()) sc.out = args.out;
  if (args.threads > 0) sc.threads = args.threads;
  sc.dump_projection = args.dump_projection;

  if (command == "check") {
    curllod::CheckOptions opts;
    opts.inject_orientation_fault = args.inject_orientation_fault;
    return curllod::cmd_check(sc, std::cout, opts);
  }
  if (command == "solve") return curllod::cmd_solve(sc, std::cout);
  if (command == "convergence") return curllod::cmd_convergence(sc, std::cout);
  return curllod::cmd_decay(sc, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solver for curl-curl problems with rough coefficients"};
  app.require_subcommand(1);

  Args args;
  const auto add_common = [&args](CLI::App* cmd) {
    cmd->add_option("--config", args.config, "Scenario config file (key = value)")->required();
    cmd->add_option("--out", args.out, "CSV output path (overrides the config)");
    cmd->add_option("--threads", args.threads, "Worker threads (overrides the config)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--dump-projection", args.dump_projection,
                    "Write the projection matrix as 'row col re im' lines");
  };

  CLI::App* check = app.add_subcommand("check", "Run the invariant suite");
  add_common(check);
  check->add_flag("--inject-orientation-fault", args.inject_orientation_fault)->group("");
  add_common(app.add_subcommand("solve", "One multiscale solve against the fine reference"));
  add_common(app.add_subcommand("convergence", "Error sweep over coarse resolutions"));
  add_common(app.add_subcommand("decay", "Truncation-error sweep over localization m"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), args);
  } catch (const curllod::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
