#include "semiclassical/experiments.hpp"
#include "semiclassical/validate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>

namespace sc = semiclassical;

namespace {

enum Exit { ok = 0, invariant = 1, config = 2, numerical = 3 };

struct Flags {
  std::string config, out;
  int workers = 1;
  std::uint64_t seed = 0;
};

int cmd_validate(const Flags& f) {
  const auto checks = sc::validate_suite(f.seed);
  std::ofstream file;
  std::ostream& o = f.out.empty() ? std::cout : (file.open(f.out), file);
  int failed = 0;
  o << "# semiclassical " << sc::version() << " validate\n";
  o << "invariant,residual,tolerance,status\n";
  for (const auto& c : checks) {
    o << '"' << c.name << "\"," << std::setprecision(6) << c.residual << ',' << c.tol << ','
      << (c.pass() ? "pass" : "FAIL") << '\n';
    failed += !c.pass();
  }
  if (failed) std::cerr << failed << " invariant(s) failed\n";
  return failed ? invariant : ok;
}

using Runner = std::function<sc::ExperimentOutput(const sc::Config&, const sc::RunContext&)>;

int run_experiment(const Flags& f, const std::set<std::string>& keys, const Runner& run) {
  sc::Config c = f.config.empty() ? sc::Config{} : sc::Config::load(f.config, keys);
  if (!c.has("seed")) c.set("seed", std::to_string(f.seed));
  sc::RunContext ctx;
  ctx.workers = c.integer("workers", f.workers);
  ctx.seed = static_cast<std::uint64_t>(c.num("seed"));
  ctx.budget_seconds = c.num("budget_seconds", 600.0);
  ctx.log = &std::cerr;
  const auto out = run(c, ctx);
  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw sc::ConfigError("cannot write '" + f.out + "'");
  }
  sc::write_output(f.out.empty() ? std::cout : file, c.hash(), out);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical wavepacket propagation experiments"};
  app.set_version_flag("--version", sc::version());
  app.require_subcommand(1);
  Flags f;
  auto add = [&](const std::string& name, const std::string& help) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", f.config, "YAML config (flat key: value)");
    s->add_option("--out", f.out, "output path (default stdout)");
    s->add_option("--workers", f.workers, "concurrent sweep points")->check(CLI::PositiveNumber);
    s->add_option("--seed", f.seed, "random seed");
    return s;
  };
  auto* validate = add("validate", "run the invariant suites");
  auto* sweep = add("sweep-h", "error versus hbar with fitted slopes");
  auto* breakdown = add("breakdown", "time to error threshold versus |log hbar|");
  auto* hybrid = add("hybrid-demo", "segmented + hybrid pipeline on nh2d");
  auto* propagate = add("propagate", "single order-N propagation");
  auto* lyapunov = add("lyapunov", "Lyapunov rates and time thresholds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config;
  }

  try {
    if (*validate) return cmd_validate(f);
    if (*sweep) return run_experiment(f, sc::sweep_keys(), sc::run_sweep_h);
    if (*breakdown) return run_experiment(f, sc::breakdown_keys(), sc::run_breakdown);
    if (*hybrid) return run_experiment(f, sc::hybrid_keys(), sc::run_hybrid_demo);
    if (*propagate) return run_experiment(f, sc::propagate_keys(), sc::run_propagate);
    if (*lyapunov) return run_experiment(f, sc::lyapunov_keys(), sc::run_lyapunov);
  } catch (const sc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config;
  } catch (const sc::InvariantError& e) {
    std::cerr << "invariant failure: " << e.what() << '\n';
    return invariant;
  } catch (const sc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config;
  }
  return ok;
}
