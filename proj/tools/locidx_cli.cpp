// locidx command line: stage checks and scenario runs.
#include <locidx/commands.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace locidx;

namespace {

struct Globals {
  std::string out = "locidx_out";
  int threads = 1;
  std::uint64_t seed = 1;
  bool csv = false;
  bool json = false;

  OutputFormat format() const { return json ? OutputFormat::json : OutputFormat::csv; }
};

void print_verdicts(const std::string& who, const std::vector<Verdict>& vs) {
  for (const auto& v : vs) std::cout << who << "  " << (v.pass ? "PASS" : "FAIL") << "  " << v.clause << "  " << v.detail << '\n';
}

int finish(const std::string& who, const std::vector<Verdict>& vs, const std::filesystem::path& dir) {
  print_verdicts(who, vs);
  bool ok = all_pass(vs);
  std::cout << who << "  " << (ok ? "all verdicts pass" : "some verdicts fail") << "  (" << dir.string() << ")\n";
  return ok ? 0 : 1;
}

int run_index(const Globals& g, const ScenarioConfig& c) {
  auto rep = run_scenario(c, g.threads);
  auto dir = std::filesystem::path(g.out) / c.id;
  write_report(dir, rep, g.format());
  std::cout << c.id << "  " << rep.seconds << " s\n";
  return finish(c.id, rep.verdicts, dir);
}

int run_command(const Globals& g, const CommandResult& r, const std::string& id) {
  auto dir = std::filesystem::path(g.out) / (r.name + "-" + id);
  write_result(dir, r, g.format());
  return finish(r.name, r.verdicts, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized equivariant index checks for lattice Dirac operators"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)")->capture_default_str();
  app.add_option("--seed", g.seed, "seed for randomized probes")->capture_default_str();
  auto* csv = app.add_flag("--csv", g.csv, "write tables as CSV (default)");
  app.add_flag("--json", g.json, "write tables as JSON")->excludes(csv);

  std::string scen = "reflection-r1";
  double radius = 1.0;
  auto* ex = app.add_subcommand("exhaustion-check", "U-regularity table, plan checks and the averaged-functional example");
  ex->add_option("scenario", scen, "scenario id or file")->capture_default_str();
  ex->add_option("--r", radius, "penumbra radius")->capture_default_str();

  std::string heat_scen = "torus-identity";
  auto* ht = app.add_subcommand("heat-trace", "supertrace over the t grid and the equivariance defect");
  ht->add_option("scenario", heat_scen, "scenario id or file")->capture_default_str();

  std::string comm_scen = "commutator-r1";
  double center = 0.3, comm_tol = 1e-4;
  auto* ct = app.add_subcommand("commutator-test", "commutator functional of the heat family and M_psi D Q e");
  ct->add_option("scenario", comm_scen, "scenario id or file")->capture_default_str();
  ct->add_option("--center", center, "center of the bump psi")->capture_default_str();
  ct->add_option("--tol", comm_tol, "decay tolerance at the smallest t")->capture_default_str();

  std::string idx_scen;
  auto* iv = app.add_subcommand("index-verify", "analytic and geometric sides with verdicts");
  iv->add_option("scenario", idx_scen, "scenario id or file")->required();

  auto* sc = app.add_subcommand("scenario", "bundled scenarios");
  sc->require_subcommand(1);
  std::string file;
  auto* run = sc->add_subcommand("run", "run a scenario file");
  run->add_option("file", file, "scenario JSON")->required();
  auto* list = sc->add_subcommand("list", "list bundled scenarios");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ex) return run_command(g, exhaustion_check(resolve_scenario(scen), radius), resolve_scenario(scen).id);
    if (*ht) {
      auto c = resolve_scenario(heat_scen);
      return run_command(g, heat_trace(c, g.seed, g.threads), c.id);
    }
    if (*ct) {
      auto c = resolve_scenario(comm_scen);
      return run_command(g, commutator_test(c, center, comm_tol), c.id);
    }
    if (*iv) return run_index(g, resolve_scenario(idx_scen));
    if (*run) return run_index(g, load_scenario(file));
    if (*list) {
      for (const auto& p : list_scenarios()) {
        auto c = load_scenario(p.string());
        std::cout << c.id << "\t" << c.description << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
