#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "nmgme/runner.hpp"

namespace {

int fail(int code, const nmgme::json& payload) {
  std::cerr << payload.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed master equation engine for Gaussian non-Markovian dynamics"};
  std::string scenario, config_path, out_dir;
  long long grid = 0, order = -1, fock_dim = 0;
  bool dump_rho = false;
  app.add_option("scenario", scenario, "dephasing | hpz | qmupl | joos-zeh | oracle-check | coeffs")
      ->required()
      ->check(CLI::IsMember(nmgme::scenario_names()));
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_option("--grid", grid, "grid points G (overrides grid.points)");
  app.add_option("--order", order, "series order N (overrides series.max_order)");
  app.add_option("--fock-dim", fock_dim, "Fock truncation (overrides propagation.fock_dim)");
  app.add_flag("--dump-rho", dump_rho, "write flattened density matrices into trajectory.json");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(2, {{"error", "invalid_arguments"}, {"message", e.what()}});
  }

  try {
    std::ifstream f(config_path);
    if (!f) throw nmgme::ConfigError("--config", "cannot open " + config_path);
    nmgme::json j;
    try {
      j = nmgme::json::parse(f);
    } catch (const nmgme::json::parse_error& e) {
      throw nmgme::ConfigError("--config", std::string("parse error: ") + e.what());
    }
    if (!j.is_object()) throw nmgme::ConfigError("<root>", "expected an object");
    if (grid) j["grid"]["points"] = grid;
    if (order >= 0) j["series"]["max_order"] = order;
    if (fock_dim) j["propagation"]["fock_dim"] = fock_dim;
    if (!out_dir.empty()) j["output"]["dir"] = out_dir;
    if (dump_rho) j["output"]["dump_rho"] = true;
    const nmgme::RunConfig cfg = nmgme::parse_config(j, scenario);
    nmgme::run(cfg);
    std::cout << "wrote " << cfg.out_dir << " (" << cfg.scenario << ")\n";
    return 0;
  } catch (const nmgme::ConfigError& e) {
    return fail(2, {{"error", "invalid_config"}, {"field", e.field()}, {"message", e.what()}});
  } catch (const nmgme::EvolutionAborted& e) {
    return fail(3, {{"error", "evolution_aborted"}, {"message", e.what()}, {"last_valid_time", e.last_valid_time()}});
  } catch (const nmgme::ParameterError& e) {
    return fail(2, {{"error", "invalid_config"}, {"field", "<parameters>"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    return fail(3, {{"error", "runtime"}, {"message", e.what()}});
  }
}
