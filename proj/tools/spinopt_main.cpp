#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spinopt/experiments.hpp"

namespace {

using spinopt::ExperimentSpec;
using spinopt::ExportKind;

struct CommonOptions {
  ExperimentSpec spec;
  std::string time_update = "systematic";
  std::string penalty_mode = "direct";
  std::string seed_field = "zero";
  std::string gate = "cnnot";
  std::vector<std::string> exports{"history"};
};

void add_common(CLI::App& app, CommonOptions& o) {
  app.add_option("--name", o.spec.name, "basename for output files");
  app.add_option("--spins", o.spec.spins, "chain length n")->check(CLI::Range(1, 10));
  app.add_option("--gate", o.gate, "target gate")->check(CLI::IsMember({"cnnot"}));
  app.add_option("--alpha0", o.spec.config.alpha0, "penalty weight scale");
  app.add_option("--t0", o.spec.config.T0, "initial duration");
  app.add_option("--a", o.spec.config.a, "relative probe size of the duration update");
  app.add_option("--r0", o.spec.config.r0, "initial step of the gradient duration update");
  app.add_option("--grid", o.spec.config.grid, "time grid intervals N");
  app.add_option("--iters", o.spec.config.max_iter, "iteration budget");
  app.add_option("--stop-tol", o.spec.config.stop_tol,
                 "stagnation threshold on |dJ| (0 disables)");
  app.add_option("--time-update", o.time_update, "duration update mode")
      ->check(CLI::IsMember({"systematic", "gradient", "frozen"}));
  app.add_option("--penalty-mode", o.penalty_mode, "penalty weight profile")
      ->check(CLI::IsMember({"direct", "shaped"}));
  app.add_option("--penalty-floor", o.spec.config.penalty_floor,
                 "floor fraction of the direct profile");
  app.add_option("--seed-field", o.seed_field, "starting guess for the fields")
      ->check(CLI::IsMember({"zero", "strict_zero"}));
  app.add_option("--export", o.exports, "what to write next to the run JSON")
      ->delimiter(',')
      ->check(CLI::IsMember({"history", "fields", "trajectory", "none"}));
  app.add_option("--out", o.spec.output_dir, "output directory");
  app.set_config("--config", "", "key = value file mirroring these flags");
}

// CLI strings to enum-typed config; throws std::invalid_argument on nonsense
// that slipped past the flag validators (config files share this path).
void finish_spec(CommonOptions& o) {
  auto& cfg = o.spec.config;
  cfg.time_update = o.time_update == "systematic" ? spinopt::TimeUpdateMode::systematic
                    : o.time_update == "gradient" ? spinopt::TimeUpdateMode::gradient
                                                  : spinopt::TimeUpdateMode::frozen;
  cfg.penalty_mode =
      o.penalty_mode == "direct" ? spinopt::PenaltyMode::direct : spinopt::PenaltyMode::shaped;
  cfg.seed_field = o.seed_field == "zero" ? spinopt::SeedField::zero()
                                          : spinopt::SeedField::strict_zero();
  cfg.target = spinopt::GateTarget{spinopt::build_cnnot(o.spec.spins)};

  o.spec.outputs.clear();
  for (const std::string& e : o.exports) {
    if (e == "none") continue;
    o.spec.outputs.push_back(e == "history"  ? ExportKind::history
                             : e == "fields" ? ExportKind::fields
                                             : ExportKind::trajectory);
  }
}

int finish(const spinopt::ExperimentOutcome& outcome) {
  for (const std::string& f : outcome.files) std::printf("wrote %s\n", f.c_str());
  if (outcome.status != 0) std::fprintf(stderr, "error: %s\n", outcome.detail.c_str());
  return outcome.status;
}

// Rebuilds ControlSet and config pieces from a saved run JSON so exports can
// be regenerated without redoing the optimization.
int reexport(const std::string& in_path, const CommonOptions& o) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "error: cannot read %s\n", in_path.c_str());
    return 4;
  }
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("config") || !j.contains("final")) {
    std::fprintf(stderr, "error: %s is not a run history\n", in_path.c_str());
    return 2;
  }

  const int spins = j["config"]["spins"].get<int>();
  const auto& ff = j["final"]["fields"];
  const int m = ff["channels"].get<int>(), N = ff["N"].get<int>();
  spinopt::ControlSet fields = spinopt::ControlSet::zeros(m, N, j["final"]["T"].get<double>());
  for (int ch = 0; ch < m; ++ch)
    for (int k = 0; k < N; ++k) fields.samples(ch, k) = ff["samples"][ch][k].get<double>();

  spinopt::SpinChainModel model(spins);
  spinopt::ControlTarget target{spinopt::GateTarget{spinopt::build_cnnot(spins)}};

  const std::string base =
      (std::filesystem::path(o.spec.output_dir) / std::filesystem::path(in_path).stem()).string();
  std::error_code ec;
  std::filesystem::create_directories(o.spec.output_dir, ec);
  for (const std::string& e : o.exports) {
    std::string path, content;
    if (e == "none") continue;
    if (e == "history") {
      spinopt::RunHistory h;
      for (const auto& r : j["records"])
        h.records.push_back({r["k"].get<int>(), r["J"].get<double>(), r["T"].get<double>(),
                             r["P"].get<double>(), r["fluence"].get<double>(),
                             r["dJ_field"].get<double>(), r["dJ_time"].get<double>()});
      path = base + "_history.csv";
      content = spinopt::export_history_csv(h);
    } else if (e == "fields") {
      path = base + "_fields.csv";
      content = spinopt::export_fields_csv(fields);
    } else {
      path = base + "_trajectory.csv";
      content = spinopt::export_probability_csv(model, fields, target);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) {
      std::fprintf(stderr, "error: could not write %s\n", path.c_str());
      return 4;
    }
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duration-and-fluence optimal control of Ising spin chain gates"};
  app.require_subcommand(1);

  CommonOptions opt_o, sweep_o;
  std::string sweep_param = "T0", export_in;
  std::vector<double> sweep_values;

  CLI::App* cmd_opt = app.add_subcommand("optimize", "run one optimization");
  add_common(*cmd_opt, opt_o);

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run one optimization per parameter value");
  add_common(*cmd_sweep, sweep_o);
  cmd_sweep->add_option("--param", sweep_param, "swept parameter")
      ->check(CLI::IsMember({"T0", "alpha0"}));
  cmd_sweep->add_option("--values", sweep_values, "increasing list of sweep values")
      ->required()
      ->delimiter(',');
  cmd_sweep->add_option("--jobs", sweep_o.spec.jobs, "concurrent sweep workers")
      ->check(CLI::Range(1, 64));

  CLI::App* cmd_export = app.add_subcommand("export", "regenerate CSVs from a saved run JSON");
  cmd_export->add_option("--in", export_in, "run history JSON")->required();
  CommonOptions export_o;
  export_o.exports = {"history", "fields", "trajectory"};
  cmd_export->add_option("--export", export_o.exports, "what to regenerate")
      ->delimiter(',')
      ->check(CLI::IsMember({"history", "fields", "trajectory"}));
  cmd_export->add_option("--out", export_o.spec.output_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_opt->parsed()) {
      finish_spec(opt_o);
      return finish(spinopt::run_experiment(opt_o.spec));
    }
    if (cmd_sweep->parsed()) {
      finish_spec(sweep_o);
      sweep_o.spec.sweep = spinopt::SweepSpec{sweep_param, sweep_values};
      return finish(spinopt::run_experiment(sweep_o.spec));
    }
    return reexport(export_in, export_o);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
