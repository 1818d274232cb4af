#include "spinopt/experiments.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <variant>

#include <json.hpp>

namespace spinopt {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

const char* mode_name(TimeUpdateMode m) {
  switch (m) {
    case TimeUpdateMode::systematic: return "systematic";
    case TimeUpdateMode::gradient: return "gradient";
    case TimeUpdateMode::frozen: return "frozen";
  }
  return "?";
}

const char* penalty_name(PenaltyMode m) {
  return m == PenaltyMode::direct ? "direct" : "shaped";
}

const char* seed_name(SeedFieldKind k) {
  switch (k) {
    case SeedFieldKind::zero: return "zero";
    case SeedFieldKind::strict_zero: return "strict_zero";
    case SeedFieldKind::fixed: return "fixed";
  }
  return "?";
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::max_iter: return "max_iter";
    case Termination::stop_tol: return "stop_tol";
    case Termination::guard_failure: return "guard_failure";
  }
  return "?";
}

// E_1x, E_1y, E_2x, ... in the channel order of SpinChainModel::controls.
std::string channel_name(int j) {
  return "E_" + std::to_string(j / 2 + 1) + (j % 2 == 0 ? "x" : "y");
}

OptimizationConfig config_for(const ExperimentSpec& spec, std::optional<double> sweep_value) {
  OptimizationConfig cfg = spec.config;
  if (sweep_value) {
    if (spec.sweep->parameter == "T0") cfg.T0 = *sweep_value;
    else cfg.alpha0 = *sweep_value;
  }
  return cfg;
}

}  // namespace

void validate_experiment(const ExperimentSpec& spec) {
  if (spec.name.empty() || spec.name.find('/') != std::string::npos ||
      spec.name.find('\\') != std::string::npos)
    throw std::invalid_argument("experiment name must be a nonempty filename fragment");
  if (spec.spins < 1) throw std::invalid_argument("spin count must be positive");
  if (spec.jobs < 1) throw std::invalid_argument("job count must be positive");
  if (spec.sweep) {
    const SweepSpec& sw = *spec.sweep;
    if (sw.parameter != "T0" && sw.parameter != "alpha0")
      throw std::invalid_argument("sweep parameter must be T0 or alpha0");
    if (sw.values.empty()) throw std::invalid_argument("sweep needs at least one value");
    double prev = 0.0;
    for (double v : sw.values) {
      if (v <= prev) throw std::invalid_argument("sweep values must be positive and strictly increasing");
      prev = v;
    }
  }
}

std::string run_basename(const ExperimentSpec& spec, std::optional<double> sweep_value) {
  if (!sweep_value) return spec.name;
  return spec.name + "_" + spec.sweep->parameter + "=" + num(*sweep_value);
}

std::string history_json(const ExperimentSpec& spec, std::optional<double> sweep_value,
                         const RunHistory& history) {
  const OptimizationConfig cfg = config_for(spec, sweep_value);
  ordered_json j;
  ordered_json& c = j["config"];
  c["spins"] = spec.spins;
  c["target"] = std::holds_alternative<GateTarget>(cfg.target) ? "gate" : "state";
  c["alpha0"] = cfg.alpha0;
  c["T0"] = cfg.T0;
  c["a"] = cfg.a;
  c["time_update"] = mode_name(cfg.time_update);
  c["r0"] = cfg.r0;
  c["grid"] = cfg.grid;
  c["max_iter"] = cfg.max_iter;
  c["stop_tol"] = cfg.stop_tol;
  c["penalty_mode"] = penalty_name(cfg.penalty_mode);
  c["penalty_floor"] = cfg.penalty_floor;
  c["seed_field"] = seed_name(cfg.seed_field.kind);

  ordered_json records = ordered_json::array();
  for (const IterationRecord& r : history.records) {
    records.push_back(ordered_json{{"k", r.k},
                                   {"J", r.J},
                                   {"T", r.T},
                                   {"P", r.P},
                                   {"fluence", r.fluence},
                                   {"dJ_field", r.dJ_field},
                                   {"dJ_time", r.dJ_time}});
  }
  j["records"] = std::move(records);

  ordered_json& f = j["final"];
  f["J"] = history.final_J;
  f["T"] = history.final_T;
  f["P"] = history.final_P;
  f["fields"]["channels"] = history.final_fields.channels();
  f["fields"]["N"] = history.final_fields.grid();
  ordered_json samples = ordered_json::array();
  for (int ch = 0; ch < history.final_fields.channels(); ++ch) {
    ordered_json row = ordered_json::array();
    for (int k = 0; k < history.final_fields.grid(); ++k)
      row.push_back(history.final_fields.samples(ch, k));
    samples.push_back(std::move(row));
  }
  f["fields"]["samples"] = std::move(samples);

  j["termination"] = termination_name(history.termination);
  return j.dump(2) + "\n";
}

std::string export_history_csv(const RunHistory& history) {
  if (history.records.empty()) throw std::invalid_argument("history has no records to export");
  std::string out = "k,J,T,P,fluence\n";
  for (const IterationRecord& r : history.records) {
    out += std::to_string(r.k);
    for (double v : {r.J, r.T, r.P, r.fluence}) {
      out += ',';
      out += num(v);
    }
    out += '\n';
  }
  return out;
}

std::string export_fields_csv(const ControlSet& fields) {
  const int m = fields.channels(), N = fields.grid();
  std::string out = "s,t";
  for (int j = 0; j < m; ++j) out += "," + channel_name(j);
  out += '\n';
  for (int k = 0; k < N; ++k) {
    const double s = ControlSet::midpoint(k, N);
    out += num(s);
    out += ',';
    out += num(s * fields.duration);
    for (int j = 0; j < m; ++j) {
      out += ',';
      out += num(fields.samples(j, k));
    }
    out += '\n';
  }
  return out;
}

std::string export_probability_csv(const SpinChainModel& model, const ControlSet& fields,
                                   const ControlTarget& target) {
  const TargetMatrices tm = target_matrices(target, model.dim());
  const Trajectory fwd = propagate_forward(model, fields, tm.initial);
  const int N = fields.grid();
  std::string out = "s,P\n";
  for (int k = 0; k <= N; ++k) {
    double p;
    if (const auto* gate = std::get_if<GateTarget>(&target))
      p = fidelity_P(fwd.points[size_t(k)], *gate);
    else
      p = transfer_probability(fwd.points[size_t(k)], std::get<StateTransfer>(target).target);
    out += num(double(k) / N);
    out += ',';
    out += num(p);
    out += '\n';
  }
  return out;
}

namespace {

struct RunProduct {
  int status = 0;
  std::string detail;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content
};

RunProduct produce_one(const ExperimentSpec& spec, std::optional<double> sweep_value) {
  RunProduct out;
  const OptimizationConfig cfg = config_for(spec, sweep_value);
  const SpinChainModel model(spec.spins);
  const RunHistory history = run(model, cfg);
  const std::string base = run_basename(spec, sweep_value);

  if (history.termination == Termination::guard_failure) {
    out.status = 3;
    out.detail = base + ": " + history.detail;
  }
  out.files.emplace_back(base + ".json", history_json(spec, sweep_value, history));
  for (ExportKind kind : spec.outputs) {
    switch (kind) {
      case ExportKind::history:
        out.files.emplace_back(base + "_history.csv", export_history_csv(history));
        break;
      case ExportKind::fields:
        out.files.emplace_back(base + "_fields.csv", export_fields_csv(history.final_fields));
        break;
      case ExportKind::trajectory:
        out.files.emplace_back(base + "_trajectory.csv",
                               export_probability_csv(model, history.final_fields, cfg.target));
        break;
    }
  }
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
  validate_experiment(spec);

  std::vector<std::optional<double>> points;
  if (spec.sweep)
    for (double v : spec.sweep->values) points.emplace_back(v);
  else
    points.emplace_back(std::nullopt);

  std::vector<RunProduct> products(points.size());
  const int jobs = std::min<int>(spec.jobs, int(points.size()));
  if (jobs <= 1) {
    for (size_t i = 0; i < points.size(); ++i) products[i] = produce_one(spec, points[i]);
  } else {
    for (size_t wave = 0; wave < points.size(); wave += size_t(jobs)) {
      std::vector<std::thread> workers;
      for (size_t i = wave; i < std::min(points.size(), wave + size_t(jobs)); ++i)
        workers.emplace_back([&, i] { products[i] = produce_one(spec, points[i]); });
      for (std::thread& w : workers) w.join();
    }
  }

  ExperimentOutcome outcome;
  std::error_code ec;
  std::filesystem::create_directories(spec.output_dir, ec);
  for (const RunProduct& p : products) {
    if (p.status != 0 && outcome.status == 0) {
      outcome.status = p.status;
      outcome.detail = p.detail;
    }
    for (const auto& [name, content] : p.files) {
      const std::filesystem::path path = std::filesystem::path(spec.output_dir) / name;
      std::ofstream stream(path, std::ios::binary | std::ios::trunc);
      stream << content;
      stream.flush();
      if (!stream) {
        outcome.status = 4;
        outcome.detail = "could not write " + path.string();
        return outcome;
      }
      outcome.files.push_back(path.string());
    }
  }
  return outcome;
}

}  // namespace spinopt
