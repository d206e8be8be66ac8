// SPDX-License-Identifier: Apache-2.0
// thintube: batch driver for cross-section, effective-operator, tube and
// forms-laboratory studies. Exit codes: 0 ok, 2 config, 3 solver, 4 check failed.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thintube/study/study.hpp"

namespace {

using namespace thintube;
using namespace thintube::study;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "cannot parse list entry '" + item + "'");
    }
  }
  return out;
}

struct Flags {
  std::string config;
  std::string out;
  std::string eps;
  std::string dims;
  std::string chi;
  long long seed = -1;
  int modes = 0;
  int jobs = 1;
  int trials = 0;
  bool quiet = false;
  bool export_matrix = false;
  bool eps_given = false;
  bool dims_given = false;
  bool trials_given = false;
};

StudyConfig load(const Flags& f) {
  if (f.config.empty()) throw Error(ErrorCode::Config, "--config is required");
  StudyConfig cfg = load_config(f.config);
  if (f.eps_given) cfg.eps = parse_list(f.eps);
  if (f.modes > 0) cfg.modes = f.modes;
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  return cfg;
}

RunOptions run_options(const Flags& f, const StudyConfig* cfg) {
  RunOptions r;
  r.out_dir = !f.out.empty() ? f.out : (cfg ? cfg->output : std::string("out"));
  if (f.jobs < 1) throw Error(ErrorCode::Config, "--jobs must be >= 1");
  r.jobs = f.jobs;
  r.export_matrix = f.export_matrix;
  return r;
}

void say(const Flags& f, const std::string& line) {
  if (!f.quiet) std::cout << line << '\n';
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + format_number(x);
  return s;
}

int cmd_cross_section(const Flags& f) {
  const StudyConfig cfg = load(f);
  const auto r = run_cross_section(cfg, run_options(f, &cfg));
  say(f, "lambda0 = " + format_number(r.mode.lambda0) + "  gap = " + format_number(r.mode.gap()) +
             "  C(Q) = " + format_number(r.coupling.value) + " (" + r.coupling.method + ", C_h = " +
             format_number(r.coupling.discrete) + ")  moment defect = " + format_number(r.moment_defect) +
             "  nodes = " + std::to_string(r.nodes));
  return kExitOk;
}

int cmd_effective(const Flags& f) {
  const StudyConfig cfg = load(f);
  const auto r = run_effective(cfg, run_options(f, &cfg));
  say(f, "G0 spectrum: " + join(r.eigenvalues) + "  (C(Q) = " + format_number(r.C_Q) +
             ", flux = " + format_number(r.flux) + ")");
  return kExitOk;
}

int cmd_tube(const Flags& f) {
  const StudyConfig cfg = load(f);
  const auto r = run_tube(cfg, run_options(f, &cfg));
  for (const auto& t : r.runs)
    say(f, "eps = " + format_number(t.eps) + "  dof = " + std::to_string(t.dof) + "  spectrum: " + join(t.eigenvalues));
  return kExitOk;
}

int cmd_converge(const Flags& f) {
  const StudyConfig cfg = load(f);
  const auto r = run_converge(cfg, run_options(f, &cfg));
  say(f, "G0 reference: " + join(r.lambda_effective));
  for (std::size_t e = 0; e < r.eps.size(); ++e)
    say(f, "eps = " + format_number(r.eps[e]) + "  errors: " + join(r.errors[e]));
  say(f, "final/initial error ratio per mode: " + join(r.final_over_initial));
  if (cfg.check_slices) say(f, "min slice margin over lambda0: " + format_number(r.min_slice_margin));
  say(f, std::string("monotone in eps (10% slack): ") + (r.passed ? "yes" : "no"));
  return r.passed ? kExitOk : kExitAcceptance;
}

int cmd_gauge_check(const Flags& f) {
  const StudyConfig cfg = load(f);
  json chi = cfg.gauge_chi;
  if (!f.chi.empty()) {
    try {
      chi = json::parse(f.chi);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Config, std::string("--chi is not valid JSON: ") + e.what());
    }
  }
  const auto r = run_gauge_check(cfg, chi, run_options(f, &cfg));
  say(f, "chi = " + r.chi + "  max discrepancy = " + format_number(r.discrepancy) + (r.passed ? "  (pass)" : "  (FAIL)"));
  return r.passed ? kExitOk : kExitAcceptance;
}

int cmd_forms_lab(const Flags& f) {
  std::uint64_t seed = 1;
  std::vector<int> dims{2, 4, 8, 16};
  int trials = 50;
  std::optional<StudyConfig> cfg;
  if (!f.config.empty()) {
    cfg = load(f);
    seed = cfg->seed;
    dims = cfg->lab_dims;
    trials = cfg->lab_trials;
  }
  if (f.seed >= 0) seed = static_cast<std::uint64_t>(f.seed);
  if (f.dims_given) {
    dims.clear();
    for (double d : parse_list(f.dims)) {
      if (d != static_cast<int>(d)) throw Error(ErrorCode::Config, "--dims entries must be integers");
      dims.push_back(static_cast<int>(d));
    }
  }
  if (f.trials_given) trials = f.trials;
  const auto r = run_forms_lab(seed, dims, trials, run_options(f, cfg ? &*cfg : nullptr));
  say(f, "trials = " + std::to_string(r.trials.size()) + "  worst polarization = " +
             format_number(r.worst_polarization) + "  worst variational = " + format_number(r.worst_variational) +
             "  max q = " + format_number(r.max_q) + "  min margin = " + format_number(r.min_margin) +
             "  worst penalized final = " + format_number(r.worst_penalized_final));
  return r.passed ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic Dirichlet Laplacians on thin tubes: batch studies"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", f.config, "JSON study configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory (default: config 'output')");
    sub->add_option("--seed", f.seed, "random seed override")->check(CLI::NonNegativeNumber);
    sub->add_flag("--quiet", f.quiet, "suppress the console summary");
    sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto eps_modes = [&](CLI::App* sub) {
    sub->add_option("--eps", f.eps, "comma-separated eps list, strictly decreasing");
    sub->add_option("--modes", f.modes, "number of eigenvalues")->check(CLI::PositiveNumber);
  };

  std::vector<std::pair<CLI::App*, int (*)(const Flags&)>> commands;
  auto* cs = app.add_subcommand("cross-section", "ground mode, gap, C(Q) and moment defect of Q");
  common(cs, true);
  cs->add_option("--modes", f.modes)->check(CLI::PositiveNumber);
  commands.emplace_back(cs, cmd_cross_section);
  auto* eff = app.add_subcommand("effective", "lowest eigenvalues of the effective operator G0");
  common(eff, true);
  eps_modes(eff);
  commands.emplace_back(eff, cmd_effective);
  auto* tube = app.add_subcommand("tube", "lowest eigenvalues of the renormalised tube operator per eps");
  common(tube, true);
  eps_modes(tube);
  tube->add_flag("--export-matrix", f.export_matrix, "write the assembled sparse matrices as triplets");
  commands.emplace_back(tube, cmd_tube);
  auto* conv = app.add_subcommand("converge", "tube vs effective spectra over the eps list");
  common(conv, true);
  eps_modes(conv);
  commands.emplace_back(conv, cmd_converge);
  auto* gauge = app.add_subcommand("gauge-check", "spectra for A and A + grad chi");
  common(gauge, true);
  eps_modes(gauge);
  gauge->add_option("--chi", f.chi, "gauge function as JSON (default: config 'gauge_chi')");
  commands.emplace_back(gauge, cmd_gauge_check);
  auto* lab = app.add_subcommand("forms-lab", "seeded property suites for finite-dimensional forms");
  common(lab, true);
  lab->add_option("--dims", f.dims, "comma-separated dimensions");
  lab->add_option("--trials", f.trials, "trials per dimension (>= 1)");
  commands.emplace_back(lab, cmd_forms_lab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  for (auto* sub : {eff, tube, conv, gauge})
    if (sub->parsed() && sub->count("--eps")) f.eps_given = true;
  f.dims_given = lab->count("--dims") > 0;
  f.trials_given = lab->count("--trials") > 0;

  try {
    for (const auto& [sub, fn] : commands)
      if (sub->parsed()) return fn(f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitConfig;
}
