// SPDX-License-Identifier: Apache-2.0
#pragma once

// Batch runners behind the command-line driver. Each runner writes one CSV
// (plus auxiliary tables) and returns a report; `passed` feeds the exit code.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "thintube/complex_forms.hpp"
#include "thintube/cross_section.hpp"
#include "thintube/effective_operator.hpp"
#include "thintube/hermitian_eigs.hpp"
#include "thintube/study/config.hpp"
#include "thintube/study/csv.hpp"
#include "thintube/tube_assembly.hpp"

namespace thintube::study {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitAcceptance = 4 };

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ThinnessViolated:
    case ErrorCode::ShiftTooSmall:
    case ErrorCode::VanishingCurvature:
    case ErrorCode::DegenerateSpeed:
      return kExitConfig;
    default:
      return kExitSolver;
  }
}

struct RunOptions {
  std::filesystem::path out_dir = "out";
  int jobs = 1;
  bool export_matrix = false;
  bool write_files = true;
};

/// Runs fn(0..n-1) on up to `jobs` threads; results land at their own index,
/// so the output never depends on completion order. The first exception
/// (lowest index) is rethrown.
template <class T>
std::vector<T> parallel_map(int n, int jobs, const std::function<T(int)>& fn) {
  std::vector<std::optional<T>> slots(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, std::max(1, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace detail {

inline void common_meta(CsvTable& t, const StudyConfig& cfg, const StudyContext& ctx) {
  t.meta("config_hash", cfg.hash());
  t.meta("curve", ctx.curve.descriptor());
  t.meta("rotation", ctx.rotation.descriptor);
  t.meta("cross_section", ctx.grid.shape().describe());
  t.meta("potential", ctx.potential.descriptor);
  t.meta("h", ctx.grid.h());
  t.meta("nodes", static_cast<double>(ctx.grid.size()));
  t.meta("c", ctx.c);
  t.meta("k_max", ctx.k_max);
}

inline void write_table(const CsvTable& t, const RunOptions& run, const std::string& name) {
  if (!run.write_files) return;
  std::error_code ec;
  std::filesystem::create_directories(run.out_dir, ec);
  if (ec) throw Error(ErrorCode::Config, "cannot create output directory " + run.out_dir.string());
  t.write((run.out_dir / name).string());
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// cross-section

struct CrossSectionReport {
  CrossSectionMode mode;
  CouplingEstimate coupling;
  double moment_defect = 0.0;
  int nodes = 0;
  CsvTable table{{"lambda0", "gap", "C_Q", "C_Q_discrete", "moment_defect", "residual", "nodes"}};
};

inline CrossSectionReport run_cross_section(const StudyConfig& cfg, const RunOptions& run = {}) {
  const StudyContext ctx = validate(cfg, false);
  CrossSectionReport r;
  r.mode = ground_mode(ctx.grid);
  r.coupling = coupling_estimate(r.mode, ctx.grid);
  r.moment_defect = moment_identity(r.mode, ctx.grid);
  r.nodes = ctx.grid.size();
  detail::common_meta(r.table, cfg, ctx);
  r.table.meta("solver", r.mode.solver);
  r.table.meta("C_Q_method", r.coupling.method);
  r.table.row({r.mode.lambda0, r.mode.gap(), r.coupling.value, r.coupling.discrete, r.moment_defect, r.mode.residual,
               static_cast<long long>(r.nodes)});
  detail::write_table(r.table, run, "cross_section.csv");
  return r;
}

// ---------------------------------------------------------------------------
// effective operator

struct EffectiveReport {
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  double C_Q = 0.0;
  double flux = 0.0;
  std::string solver;
  CsvTable table{{"index", "eigenvalue", "residual"}};
};

inline EffectiveReport effective_spectrum(const StudyConfig& cfg, const StudyContext& ctx, double C_Q, int n, int order,
                                          int modes) {
  const EffectiveCoefficients co = effective_coefficients(ctx.curve, ctx.rotation, ctx.potential, C_Q, ctx.c, n);
  const auto pairs = spectrum_G0(assemble_G0(co, order), modes);
  EffectiveReport r;
  r.eigenvalues = pairs.report.eigenvalues;
  r.residuals = pairs.report.residual_norms;
  r.C_Q = C_Q;
  r.flux = co.flux();
  r.solver = pairs.report.method;
  detail::common_meta(r.table, cfg, ctx);
  r.table.meta("C_Q", C_Q);
  r.table.meta("flux", r.flux);
  r.table.meta("N_s", static_cast<double>(n));
  r.table.meta("stencil_order", static_cast<double>(order));
  r.table.meta("solver", r.solver);
  for (std::size_t k = 0; k < r.eigenvalues.size(); ++k)
    r.table.row({static_cast<long long>(k + 1), r.eigenvalues[k], r.residuals[k]});
  return r;
}

inline EffectiveReport run_effective(const StudyConfig& cfg, const RunOptions& run = {}) {
  const StudyContext ctx = validate(cfg, false);
  const CrossSectionMode mode = ground_mode(ctx.grid);
  const CouplingEstimate cq = coupling_estimate(mode, ctx.grid);
  EffectiveReport r = effective_spectrum(cfg, ctx, cq.value, cfg.effective_n_s, cfg.stencil_order, cfg.modes);
  r.table.meta("C_Q_method", cq.method);
  detail::write_table(r.table, run, "effective.csv");
  return r;
}

// ---------------------------------------------------------------------------
// tube

struct SliceRecord {
  int slice = 0;
  std::string gauge;  // "raw" | "shifted"
  double lambda_slice = 0.0;
};

struct TubeRun {
  double eps = 0.0;
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  std::size_t dof = 0;
  int iterations = 0;
  std::string solver;
  std::vector<SliceRecord> slices;
};

/// One eps point: pull back, gauge shift, assemble, solve. With
/// `slices` the per-slice magnetic ground values before and after the shift
/// are recorded as well.
inline TubeRun tube_point(const StudyContext& ctx, const PotentialField& a, const CrossSectionMode& mode, double eps,
                          int n_s, int modes, bool slices, const std::filesystem::path* export_to = nullptr) {
  const PulledBackPotentials raw = pullback(ctx.curve, ctx.rotation, a, eps, ctx.grid, n_s);
  const PulledBackPotentials shifted = gauge_shift(raw, ctx.grid);
  const TubeDiscretization t = assemble(shifted, mode, ctx.grid, ctx.c);
  if (export_to) {
    std::ofstream os(*export_to);
    if (!os) throw Error(ErrorCode::Config, "cannot write " + export_to->string());
    write_triplets(os, t.H);
  }
  const auto pairs = lowest_spectrum(t, modes);
  TubeRun r;
  r.eps = eps;
  r.eigenvalues = pairs.report.eigenvalues;
  r.residuals = pairs.report.residual_norms;
  r.dof = t.dof();
  r.iterations = pairs.report.iterations;
  r.solver = pairs.report.method;
  if (slices)
    for (const auto* p : {&raw, &shifted})
      for (int i = 0; i < n_s; ++i)
        r.slices.push_back({i, p == &raw ? "raw" : "shifted", slice_magnetic_ground(ctx.grid, p->slice_phases(i))});
  return r;
}

inline std::vector<TubeRun> tube_sweep(const StudyConfig& cfg, const StudyContext& ctx, const PotentialField& a,
                                       const CrossSectionMode& mode, bool slices, const RunOptions& run) {
  const bool exporting = run.export_matrix && run.write_files;
  if (exporting) std::filesystem::create_directories(run.out_dir);
  return parallel_map<TubeRun>(static_cast<int>(cfg.eps.size()), run.jobs, [&](int k) {
    const std::filesystem::path path = run.out_dir / ("tube_matrix_eps" + format_number(cfg.eps[k]) + ".txt");
    return tube_point(ctx, a, mode, cfg.eps[k], cfg.n_s, cfg.modes, slices, exporting ? &path : nullptr);
  });
}

struct TubeReport {
  std::vector<TubeRun> runs;
  CsvTable table{{"eps", "index", "eigenvalue", "residual"}};
};

inline TubeReport run_tube(const StudyConfig& cfg, const RunOptions& run = {}) {
  const StudyContext ctx = validate(cfg);
  const CrossSectionMode mode = ground_mode(ctx.grid);
  TubeReport r;
  r.runs = tube_sweep(cfg, ctx, ctx.potential, mode, false, run);
  detail::common_meta(r.table, cfg, ctx);
  r.table.meta("lambda0", mode.lambda0);
  r.table.meta("N_s", static_cast<double>(cfg.n_s));
  r.table.meta("s_derivative", "link_forward");
  r.table.meta("solver", r.runs.front().solver);
  for (const auto& t : r.runs)
    for (std::size_t k = 0; k < t.eigenvalues.size(); ++k)
      r.table.row({t.eps, static_cast<long long>(k + 1), t.eigenvalues[k], t.residuals[k]});
  detail::write_table(r.table, run, "tube.csv");
  return r;
}

// ---------------------------------------------------------------------------
// converge

struct ConvergenceReport {
  std::vector<double> eps;
  std::vector<std::vector<double>> lambda_tube;  // [eps][mode]
  std::vector<double> lambda_effective;          // [mode]
  std::vector<std::vector<double>> errors;       // [eps][mode]
  std::vector<bool> monotone;                    // per mode, 10% slack
  std::vector<double> final_over_initial;        // per mode
  double lambda0 = 0.0;
  double min_slice_margin = 0.0;                 // min over slices of lambda_slice - lambda0
  double runtime_seconds = 0.0;
  std::vector<TubeRun> runs;
  bool passed = false;
  CsvTable table{{"eps", "mode_index", "lambda_tube", "lambda_effective", "abs_error"}};
  CsvTable slices{{"eps", "slice_index", "gauge", "lambda_slice", "lambda0", "margin"}};
};

/// Relative slack allowed between consecutive errors.
inline constexpr double kMonotoneSlack = 1.1;

inline ConvergenceReport run_converge(const StudyConfig& cfg, const RunOptions& run = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const StudyContext ctx = validate(cfg);
  const CrossSectionMode mode = ground_mode(ctx.grid);
  ConvergenceReport r;
  r.eps = cfg.eps;
  r.lambda0 = mode.lambda0;
  // Reference on the tube's own s-grid with the matching second-order stencil,
  // and the node-rule C_h that the discrete twist term reproduces.
  const EffectiveReport eff = effective_spectrum(cfg, ctx, mode.C_Q, cfg.n_s, 2, cfg.modes);
  r.lambda_effective = eff.eigenvalues;
  r.runs = tube_sweep(cfg, ctx, ctx.potential, mode, cfg.check_slices, run);

  const int m = cfg.modes;
  r.monotone.assign(m, true);
  r.min_slice_margin = std::numeric_limits<double>::infinity();
  for (const auto& t : r.runs) {
    r.lambda_tube.push_back(t.eigenvalues);
    std::vector<double> err(m);
    for (int k = 0; k < m; ++k) err[k] = std::abs(t.eigenvalues[k] - r.lambda_effective[k]);
    r.errors.push_back(err);
    for (const auto& s : t.slices) r.min_slice_margin = std::min(r.min_slice_margin, s.lambda_slice - mode.lambda0);
  }
  for (int k = 0; k < m; ++k) {
    for (std::size_t e = 1; e < r.errors.size(); ++e)
      if (r.errors[e][k] > kMonotoneSlack * r.errors[e - 1][k]) r.monotone[k] = false;
    const double first = r.errors.front()[k], last = r.errors.back()[k];
    r.final_over_initial.push_back(first > 0.0 ? last / first : (last > 0.0 ? INFINITY : 0.0));
  }
  r.passed = std::all_of(r.monotone.begin(), r.monotone.end(), [](bool b) { return b; });

  for (auto* t : {&r.table, &r.slices}) {
    detail::common_meta(*t, cfg, ctx);
    t->meta("lambda0", mode.lambda0);
    t->meta("C_Q_discrete", mode.C_Q);
    t->meta("N_s", static_cast<double>(cfg.n_s));
    t->meta("s_derivative", "link_forward");
  }
  r.table.meta("reference", "G0 link stencil order 2 on the tube s-grid");
  r.table.meta("flux", eff.flux);
  r.table.meta("solver_tube", r.runs.front().solver);
  r.table.meta("solver_effective", eff.solver);
  for (std::size_t e = 0; e < r.runs.size(); ++e)
    for (int k = 0; k < m; ++k)
      r.table.row({r.eps[e], static_cast<long long>(k + 1), r.lambda_tube[e][k], r.lambda_effective[k], r.errors[e][k]});
  for (const auto& t : r.runs)
    for (const auto& s : t.slices)
      r.slices.row({t.eps, static_cast<long long>(s.slice), s.gauge, s.lambda_slice, mode.lambda0,
                    s.lambda_slice - mode.lambda0});
  detail::write_table(r.table, run, "converge.csv");
  if (cfg.check_slices) detail::write_table(r.slices, run, "slices.csv");
  r.runtime_seconds = detail::seconds_since(t0);
  return r;
}

// ---------------------------------------------------------------------------
// gauge check

/// Maximum allowed spectral discrepancy between A and A + grad chi.
inline constexpr double kGaugeTolerance = 1e-6;

struct GaugeReport {
  std::string chi;
  double discrepancy = 0.0;
  double min_slice_margin = 0.0;  // over the A + grad chi runs
  std::vector<TubeRun> base, gauged;
  bool passed = false;
  CsvTable table{{"eps", "index", "lambda_A", "lambda_A_grad_chi", "discrepancy"}};
};

/// `base` may carry spectra already computed for A at the same eps list.
inline GaugeReport run_gauge_check(const StudyConfig& cfg, const json& chi_json, const RunOptions& run = {},
                                   const std::vector<TubeRun>* base = nullptr) {
  const StudyContext ctx = validate(cfg);
  const ScalarField chi = make_scalar(chi_json);
  const CrossSectionMode mode = ground_mode(ctx.grid);
  GaugeReport r;
  r.chi = chi.descriptor;
  if (base && base->size() == cfg.eps.size())
    r.base = *base;
  else
    r.base = tube_sweep(cfg, ctx, ctx.potential, mode, false, run);
  r.gauged = tube_sweep(cfg, ctx, plus_gradient(ctx.potential, chi), mode, cfg.check_slices, run);
  r.min_slice_margin = std::numeric_limits<double>::infinity();
  detail::common_meta(r.table, cfg, ctx);
  r.table.meta("chi", r.chi);
  r.table.meta("N_s", static_cast<double>(cfg.n_s));
  for (std::size_t e = 0; e < r.base.size(); ++e) {
    for (const auto& s : r.gauged[e].slices)
      r.min_slice_margin = std::min(r.min_slice_margin, s.lambda_slice - mode.lambda0);
    for (int k = 0; k < cfg.modes; ++k) {
      const double a = r.base[e].eigenvalues[k], b = r.gauged[e].eigenvalues[k];
      r.discrepancy = std::max(r.discrepancy, std::abs(a - b));
      r.table.row({cfg.eps[e], static_cast<long long>(k + 1), a, b, std::abs(a - b)});
    }
  }
  r.passed = r.discrepancy <= kGaugeTolerance;
  r.table.meta("max_discrepancy", r.discrepancy);
  detail::write_table(r.table, run, "gauge_check.csv");
  return r;
}

// ---------------------------------------------------------------------------
// forms laboratory

struct FormsLabThresholds {
  double polarization = 1e-10;
  double variational = 1e-6;
  double penalized_final = 1e-6;
};

struct FormsLabTrial {
  int dim = 0;
  int trial = 0;
  double polarization_error = 0.0;
  double variational_agreement = 0.0;
  bool certified = false;
  forms::ResolventBound bound;
  std::vector<double> penalized_errors;
  bool penalized_monotone = false;
};

struct FormsLabReport {
  std::vector<FormsLabTrial> trials;
  double worst_polarization = 0.0;
  double worst_variational = 0.0;
  double max_q = 0.0;
  double min_margin = 0.0;
  double worst_penalized_final = 0.0;
  bool all_monotone = true;
  bool passed = false;
  CsvTable table{{"dim", "trial", "polarization_error", "variational_agreement", "certified", "q", "gap", "bound",
                  "margin", "penalized_eps1", "penalized_eps2", "penalized_eps3", "penalized_eps4",
                  "penalized_monotone"}};
};

inline const std::vector<double>& penalized_eps_list() {
  static const std::vector<double> list{1e-1, 1e-2, 1e-3, 1e-4};
  return list;
}

/// One seeded trial of every complex-forms property suite in dimension `dim`.
inline FormsLabTrial forms_trial(int dim, int trial, std::uint64_t seed) {
  using namespace forms;
  std::seed_seq seq{seed, static_cast<std::uint64_t>(dim), static_cast<std::uint64_t>(trial)};
  std::mt19937_64 rng(seq);
  const Index n = dim;
  FormsLabTrial t;
  t.dim = dim;
  t.trial = trial;

  // Polarisation round trip.
  const Matrix a = random_hermitian(n, rng);
  const Matrix back = polarize(QuadraticFunctional::from_matrix(a), {16, rng(), 1e-10});
  t.polarization_error = (back - a).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff());

  // Variational characterisation: block form on range(P0) + its complement.
  const Index rank = std::max<Index>(1, n / 2);
  Matrix cols(n, rank);
  for (Index j = 0; j < rank; ++j) cols.col(j) = random_vector(n, rng);
  const SubspaceProjector p0 = SubspaceProjector::onto_span(cols);
  const Matrix id = Matrix::Identity(n, n);
  const Matrix p = p0.matrix();
  const Matrix m1 = random_positive(n, rng, 1.0), m2 = random_positive(n, rng, 1.0);
  const HermitianFormMatrix mform(p * m1 * p + (id - p) * m2 * (id - p), 1e-10);
  const Vector eta = random_vector(n, rng);
  const VariationalSolution sol = solve_variational(mform, eta, p0);
  t.certified = sol.certified;
  for (int start = 0; start < 20; ++start) {
    const Vector z = minimize_by_descent(mform, eta, p0, random_vector(n, rng));
    t.variational_agreement = std::max(t.variational_agreement, (z - sol.zeta).norm() / std::max(1.0, sol.zeta.norm()));
  }

  // Quantitative resolvent bound: B = L (I + K) L^H with ||K|| < 0.45, so q < 1/2.
  const Matrix mref = random_positive(n, rng, 0.5);
  Eigen::LLT<Matrix> llt(mref);
  const Matrix lower = llt.matrixL();
  Matrix k = random_hermitian(n, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> kes(k, Eigen::EigenvaluesOnly);
  std::uniform_real_distribution<double> size(0.0, 0.45);
  k *= cplx(size(rng) / std::max(1e-300, kes.eigenvalues().cwiseAbs().maxCoeff()));
  const HermitianFormMatrix mf(mref, 1e-10);
  const HermitianFormMatrix bf(lower * (id + k) * lower.adjoint(), 1e-10);
  t.bound = resolvent_bound(bf, mf);

  // Penalised family B0 + P / eps^2 with P vanishing on a random subspace.
  const Matrix b0 = random_positive(n, rng, 0.1);
  const Index kernel = std::max<Index>(1, n / 2);
  Matrix kc(n, kernel);
  for (Index j = 0; j < kernel; ++j) kc.col(j) = random_vector(n, rng);
  const Matrix pk = SubspaceProjector::onto_span(kc).matrix();
  const Matrix pen = (id - pk) * random_positive(n, rng, 1.0) * (id - pk);
  const auto table = penalized_resolvent_limit(HermitianFormMatrix(b0, 1e-10), HermitianFormMatrix(pen, 1e-10), 1.0,
                                               penalized_eps_list());
  t.penalized_errors = table.errors;
  t.penalized_monotone = table.nonincreasing;
  return t;
}

inline FormsLabReport run_forms_lab(std::uint64_t seed, const std::vector<int>& dims, int trials,
                                    const RunOptions& run = {}, const FormsLabThresholds& thr = {}) {
  if (trials < 1) throw Error(ErrorCode::Config, "trials must be >= 1");
  if (dims.empty()) throw Error(ErrorCode::Config, "dims must be non-empty");
  for (int d : dims)
    if (d < 1 || d > 512) throw Error(ErrorCode::Config, "dims must lie in [1, 512]");
  const int per = trials;
  const int total = per * static_cast<int>(dims.size());
  FormsLabReport r;
  r.trials = parallel_map<FormsLabTrial>(total, run.jobs,
                                         [&](int i) { return forms_trial(dims[i / per], i % per, seed); });
  r.min_margin = std::numeric_limits<double>::infinity();
  r.table.meta("seed", std::to_string(seed));
  std::string dim_list;
  for (int d : dims) dim_list += (dim_list.empty() ? "" : " ") + std::to_string(d);
  r.table.meta("dims", dim_list);
  r.table.meta("trials", static_cast<double>(trials));
  r.table.meta("penalized_eps", "1e-1 1e-2 1e-3 1e-4");
  r.table.meta("config_hash", hex64(fnv1a("forms-lab;" + std::to_string(seed) + ";" + dim_list + ";" +
                                          std::to_string(trials))));
  for (const auto& t : r.trials) {
    r.worst_polarization = std::max(r.worst_polarization, t.polarization_error);
    r.worst_variational = std::max(r.worst_variational, t.variational_agreement);
    r.max_q = std::max(r.max_q, t.bound.q);
    r.min_margin = std::min(r.min_margin, t.bound.margin());
    r.worst_penalized_final = std::max(r.worst_penalized_final, t.penalized_errors.back());
    r.all_monotone = r.all_monotone && t.penalized_monotone;
    std::vector<CsvTable::Cell> row{static_cast<long long>(t.dim), static_cast<long long>(t.trial),
                                    t.polarization_error,           t.variational_agreement,
                                    static_cast<long long>(t.certified), t.bound.q,
                                    t.bound.gap,                    t.bound.bound,
                                    t.bound.margin()};
    for (double e : t.penalized_errors) row.emplace_back(e);
    row.emplace_back(static_cast<long long>(t.penalized_monotone));
    r.table.row(std::move(row));
  }
  r.passed = r.worst_polarization <= thr.polarization && r.worst_variational <= thr.variational && r.max_q < 0.5 &&
             r.min_margin >= 0.0 && r.all_monotone && r.worst_penalized_final <= thr.penalized_final;
  detail::write_table(r.table, run, "forms_lab.csv");
  return r;
}

}  // namespace thintube::study
