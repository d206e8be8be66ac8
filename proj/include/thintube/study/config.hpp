// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON study configuration and the factories that turn its descriptors into
// curves, rotation profiles, cross-section grids and potentials.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thintube/cross_section.hpp"
#include "thintube/curve_geometry.hpp"
#include "thintube/error.hpp"
#include "thintube/potential.hpp"
#include "thintube/study/csv.hpp"

namespace thintube::study {

using nlohmann::json;

struct StudyConfig {
  json curve = {{"type", "circle"}, {"radius", 1.0}};
  json rotation = {{"type", "zero"}};
  json cross_section = {{"shape", "disk"}, {"radius", 0.5}, {"h", 1.0 / 32.0}};
  json potential = {{"type", "zero"}};
  json gauge_chi = {{"type", "polynomial"}, {"terms", json::array({{{"coef", 1.0}, {"powers", {1, 1, 0}}}})}};
  std::vector<double> eps{0.2, 0.1, 0.05};
  std::optional<double> c;
  int modes = 3;
  int n_s = 64;
  int effective_n_s = 512;
  int stencil_order = 6;
  std::uint64_t seed = 1;
  std::vector<int> lab_dims{2, 4, 8, 16};
  int lab_trials = 50;
  bool check_slices = true;
  std::string output = "out";
  std::filesystem::path base_dir = ".";

  json to_json() const {
    json j = {{"curve", curve},   {"rotation", rotation}, {"cross_section", cross_section},
              {"potential", potential}, {"gauge_chi", gauge_chi}, {"eps", eps},
              {"modes", modes},   {"N_s", n_s},           {"seed", seed},
              {"effective", {{"N_s", effective_n_s}, {"stencil_order", stencil_order}}},
              {"forms_lab", {{"dims", lab_dims}, {"trials", lab_trials}}},
              {"check_slices", check_slices}};
    j["c"] = c ? json(*c) : json(nullptr);
    return j;
  }

  /// FNV-1a of the canonical JSON (sorted keys), as 16 hex digits.
  std::string hash() const { return hex64(fnv1a(to_json().dump())); }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorCode::Config, what); }

inline double number(const json& j, const char* key, std::optional<double> fallback = {}) {
  if (j.contains(key)) {
    if (!j[key].is_number()) config_error(std::string("'") + key + "' must be a number");
    return j[key].get<double>();
  }
  if (!fallback) config_error(std::string("missing '") + key + "'");
  return *fallback;
}

inline std::string text(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) config_error(std::string("missing string '") + key + "'");
  return j[key].get<std::string>();
}

inline std::vector<double> numbers(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j[key].is_array()) config_error(std::string("'") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) config_error(std::string("'") + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path q(p);
  return q.is_absolute() ? q : base / q;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    config_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline TrigSeries trig_series(const json& j) {
  if (!j.is_object()) config_error("Fourier coordinate must be an object with 'cos'/'sin'");
  return {numbers(j, "cos"), numbers(j, "sin")};
}

}  // namespace detail

/// Fourier-coefficient curve: {"x": {"cos": [...], "sin": [...]}, "y": ..., "z": ...},
/// coordinate c(t) = cos[0] + sum_n cos[n] cos(nt) + sin[n] sin(nt).
inline TrigCurve trig_curve_from_json(const json& j) {
  TrigCurve raw;
  const char* names[3] = {"x", "y", "z"};
  for (int c = 0; c < 3; ++c)
    if (j.contains(names[c])) raw.xyz[c] = detail::trig_series(j[names[c]]);
  if (raw.degree() < 2) detail::config_error("Fourier curve needs at least one harmonic");
  return raw;
}

inline ClosedCurve make_curve(const json& j, const std::filesystem::path& base = ".") {
  const std::string type = detail::text(j, "type");
  if (type == "circle") return make_circle(detail::number(j, "radius", 1.0));
  if (type == "ellipse") return make_ellipse(detail::number(j, "a"), detail::number(j, "b"));
  if (type == "torus_knot")
    return make_torus_knot(static_cast<int>(detail::number(j, "p")), static_cast<int>(detail::number(j, "q")),
                           detail::number(j, "R"), detail::number(j, "rho"));
  if (type == "fourier") {
    if (j.contains("file")) {
      const auto path = detail::resolve(base, detail::text(j, "file"));
      return reparametrize_arclength(trig_curve_from_json(detail::read_json_file(path)), "fourier(" + path.string() + ")");
    }
    return reparametrize_arclength(trig_curve_from_json(j), "fourier(inline)");
  }
  detail::config_error("unknown curve type '" + type + "'");
}

inline RotationProfile make_rotation(const json& j, double length) {
  const std::string type = detail::text(j, "type");
  if (type == "zero") return RotationProfile::zero();
  if (type == "constant") return RotationProfile::constant(detail::number(j, "angle"));
  if (type == "linear") return RotationProfile::linear(detail::number(j, "turns"), length);
  if (type == "fourier") return RotationProfile::fourier(detail::numbers(j, "cos"), detail::numbers(j, "sin"), length);
  detail::config_error("unknown rotation type '" + type + "'");
}

inline CrossSectionGrid make_grid(const json& j, const std::filesystem::path& base = ".") {
  const std::string shape = detail::text(j, "shape");
  if (shape == "mask_file") return load_mask_file(detail::resolve(base, detail::text(j, "path")).string());
  const double h = detail::number(j, "h");
  if (!(h > 0.0)) detail::config_error("cross-section spacing h must be positive");
  std::vector<double> centre = detail::numbers(j, "center");
  if (centre.empty()) centre = {0.0, 0.0};
  if (centre.size() != 2) detail::config_error("'center' must have two entries");
  if (shape == "square") return make_square(detail::number(j, "side", 1.0), h, centre[0], centre[1]);
  if (shape == "disk") return make_disk(detail::number(j, "radius", 1.0), h, centre[0], centre[1]);
  if (shape == "rectangle")
    return make_rectangle(detail::number(j, "width"), detail::number(j, "height"), h, centre[0], centre[1]);
  detail::config_error("unknown cross-section shape '" + shape + "'");
}

/// Smooth single-valued gauge function. The multivalued polar angle is rejected.
inline ScalarField make_scalar(const json& j) {
  const std::string type = detail::text(j, "type");
  if (type == "zero") return {};
  if (type == "polynomial") {
    std::vector<Monomial> terms;
    if (!j.contains("terms") || !j["terms"].is_array()) detail::config_error("polynomial needs 'terms'");
    for (const auto& t : j["terms"]) {
      const auto p = detail::numbers(t, "powers");
      if (p.size() != 3) detail::config_error("monomial 'powers' must have three entries");
      Monomial m{detail::number(t, "coef"), {static_cast<int>(p[0]), static_cast<int>(p[1]), static_cast<int>(p[2])}};
      for (int d = 0; d < 3; ++d)
        if (p[d] < 0 || p[d] != m.powers[d]) detail::config_error("monomial powers must be nonnegative integers");
      terms.push_back(m);
    }
    return polynomial_scalar(std::move(terms));
  }
  if (type == "trig") {
    std::vector<TrigTerm> terms;
    if (!j.contains("terms") || !j["terms"].is_array()) detail::config_error("trig scalar needs 'terms'");
    for (const auto& t : j["terms"]) {
      const auto k = detail::numbers(t, "k");
      if (k.size() != 3) detail::config_error("trig term 'k' must have three entries");
      terms.push_back({detail::number(t, "coef"), Vec3(k[0], k[1], k[2]), detail::number(t, "phase", 0.0), 0});
    }
    return trig_scalar(std::move(terms));
  }
  if (type == "angle" || type == "polar_angle")
    detail::config_error("gauge function '" + type + "' is multivalued on the tube; only single-valued chi is allowed");
  detail::config_error("unknown gauge function type '" + type + "'");
}

inline PotentialField make_potential(const json& j) {
  const std::string type = detail::text(j, "type");
  if (type == "zero") return zero_potential();
  if (type == "axial_uniform") return axial_uniform(detail::number(j, "B0"));
  if (type == "transverse_uniform") {
    const auto d = detail::numbers(j, "direction");
    if (d.size() != 3) detail::config_error("'direction' must have three entries");
    return transverse_uniform(detail::number(j, "B0"), Vec3(d[0], d[1], d[2]));
  }
  if (type == "gauge_of") {
    if (!j.contains("chi")) detail::config_error("gauge_of needs 'chi'");
    return gauge_of(make_scalar(j["chi"]));
  }
  if (type == "custom_json") {
    std::vector<TrigTerm> terms;
    if (!j.contains("terms") || !j["terms"].is_array()) detail::config_error("custom_json needs 'terms'");
    for (const auto& t : j["terms"]) {
      const auto k = detail::numbers(t, "k");
      if (k.size() != 3) detail::config_error("term 'k' must have three entries");
      const double comp = detail::number(t, "component");
      if (comp != 0.0 && comp != 1.0 && comp != 2.0) detail::config_error("term 'component' must be 0, 1 or 2");
      terms.push_back({detail::number(t, "coef"), Vec3(k[0], k[1], k[2]), detail::number(t, "phase", 0.0),
                       static_cast<int>(comp)});
    }
    return custom_trig(std::move(terms));
  }
  detail::config_error("unknown potential type '" + type + "'");
}

inline StudyConfig parse_config(const json& j, std::filesystem::path base = ".") {
  if (!j.is_object()) detail::config_error("configuration must be a JSON object");
  StudyConfig c;
  c.base_dir = std::move(base);
  try {
    if (j.contains("curve")) c.curve = j["curve"];
    if (j.contains("rotation")) c.rotation = j["rotation"];
    if (j.contains("cross_section")) c.cross_section = j["cross_section"];
    if (j.contains("potential")) c.potential = j["potential"];
    if (j.contains("gauge_chi")) c.gauge_chi = j["gauge_chi"];
    if (j.contains("eps")) c.eps = detail::numbers(j, "eps");
    if (j.contains("c") && !j["c"].is_null()) c.c = detail::number(j, "c");
    if (j.contains("modes")) c.modes = j["modes"].get<int>();
    if (j.contains("N_s")) c.n_s = j["N_s"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("check_slices")) c.check_slices = j["check_slices"].get<bool>();
    if (j.contains("effective")) {
      const auto& e = j["effective"];
      if (e.contains("N_s")) c.effective_n_s = e["N_s"].get<int>();
      if (e.contains("stencil_order")) c.stencil_order = e["stencil_order"].get<int>();
    }
    if (j.contains("forms_lab")) {
      const auto& f = j["forms_lab"];
      if (f.contains("dims")) c.lab_dims = f["dims"].get<std::vector<int>>();
      if (f.contains("trials")) c.lab_trials = f["trials"].get<int>();
    }
  } catch (const json::exception& e) {
    detail::config_error(std::string("configuration type error: ") + e.what());
  }
  return c;
}

inline StudyConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_json_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

/// Curve, rotation, grid and potential built from a validated configuration.
struct StudyContext {
  ClosedCurve curve;
  RotationProfile rotation;
  CrossSectionGrid grid;
  PotentialField potential;
  double k_max = 0.0;
  double c = 0.0;
};

/// Builds the geometric objects and checks the configuration invariants:
/// strictly decreasing eps list, thinness for every eps, c > max k^2 / 4.
inline StudyContext validate(const StudyConfig& cfg, bool need_eps = true) {
  if (need_eps) {
    if (cfg.eps.empty()) detail::config_error("eps list is empty");
    for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
      if (!(cfg.eps[i] > 0.0 && cfg.eps[i] < 1.0)) detail::config_error("eps values must lie in (0, 1)");
      if (i > 0 && !(cfg.eps[i] < cfg.eps[i - 1])) detail::config_error("eps values must be strictly decreasing");
    }
  }
  if (cfg.modes < 1) detail::config_error("modes must be >= 1");
  if (cfg.n_s < 8 || cfg.effective_n_s < 8) detail::config_error("N_s must be >= 8");
  if (cfg.stencil_order != 2 && cfg.stencil_order != 4 && cfg.stencil_order != 6)
    detail::config_error("stencil_order must be 2, 4 or 6");
  ClosedCurve curve = make_curve(cfg.curve, cfg.base_dir);
  RotationProfile rotation = make_rotation(cfg.rotation, curve.length());
  CrossSectionGrid grid = make_grid(cfg.cross_section, cfg.base_dir);
  PotentialField potential = make_potential(cfg.potential);
  const double k_max = max_curvature(curve);
  if (k_max < kDefaultMinCurvature) detail::config_error("curve curvature vanishes");
  if (need_eps)
    for (double e : cfg.eps)
      if (!validate_thinness(k_max, e, grid.bounding_radius()))
        detail::config_error("eps = " + format_number(e) + " violates the thinness bound eps * max k * rho < 0.95");
  const double c = cfg.c ? *cfg.c : 0.25 * k_max * k_max + 1.0;
  if (!(c > 0.25 * k_max * k_max)) detail::config_error("c must exceed max k^2 / 4");
  return {std::move(curve), std::move(rotation), std::move(grid), std::move(potential), k_max, c};
}

}  // namespace thintube::study
