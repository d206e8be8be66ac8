// SPDX-License-Identifier: Apache-2.0
#pragma once

// Magnetic vector potentials A : R^3 -> R^3 and smooth single-valued gauge
// functions chi.

#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thintube/curve_geometry.hpp"
#include "thintube/error.hpp"

namespace thintube {

struct PotentialField {
  std::string descriptor = "zero";
  std::function<Vec3(const Vec3&)> A = [](const Vec3&) { return Vec3::Zero().eval(); };

  Vec3 operator()(const Vec3& x) const { return A(x); }
};

/// Smooth single-valued scalar with its gradient.
struct ScalarField {
  std::string descriptor = "zero";
  std::function<double(const Vec3&)> value = [](const Vec3&) { return 0.0; };
  std::function<Vec3(const Vec3&)> gradient = [](const Vec3&) { return Vec3::Zero().eval(); };
};

struct Monomial {
  double coef = 0.0;
  std::array<int, 3> powers{0, 0, 0};
};

/// sum coef x1^p1 x2^p2 x3^p3.
inline ScalarField polynomial_scalar(std::vector<Monomial> terms) {
  for (const auto& t : terms)
    for (int p : t.powers)
      if (p < 0) throw Error(ErrorCode::InvalidArgument, "polynomial powers must be >= 0");
  std::ostringstream os;
  os << "poly(";
  for (std::size_t i = 0; i < terms.size(); ++i)
    os << (i ? "+" : "") << terms[i].coef << "*x^" << terms[i].powers[0] << "y^" << terms[i].powers[1] << "z^"
       << terms[i].powers[2];
  os << ')';
  ScalarField f;
  f.descriptor = os.str();
  f.value = [terms](const Vec3& x) {
    double v = 0.0;
    for (const auto& t : terms)
      v += t.coef * std::pow(x(0), t.powers[0]) * std::pow(x(1), t.powers[1]) * std::pow(x(2), t.powers[2]);
    return v;
  };
  f.gradient = [terms](const Vec3& x) {
    Vec3 g = Vec3::Zero();
    for (const auto& t : terms)
      for (int d = 0; d < 3; ++d) {
        if (t.powers[d] == 0) continue;
        double v = t.coef * t.powers[d];
        for (int e = 0; e < 3; ++e) v *= std::pow(x(e), e == d ? t.powers[e] - 1 : t.powers[e]);
        g(d) += v;
      }
    return g;
  };
  return f;
}

struct TrigTerm {
  double coef = 0.0;
  Vec3 k = Vec3::Zero();
  double phase = 0.0;
  int component = 0;  // only used by vector potentials
};

/// sum coef cos(k.x + phase).
inline ScalarField trig_scalar(std::vector<TrigTerm> terms) {
  ScalarField f;
  f.descriptor = "trig(" + std::to_string(terms.size()) + " terms)";
  f.value = [terms](const Vec3& x) {
    double v = 0.0;
    for (const auto& t : terms) v += t.coef * std::cos(t.k.dot(x) + t.phase);
    return v;
  };
  f.gradient = [terms](const Vec3& x) {
    Vec3 g = Vec3::Zero();
    for (const auto& t : terms) g -= t.coef * std::sin(t.k.dot(x) + t.phase) * t.k;
    return g;
  };
  return f;
}

inline PotentialField zero_potential() { return {}; }

/// A = B0/2 e3 x x (uniform field B0 along x3).
inline PotentialField axial_uniform(double b0) {
  return {"axial_uniform(B0=" + std::to_string(b0) + ")",
          [b0](const Vec3& x) { return Vec3(-0.5 * b0 * x(1), 0.5 * b0 * x(0), 0.0); }};
}

/// A = B0/2 d x x for a unit direction d.
inline PotentialField transverse_uniform(double b0, Vec3 direction) {
  if (direction.norm() == 0.0) throw Error(ErrorCode::InvalidArgument, "field direction must be nonzero");
  direction.normalize();
  std::ostringstream os;
  os << "transverse_uniform(B0=" << b0 << ",d=" << direction(0) << ',' << direction(1) << ',' << direction(2) << ')';
  return {os.str(), [b0, direction](const Vec3& x) { return Vec3(0.5 * b0 * direction.cross(x)); }};
}

/// A = grad chi.
inline PotentialField gauge_of(const ScalarField& chi) { return {"grad(" + chi.descriptor + ")", chi.gradient}; }

/// A + grad chi.
inline PotentialField plus_gradient(const PotentialField& a, const ScalarField& chi) {
  return {a.descriptor + "+grad(" + chi.descriptor + ")",
          [a = a.A, g = chi.gradient](const Vec3& x) { return Vec3(a(x) + g(x)); }};
}

/// Component-wise trigonometric polynomial: A_c = sum over terms with component c.
inline PotentialField custom_trig(std::vector<TrigTerm> terms) {
  for (const auto& t : terms)
    if (t.component < 0 || t.component > 2) throw Error(ErrorCode::InvalidArgument, "component must be 0, 1 or 2");
  return {"custom_json(" + std::to_string(terms.size()) + " terms)", [terms](const Vec3& x) {
            Vec3 a = Vec3::Zero();
            for (const auto& t : terms) a(t.component) += t.coef * std::cos(t.k.dot(x) + t.phase);
            return a;
          }};
}

/// Sampled boundedness check on a box [lo, hi]^3.
inline bool is_bounded_on(const PotentialField& a, const Vec3& lo, const Vec3& hi, int per_axis = 9) {
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      for (int k = 0; k < per_axis; ++k) {
        const Vec3 t(i, j, k);
        const Vec3 x = lo + (hi - lo).cwiseProduct(t / (per_axis - 1));
        if (!a(x).allFinite()) return false;
      }
  return true;
}

}  // namespace thintube
