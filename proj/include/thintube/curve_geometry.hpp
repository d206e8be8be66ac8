// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed arc-length curves, Frenet frames, the rotated frame (N_alpha, B_alpha)
// and the tube-map Jacobian factor beta.
//
// Tube map: f(s, y) = r(s) + eps (y2 N_alpha(s) + y3 B_alpha(s)) with
//   N_alpha = cos a N + sin a B,  B_alpha = -sin a N + cos a B.
// From the Frenet equations N_alpha' = -k cos a T + theta B_alpha and
// B_alpha' = k sin a T - theta N_alpha, theta = tau + a', hence
//   d_s f = beta T + eps theta (y2 B_alpha - y3 N_alpha),
//   beta  = 1 - eps k (y2 cos a - y3 sin a).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thintube/error.hpp"

namespace thintube {

using Vec3 = Eigen::Vector3d;

/// Position and first three derivatives at one parameter value.
struct CurveJet {
  Vec3 r = Vec3::Zero();
  Vec3 d1 = Vec3::Zero();
  Vec3 d2 = Vec3::Zero();
  Vec3 d3 = Vec3::Zero();
};

/// Closed curve parametrised by arc length on [0, l).
class ClosedCurve {
 public:
  using JetFn = std::function<CurveJet(double)>;

  ClosedCurve(std::string descriptor, double length, JetFn jet)
      : descriptor_(std::move(descriptor)), length_(length), jet_(std::move(jet)) {
    if (!(length_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "curve length must be positive");
  }

  const std::string& descriptor() const { return descriptor_; }
  double length() const { return length_; }

  /// Evaluated at s reduced into [0, l).
  CurveJet jet(double s) const {
    double t = std::fmod(s, length_);
    if (t < 0.0) t += length_;
    return jet_(t);
  }
  Vec3 position(double s) const { return jet(s).r; }

 private:
  std::string descriptor_;
  double length_;
  JetFn jet_;
};

// ---------------------------------------------------------------------------
// Trigonometric raw curves r(t), t in [0, 2 pi).

/// c0 + sum_n (cos_coef[n] cos nt + sin_coef[n] sin nt); sin_coef[0] is unused.
struct TrigSeries {
  std::vector<double> cos_coef;
  std::vector<double> sin_coef;

  std::size_t degree() const { return std::max(cos_coef.size(), sin_coef.size()); }

  /// Value and first three t-derivatives.
  std::array<double, 4> jet(double t) const {
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    const std::size_t n_max = degree();
    const std::complex<double> step = std::polar(1.0, t);
    std::complex<double> e(1.0, 0.0);
    for (std::size_t n = 0; n < n_max; ++n, e *= step) {
      const double a = n < cos_coef.size() ? cos_coef[n] : 0.0;
      const double b = (n > 0 && n < sin_coef.size()) ? sin_coef[n] : 0.0;
      if (a == 0.0 && b == 0.0) continue;
      const double c = e.real(), s = e.imag(), k = static_cast<double>(n);
      out[0] += a * c + b * s;
      out[1] += k * (-a * s + b * c);
      out[2] += -k * k * (a * c + b * s);
      out[3] += k * k * k * (a * s - b * c);
    }
    return out;
  }
};

struct TrigCurve {
  std::array<TrigSeries, 3> xyz;

  CurveJet jet(double t) const {
    CurveJet j;
    for (int c = 0; c < 3; ++c) {
      const auto v = xyz[c].jet(t);
      j.r(c) = v[0];
      j.d1(c) = v[1];
      j.d2(c) = v[2];
      j.d3(c) = v[3];
    }
    return j;
  }

  std::size_t degree() const { return std::max({xyz[0].degree(), xyz[1].degree(), xyz[2].degree()}); }

  /// Trigonometric interpolant of a periodic map sampled at n equispaced points.
  static TrigCurve interpolate(const std::function<Vec3(double)>& raw, int n) {
    if (n < 4) throw Error(ErrorCode::InvalidArgument, "need at least 4 samples");
    std::vector<Vec3> samples(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) samples[j] = raw(2.0 * std::numbers::pi * j / n);
    TrigCurve out;
    const int half = (n - 1) / 2;  // drop the Nyquist term to keep the interpolant real-symmetric
    for (int c = 0; c < 3; ++c) {
      auto& ser = out.xyz[c];
      ser.cos_coef.assign(half + 1, 0.0);
      ser.sin_coef.assign(half + 1, 0.0);
      for (int k = 0; k <= half; ++k) {
        double ac = 0.0, as = 0.0;
        for (int j = 0; j < n; ++j) {
          const double ang = 2.0 * std::numbers::pi * k * j / n;
          ac += samples[j](c) * std::cos(ang);
          as += samples[j](c) * std::sin(ang);
        }
        ser.cos_coef[k] = (k == 0 ? 1.0 : 2.0) * ac / n;
        ser.sin_coef[k] = k == 0 ? 0.0 : 2.0 * as / n;
      }
    }
    return out;
  }
};

namespace detail {

// Fourier model of the speed |r'(t)|, integrated term by term.
class CumulativeLength {
 public:
  explicit CumulativeLength(const TrigCurve& raw) {
    int m = 256;
    while (m < 8 * static_cast<int>(raw.degree() + 1)) m *= 2;
    for (;; m *= 2) {
      std::vector<double> speed(static_cast<std::size_t>(m));
      double min_speed = std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        speed[j] = raw.jet(2.0 * std::numbers::pi * j / m).d1.norm();
        min_speed = std::min(min_speed, speed[j]);
      }
      if (min_speed < 1e-8) throw Error(ErrorCode::DegenerateSpeed, "raw curve speed falls below 1e-8");
      const int half = m / 2 - 1;
      cos_.assign(half + 1, 0.0);
      sin_.assign(half + 1, 0.0);
      for (int k = 0; k <= half; ++k) {
        double ac = 0.0, as = 0.0;
        const std::complex<double> step = std::polar(1.0, 2.0 * std::numbers::pi * k / m);
        std::complex<double> e(1.0, 0.0);
        for (int j = 0; j < m; ++j, e *= step) {
          ac += speed[j] * e.real();
          as += speed[j] * e.imag();
        }
        cos_[k] = (k == 0 ? 1.0 : 2.0) * ac / m;
        sin_[k] = k == 0 ? 0.0 : 2.0 * as / m;
      }
      double tail = 0.0;
      for (int k = 3 * half / 4; k <= half; ++k) tail = std::max(tail, std::hypot(cos_[k], sin_[k]));
      if (tail <= 1e-14 * cos_[0] || m >= (1 << 15)) break;
    }
    std::size_t keep = cos_.size();
    while (keep > 1 && std::hypot(cos_[keep - 1], sin_[keep - 1]) < 1e-17 * cos_[0]) --keep;
    cos_.resize(keep);
    sin_.resize(keep);
  }

  double mean_speed() const { return cos_[0]; }
  double total() const { return 2.0 * std::numbers::pi * cos_[0]; }

  double operator()(double t) const {
    double v = cos_[0] * t;
    const std::complex<double> step = std::polar(1.0, t);
    std::complex<double> e = step;
    for (std::size_t n = 1; n < cos_.size(); ++n, e *= step) {
      const double k = static_cast<double>(n);
      v += cos_[n] * e.imag() / k - sin_[n] * (e.real() - 1.0) / k;
    }
    return v;
  }

 private:
  std::vector<double> cos_;
  std::vector<double> sin_;
};

}  // namespace detail

/// Arc-length reparametrisation of a trigonometric curve. Inverts the
/// cumulative length by safeguarded Newton iteration and differentiates the
/// composite r(t(s)) exactly by the chain rule.
inline ClosedCurve reparametrize_arclength(const TrigCurve& raw, std::string descriptor) {
  auto cum = std::make_shared<detail::CumulativeLength>(raw);
  const double l = cum->total();
  const double two_pi = 2.0 * std::numbers::pi;
  auto jet = [raw, cum, l, two_pi](double s) {
    double lo = 0.0, hi = two_pi;
    double t = two_pi * s / l;
    for (int it = 0; it < 100; ++it) {
      const double f = (*cum)(t) - s;
      if (f > 0.0) hi = t; else lo = t;
      const double step = f / raw.jet(t).d1.norm();
      double next = t - step;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 1e-15 * two_pi) { t = next; break; }
      t = next;
    }
    const CurveJet q = raw.jet(t);
    const double sig = q.d1.norm();
    const double g1 = q.d1.dot(q.d2);                       // sigma sigma'
    const double dsig = g1 / sig;                           // sigma'
    const double d2sig = (q.d2.squaredNorm() + q.d1.dot(q.d3)) / sig - g1 * g1 / (sig * sig * sig);
    const double t1 = 1.0 / sig;
    const double t2 = -dsig / (sig * sig * sig);
    const double t3 = -d2sig / std::pow(sig, 4) + 3.0 * dsig * dsig / std::pow(sig, 5);
    CurveJet out;
    out.r = q.r;
    out.d1 = q.d1 * t1;
    out.d2 = q.d2 * (t1 * t1) + q.d1 * t2;
    out.d3 = q.d3 * (t1 * t1 * t1) + q.d2 * (3.0 * t1 * t2) + q.d1 * t3;
    return out;
  };
  return ClosedCurve(std::move(descriptor), l, jet);
}

// ---------------------------------------------------------------------------
// Built-in curves

inline ClosedCurve make_circle(double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "circle radius must be positive");
  const double l = 2.0 * std::numbers::pi * radius;
  return ClosedCurve("circle(R=" + std::to_string(radius) + ")", l, [radius](double s) {
    const double u = s / radius, c = std::cos(u), sn = std::sin(u);
    CurveJet j;
    j.r = Vec3(radius * c, radius * sn, 0.0);
    j.d1 = Vec3(-sn, c, 0.0);
    j.d2 = Vec3(-c, -sn, 0.0) / radius;
    j.d3 = Vec3(sn, -c, 0.0) / (radius * radius);
    return j;
  });
}

inline TrigCurve ellipse_raw(double a, double b) {
  TrigCurve raw;
  raw.xyz[0].cos_coef = {0.0, a};
  raw.xyz[1].sin_coef = {0.0, b};
  return raw;
}

inline ClosedCurve make_ellipse(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::InvalidArgument, "ellipse semi-axes must be positive");
  return reparametrize_arclength(ellipse_raw(a, b),
                                 "ellipse(a=" + std::to_string(a) + ",b=" + std::to_string(b) + ")");
}

/// ((R + rho cos qt) cos pt, (R + rho cos qt) sin pt, rho sin qt).
inline TrigCurve torus_knot_raw(int p, int q, double major, double minor) {
  if (p < 1 || q < 1) throw Error(ErrorCode::InvalidArgument, "torus knot windings must be >= 1");
  if (!(major > minor && minor > 0.0)) throw Error(ErrorCode::InvalidArgument, "torus knot needs R > rho > 0");
  TrigCurve raw;
  const std::size_t deg = static_cast<std::size_t>(p + q) + 1;
  for (auto& s : raw.xyz) {
    s.cos_coef.assign(deg, 0.0);
    s.sin_coef.assign(deg, 0.0);
  }
  // cos(qt) cos(pt) = (cos((p+q)t) + cos((p-q)t)) / 2, similarly for sin.
  raw.xyz[0].cos_coef[p] += major;
  raw.xyz[1].sin_coef[p] += major;
  raw.xyz[0].cos_coef[p + q] += 0.5 * minor;
  raw.xyz[1].sin_coef[p + q] += 0.5 * minor;
  const int d = std::abs(p - q);
  const double sign = p >= q ? 1.0 : -1.0;  // sin((p-q)t) = sign * sin(|p-q| t)
  raw.xyz[0].cos_coef[d] += 0.5 * minor;
  if (d > 0) raw.xyz[1].sin_coef[d] += 0.5 * minor * sign;
  raw.xyz[2].sin_coef[q] += minor;
  return raw;
}

inline ClosedCurve make_torus_knot(int p, int q, double major, double minor) {
  return reparametrize_arclength(torus_knot_raw(p, q, major, minor),
                                 "torus_knot(p=" + std::to_string(p) + ",q=" + std::to_string(q) +
                                     ",R=" + std::to_string(major) + ",rho=" + std::to_string(minor) + ")");
}

// ---------------------------------------------------------------------------
// Rotation angle alpha(s) of the cross-section

struct RotationProfile {
  std::string descriptor = "zero";
  std::function<std::array<double, 2>(double)> eval;  // (alpha, alpha')

  static RotationProfile zero() { return {"zero", [](double) { return std::array<double, 2>{0.0, 0.0}; }}; }

  /// alpha(s) = 2 pi turns s / l.
  static RotationProfile linear(double turns, double length) {
    const double rate = 2.0 * std::numbers::pi * turns / length;
    return {"linear(turns=" + std::to_string(turns) + ")",
            [rate](double s) { return std::array<double, 2>{rate * s, rate}; }};
  }

  static RotationProfile constant(double angle) {
    return {"constant(" + std::to_string(angle) + ")",
            [angle](double) { return std::array<double, 2>{angle, 0.0}; }};
  }

  /// alpha(s) = sum_n a_n cos(2 pi n s / l) + b_n sin(2 pi n s / l).
  static RotationProfile fourier(std::vector<double> cos_coef, std::vector<double> sin_coef, double length) {
    const double w = 2.0 * std::numbers::pi / length;
    return {"fourier", [cos_coef = std::move(cos_coef), sin_coef = std::move(sin_coef), w](double s) {
              std::array<double, 2> out{0.0, 0.0};
              const std::size_t n_max = std::max(cos_coef.size(), sin_coef.size());
              for (std::size_t n = 0; n < n_max; ++n) {
                const double a = n < cos_coef.size() ? cos_coef[n] : 0.0;
                const double b = (n > 0 && n < sin_coef.size()) ? sin_coef[n] : 0.0;
                const double k = w * static_cast<double>(n);
                out[0] += a * std::cos(k * s) + b * std::sin(k * s);
                out[1] += k * (-a * std::sin(k * s) + b * std::cos(k * s));
              }
              return out;
            }};
  }
};

// ---------------------------------------------------------------------------
// Frames

struct FrenetData {
  double s = 0.0;
  Vec3 r, T, N, B;
  double k = 0.0;      // curvature
  double dk = 0.0;     // k'
  double tau = 0.0;    // torsion
  double alpha = 0.0;
  double dalpha = 0.0;
  Vec3 N_alpha, B_alpha;

  double twist() const { return tau + dalpha; }
};

inline constexpr double kDefaultMinCurvature = 1e-6;

inline FrenetData frenet(const ClosedCurve& curve, const RotationProfile& rotation, double s,
                         double k_min = kDefaultMinCurvature) {
  const CurveJet j = curve.jet(s);
  FrenetData f;
  f.s = s;
  f.r = j.r;
  f.T = j.d1;
  f.k = j.d2.norm();
  if (f.k < k_min) throw Error(ErrorCode::VanishingCurvature, "curvature below k_min at s = " + std::to_string(s));
  f.N = j.d2 / f.k;
  f.B = f.T.cross(f.N);
  f.tau = j.d1.cross(j.d2).dot(j.d3) / (f.k * f.k);
  f.dk = j.d2.dot(j.d3) / f.k;
  const auto a = rotation.eval(s);
  f.alpha = a[0];
  f.dalpha = a[1];
  const double ca = std::cos(f.alpha), sa = std::sin(f.alpha);
  f.N_alpha = ca * f.N + sa * f.B;
  f.B_alpha = -sa * f.N + ca * f.B;
  return f;
}

inline FrenetData frenet(const ClosedCurve& curve, double s, double k_min = kDefaultMinCurvature) {
  return frenet(curve, RotationProfile::zero(), s, k_min);
}

// ---------------------------------------------------------------------------
// Tube map

/// Normal offset coordinate <z_alpha, y> entering beta.
inline double normal_offset(const FrenetData& f, double y2, double y3) {
  return y2 * std::cos(f.alpha) - y3 * std::sin(f.alpha);
}

inline double beta(const FrenetData& f, double eps, double y2, double y3) {
  return 1.0 - eps * f.k * normal_offset(f, y2, y3);
}

inline double beta(const ClosedCurve& curve, const RotationProfile& rotation, double eps, double s, double y2,
                   double y3) {
  return beta(frenet(curve, rotation, s), eps, y2, y3);
}

/// d_s beta at fixed y.
inline double beta_ds(const FrenetData& f, double eps, double y2, double y3) {
  const double ca = std::cos(f.alpha), sa = std::sin(f.alpha);
  return -eps * (f.dk * (y2 * ca - y3 * sa) + f.k * f.dalpha * (-y2 * sa - y3 * ca));
}

/// (y2 d3 - y3 d2) beta.
inline double beta_dphi(const FrenetData& f, double eps, double y2, double y3) {
  const double ca = std::cos(f.alpha), sa = std::sin(f.alpha);
  return eps * f.k * (y2 * sa + y3 * ca);
}

struct TubeMapSample {
  double eps = 0.0;
  double z2 = 1.0, z3 = 0.0;  // beta = 1 - eps k (z2 y2 + z3 y3)
  double beta = 1.0;
};

inline TubeMapSample tube_map_sample(const FrenetData& f, double eps, double y2, double y3) {
  return {eps, std::cos(f.alpha), -std::sin(f.alpha), beta(f, eps, y2, y3)};
}

inline Vec3 tube_point(const FrenetData& f, double eps, double y2, double y3) {
  return f.r + eps * (y2 * f.N_alpha + y3 * f.B_alpha);
}

/// d_s f(s, y) at fixed y.
inline Vec3 tube_tangent_s(const FrenetData& f, double eps, double y2, double y3) {
  return beta(f, eps, y2, y3) * f.T + eps * f.twist() * (y2 * f.B_alpha - y3 * f.N_alpha);
}

inline double max_curvature(const ClosedCurve& curve, int samples = 2048) {
  double k = 0.0;
  for (int i = 0; i < samples; ++i) k = std::max(k, curve.jet(curve.length() * i / samples).d2.norm());
  return k;
}

/// eps * max k * rho < 1 - margin.
inline bool validate_thinness(double k_max, double eps, double rho, double margin = 0.05) {
  return eps * k_max * rho < 1.0 - margin;
}

inline bool validate_thinness(const ClosedCurve& curve, double eps, double rho, double margin = 0.05) {
  return validate_thinness(max_curvature(curve), eps, rho, margin);
}

}  // namespace thintube
