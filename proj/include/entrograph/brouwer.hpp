#pragma once

// Brouwer's plane homeomorphism.  In the strip 0 < y < 1 points slide along
// the curves x = c + 1/(y(y-1)) by arc length 1 in the direction of
// decreasing y; above y = 1 they translate by +1, below y = 0 by -1.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <string>

#include "entrograph/error.hpp"

namespace entrograph::brouwer {

struct State {
  double x = 0;
  double y = 0;
};

// |dx/dy| along a curve at height t, with u = 1 - t passed separately so that
// points near y = 1 keep their precision.
inline double slope(double t, double u) {
  const double tu = t * u;
  return (t - u) / (tu * tu);
}

inline double speed(double t, double u) {
  const double g = slope(t, u);
  return std::sqrt(1.0 + g * g);
}

// Curve constant through (x, y), 0 < y < 1.
inline double curve_constant(double x, double y) { return x + 1.0 / (y * (1.0 - y)); }

namespace detail {

// Arc length from height y (complement w) to y - dir*delta.
inline double arc_length(double y, double w, double delta, int dir) {
  auto f = [&](double s) {
    const double t = y - dir * s * delta;
    const double u = w + dir * s * delta;
    return speed(t, u);
  };
  double err = 0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 20, 1e-13, &err);
  return delta * integral;
}

// dir = +1 moves down (forward map), dir = -1 moves up (inverse map).
inline State strip_move(double x, double y, int dir) {
  const double w = 1.0 - y;
  const double delta_max = dir > 0 ? y : w;
  double lo = 0, hi = delta_max;
  double delta = std::min(1.0 / speed(y, w), 0.5 * delta_max);
  bool done = false;
  // x(y - dir*delta) - x(y) written without cancellation.
  auto shift_x = [&](double d) {
    const double num = dir > 0 ? d * (y - w - d) : d * (w - y - d);
    return num / (y * w * (y - dir * d) * (w + dir * d));
  };
  for (int it = 0; it < 200; ++it) {
    // The chord bounds the arc from below; past length 1 the near-singular
    // quadrature is not needed.
    if (std::hypot(shift_x(delta), delta) > 1.0 + 1e-9) {
      hi = delta;
      delta = 0.5 * (lo + hi);
      continue;
    }
    const double f = arc_length(y, w, delta, dir) - 1.0;
    if (std::fabs(f) < 1e-12) {
      done = true;
      break;
    }
    if (f < 0) lo = delta;
    else hi = delta;
    if (hi - lo <= 1e-16 * hi) {
      done = true;
      break;
    }
    const double end_speed = speed(y - dir * delta, w + dir * delta);
    double next = delta - f / end_speed;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    // Quadrature noise can keep |f| above tolerance once delta is converged.
    if (std::fabs(next - delta) <= 1e-15 * delta) {
      done = true;
      break;
    }
    delta = next;
  }
  if (!done) {
    throw NumericalError("arc-length step did not converge at (" + std::to_string(x) + ", " +
                         std::to_string(y) + ")");
  }
  return {x + shift_x(delta), y - dir * delta};
}

}  // namespace detail

inline State step(const State& s) {
  if (s.y >= 1) return {s.x + 1, s.y};
  if (s.y <= 0) return {s.x - 1, s.y};
  return detail::strip_move(s.x, s.y, +1);
}

inline State step_inv(const State& s) {
  if (s.y >= 1) return {s.x - 1, s.y};
  if (s.y <= 0) return {s.x + 1, s.y};
  return detail::strip_move(s.x, s.y, -1);
}

// Point of the curve with constant c at abscissa x; upper branch has y > 1/2.
inline State on_curve(double c, double x, bool upper) {
  const double u = 1.0 / (c - x);
  if (!(u > 0 && u <= 0.25)) throw InvalidArgument("no curve point at that abscissa");
  const double r = std::sqrt(1.0 - 4.0 * u);
  const double low = 2.0 * u / (1.0 + r);  // smaller root, no cancellation
  return {x, upper ? 1.0 - low : low};
}

// Stereographic embedding of the plane into the unit sphere; the point at
// infinity goes to the north pole.
inline void sphere_embed(double x, double y, double* out) {
  const double r2 = x * x + y * y;
  if (!(r2 < 1e300)) {
    out[0] = 0;
    out[1] = 0;
    out[2] = 1;
    return;
  }
  const double d = r2 + 1.0;
  out[0] = 2 * x / d;
  out[1] = 2 * y / d;
  out[2] = (r2 - 1.0) / d;
}

}  // namespace entrograph::brouwer
