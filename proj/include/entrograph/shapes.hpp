#pragma once

#include <gmpxx.h>

#include <string>
#include <variant>

namespace entrograph {

// Closed interval [a, b] on a line-like state space.
struct IntervalShape {
  mpq_class a, b;
};

// Closed rectangle [x0, x1] x [y0, y1] in the plane.
struct RectShape {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
};

// Closed arc of R/Z from a counterclockwise to b.
struct ArcShape {
  double a = 0, b = 0;
};

using Shape = std::variant<IntervalShape, RectShape, ArcShape>;

inline const char* shape_kind(const Shape& s) {
  switch (s.index()) {
    case 0: return "interval";
    case 1: return "rect";
    default: return "arc";
  }
}

}  // namespace entrograph
