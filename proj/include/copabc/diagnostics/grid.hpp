#pragma once

#include "copabc/core/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace copabc {

/// Uniform rectangular grid [x_min, x_max] x [y_min, y_max] with nx x ny nodes.
struct GridSpec {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  Eigen::Index nx = 200, ny = 200;

  void validate() const {
    require(nx >= 2 && ny >= 2, "GridSpec: need at least two nodes per axis");
    require(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min, "GridSpec: bad x range");
    require(std::isfinite(y_min) && std::isfinite(y_max) && y_max > y_min, "GridSpec: bad y range");
  }
  Eigen::VectorXd xs() const { return Eigen::VectorXd::LinSpaced(nx, x_min, x_max); }
  Eigen::VectorXd ys() const { return Eigen::VectorXd::LinSpaced(ny, y_min, y_max); }
  double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double dy() const { return (y_max - y_min) / static_cast<double>(ny - 1); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Trapezoid weights along one axis: h/2 at the ends, h inside.
inline Eigen::VectorXd trapezoid_weights(Eigen::Index n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w(0) = w(n - 1) = 0.5 * h;
  return w;
}

inline double trapezoid_integral(const GridSpec& g, const Eigen::MatrixXd& values) {
  return trapezoid_weights(g.nx, g.dx()).dot(values * trapezoid_weights(g.ny, g.dy()));
}

/// Density values on a grid, values(a, b) at (xs[a], ys[b]). `raw_integral`
/// records the trapezoidal integral before normalisation.
struct GridDensity2D {
  GridSpec grid;
  Eigen::MatrixXd values;
  double raw_integral = 1.0;
  std::string label;

  double integral() const { return trapezoid_integral(grid, values); }

  static GridDensity2D normalised(const GridSpec& g, Eigen::MatrixXd raw, std::string label = {}) {
    g.validate();
    require(raw.rows() == g.nx && raw.cols() == g.ny, "GridDensity2D: values do not match the grid");
    require(raw.allFinite() && (raw.array() >= 0.0).all(), "GridDensity2D: values must be finite and nonnegative");
    GridDensity2D d;
    d.grid = g;
    d.raw_integral = trapezoid_integral(g, raw);
    if (!(d.raw_integral > 0.0)) throw numerical_error("GridDensity2D: density has no mass on the grid");
    d.values = raw / d.raw_integral;
    d.label = std::move(label);
    return d;
  }
};

}  // namespace copabc
