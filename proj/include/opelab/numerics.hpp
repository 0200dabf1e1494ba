#pragma once

// Small numeric helpers shared by the exact oracles.

#include <cmath>

namespace opelab {

// Neumaier-compensated accumulator: keeps long sums of path-probability
// weighted terms accurate to a few ulps regardless of path count, which the
// enumeration-vs-recursion agreement tolerances rely on.
struct NeumaierSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }
};

}  // namespace opelab
