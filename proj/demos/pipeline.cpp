// Walks through the diagnostic pipeline on a map file (default: z -> z^2):
// invert at a target, look for a second preimage, and classify the mountain pass.

#include <iostream>

#include "fninv/builtin_maps.hpp"
#include "fninv/expr.hpp"
#include "fninv/mountain_pass.hpp"
#include "fninv/probes.hpp"
#include "fninv/solve.hpp"

int main(int argc, char** argv) {
  using namespace fninv;
  const VectorMap f = argc > 1 ? expr::to_vector_map(expr::parse_file(argv[1]), argv[1]) : maps::complex_square();
  Vector y = Vector::Zero(static_cast<Eigen::Index>(f.dimension()));
  y[0] = 1.0;
  const Gauge eta = Gauge::half_sq_euclid();

  SolverConfig cfg;
  cfg.starts = 64;
  cfg.seed = 7;
  const InversionResult r = invert_at(f, y, eta, cfg);
  std::cout << f.label() << ": f(x) = y at x = " << r.x.transpose() << " (" << to_string(r.status) << ")\n";

  const auto reg = jacobian_regularity_probe(f, Box::cube(f.dimension(), -3, 3));
  std::cout << "smallest singular value on [-3,3]^n: " << reg.min_sigma.value << " at "
            << reg.min_sigma.location.transpose() << "\n";

  const auto pair = find_preimage_pair(f, y, eta, cfg);
  if (!pair) {
    std::cout << "no second preimage found\n";
    return 0;
  }
  std::cout << "second preimage: " << pair->x1.transpose() << " and " << pair->x2.transpose() << "\n";
  const MountainPassResult mp = diagnose_noninjectivity(f, *pair, eta);
  std::cout << "mountain pass: " << to_string(mp.classification) << " at " << mp.location.transpose()
            << ", level " << mp.level << "\n";
  return 0;
}
