// Simulate the two-dimensional benchmark system and recover a scalar
// noise-explicit model from its first 20 observations.

#include <cstdio>

#include "ncpop/lds.hpp"
#include "ncpop/sysid.hpp"

using namespace ncpop;

int main() {
  const auto model = lds::hazan_model(0.1, 0.1);
  const auto trajectory = lds::simulate(model, 20, 2024);
  const auto Y = trajectory.scalar_observations();

  sysid::LsFormulationConfig cfg;
  cfg.T = 20;
  const auto r = sysid::identify(Y, cfg);

  std::printf("solver      %s, %d iterations, %.3f s\n", sdp::to_string(r.solver_status), r.solver_iterations,
              r.wall_time);
  std::printf("moments     %zu\n", r.moment_variables);
  std::printf("lower bound %.6g (flat: %s)\n", r.lower_bound, r.extraction.flat ? "yes" : "no");
  std::printf("G_hat %.4f  F_hat %.4f\n", r.G_hat, r.F_hat);
  std::printf("nrmse       %.4f\n\n", r.nrmse_fit);
  std::printf("%4s %10s %10s\n", "t", "y", "f_hat");
  for (std::size_t t = 0; t < Y.size(); ++t) std::printf("%4zu %10.4f %10.4f\n", t + 1, Y[t], r.f_hat[t]);
}
