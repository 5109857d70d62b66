// Smallest eigenvalue of a symmetric matrix as an SDP:
// maximize t subject to A - t I >= 0.

#include <cstdio>

#include <Eigen/Dense>

#include "ncpop/sdp.hpp"

using namespace ncpop::sdp;

int main() {
  Eigen::Matrix3d A;
  A << 2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0;

  SdpProblem p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Constant(1, -1.0);
  LmiBlock block{3, {}};
  for (int i = 0; i < 3; ++i) {
    block.entries.push_back({0, i, i, -1.0});
    for (int j = i; j < 3; ++j)
      if (A(i, j) != 0.0) block.entries.push_back({kConstant, i, j, A(i, j)});
  }
  p.blocks.push_back(block);

  SolverOptions opt;
  opt.tol = 1e-9;
  const auto sol = solve(p, opt);
  const double exact = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(A).eigenvalues()[0];
  std::printf("status      %s after %d iterations\n", to_string(sol.status), sol.iterations);
  std::printf("sdp         %.10f\n", sol.y[0]);
  std::printf("eigensolver %.10f\n", exact);
  return sol.status == Status::optimal ? 0 : 1;
}
