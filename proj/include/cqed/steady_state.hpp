#pragma once

#include <string>
#include <vector>

#include "cqed/fock.hpp"

namespace cqed {

struct SolverOptions {
  // Residual max |L rho| relative to max |L|.
  double residual_tol = 1e-10;
  // Reported, never enforced.
  double positivity_floor = -1e-8;
  // Bordered systems whose smallest singular value (estimated by inverse
  // iteration) falls below this fraction of max |A| are treated as singular:
  // the generator's null space is more than one dimensional.
  double uniqueness_floor = 1e-12;
  // Reduced systems larger than this use preconditioned BiCGSTAB instead of LU.
  long iterative_threshold = 400000;
  double iterative_tol = 1e-13;
  int iterative_max_iterations = 5000;
  // Solve only the invariant blocks of L touched by the problem.
  bool reduce_sectors = true;
};

struct SolverStats {
  long full_dim = 0;
  long reduced_dim = 0;
  long nonzeros = 0;
  int components = 0;
  std::string method;  // "umfpack", "sparse-lu" or "bicgstab"
  int iterations = 0;
  long replaced_row = -1;  // index into the full vectorized space
  double singular_value_ratio = 0.0;  // sigma_min estimate / max |A|
};

struct TailReport {
  double cavity = 0.0;  // population of the top retained cavity level
  double jpa = 0.0;
};

struct SteadyStateResult {
  DensityMatrix rho;
  double residual = 0.0;
  TailReport tail_mass;
  DensityDiagnostics diagnostics;
  bool positive = true;  // min eigenvalue above positivity_floor
  SolverStats solver_stats;
};

// Unique rho with L rho = 0 and tr rho = 1.  One row of the system, chosen
// among the rows belonging to diagonal elements rho_ii as the one with the
// smallest norm, is replaced by the trace constraint.
//
// Throws SolverError("ambiguous steady state ...") when the null space is
// more than one dimensional and SolverError with the residual when the solve
// does not converge.
SteadyStateResult steady_state(const Superoperator& L, const SolverOptions& opts = {});

// Solves (L + shift) x = rhs.  Throws SolverError when the shifted system is
// singular.
DenseVec solve_shifted(const Superoperator& L, cplx shift, const DenseVec& rhs, const SolverOptions& opts = {},
                       SolverStats* stats = nullptr);

struct TruncationCheck {
  bool pass = true;
  double threshold = 0.0;
  TailReport tails;
  int recommended_cavity_dim = 0;
  int recommended_jpa_dim = 0;
  std::string message;
};

// Fails when the top Fock level of either mode holds more than threshold.
TruncationCheck check_truncation(const SteadyStateResult& result, double threshold = 1e-8);

// Top-level populations of the cavity and JPA marginals.
TailReport tail_populations(const DensityMatrix& rho);

// Connected components of the sparsity graph of a square matrix; entry k is
// the component label of index k, labels are 0..n_components-1.
std::vector<int> sparsity_components(const SparseMat& m, int* n_components = nullptr);

}  // namespace cqed
