#pragma once

// Operators on the truncated qubit (x) cavity (x) JPA Hilbert space and
// superoperators acting on column-stacked density matrices.
//
// Basis ordering is fixed: |q, n, m> with the qubit most significant,
//   index(q, n, m) = (q * N_c + n) * N_j + m,
// qubit states ordered (|g>, |e>).  A density matrix rho is vectorized by
// stacking columns, vec(rho)[i + j * D] = rho(i, j), so that
//   vec(A rho B) = (B^T kron A) vec(rho).

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cqed {

using cplx = std::complex<double>;
using SparseMat = Eigen::SparseMatrix<cplx>;
using DenseMat = Eigen::MatrixXcd;
using DenseVec = Eigen::VectorXcd;

enum class Subsystem { qubit = 0, cavity = 1, jpa = 2 };

const char* to_string(Subsystem s);

class SpaceLayout {
 public:
  SpaceLayout(int cavity_dim, int jpa_dim);

  int qubit_dim() const { return 2; }
  int cavity_dim() const { return cavity_dim_; }
  int jpa_dim() const { return jpa_dim_; }
  int dim(Subsystem s) const;
  int total_dim() const { return 2 * cavity_dim_ * jpa_dim_; }
  int index(int q, int n, int m) const { return (q * cavity_dim_ + n) * jpa_dim_ + m; }

  // A JPA slot of dimension one means the JPA mode is absent.
  bool has_jpa() const { return jpa_dim_ > 1; }

  friend bool operator==(const SpaceLayout&, const SpaceLayout&) = default;

 private:
  int cavity_dim_;
  int jpa_dim_;
};

// Operator on the full layout.
class Operator {
 public:
  Operator(SpaceLayout layout, SparseMat matrix);

  static Operator zero(const SpaceLayout& layout);
  static Operator identity(const SpaceLayout& layout);

  const SpaceLayout& layout() const { return layout_; }
  const SparseMat& matrix() const { return matrix_; }
  int dim() const { return layout_.total_dim(); }

  Operator adjoint() const;
  DenseMat dense() const { return DenseMat(matrix_); }

  // max |A - A^dag| entrywise
  double hermiticity_error() const;

  Operator& operator+=(const Operator& rhs);
  Operator& operator-=(const Operator& rhs);
  Operator& operator*=(cplx s);

  friend Operator operator+(Operator lhs, const Operator& rhs) { return lhs += rhs; }
  friend Operator operator-(Operator lhs, const Operator& rhs) { return lhs -= rhs; }
  friend Operator operator*(cplx s, Operator op) { return op *= s; }
  friend Operator operator*(Operator op, cplx s) { return op *= s; }
  friend Operator operator*(const Operator& lhs, const Operator& rhs);

 private:
  SpaceLayout layout_;
  SparseMat matrix_;
};

struct DensityDiagnostics {
  double trace_error = 0.0;        // |tr rho - 1|
  double hermiticity_error = 0.0;  // max |rho - rho^dag|
  double min_eigenvalue = 0.0;
};

class DensityMatrix {
 public:
  DensityMatrix(SpaceLayout layout, DenseMat matrix);

  const SpaceLayout& layout() const { return layout_; }
  const DenseMat& matrix() const { return matrix_; }

  DensityDiagnostics diagnostics() const;

  // Throws InvalidArgument unless trace, hermiticity and positivity are within
  // the given slack.
  void validate(double trace_tol = 1e-9, double herm_tol = 1e-10, double eig_floor = -1e-8) const;

  cplx expectation(const Operator& op) const;

 private:
  SpaceLayout layout_;
  DenseMat matrix_;
};

// Generator acting on vec(rho).
class Superoperator {
 public:
  Superoperator(SpaceLayout layout, SparseMat matrix);

  const SpaceLayout& layout() const { return layout_; }
  const SparseMat& matrix() const { return matrix_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }

  DenseMat apply(const DenseMat& rho) const;
  // Heisenberg-picture action L* with tr(S L(rho)) = tr(L*(S) rho).
  DenseMat apply_adjoint(const DenseMat& s) const;

  // max |L^dag(1)| / max |L|; zero for a trace-preserving generator.
  double trace_preservation_error() const;
  double max_abs_entry() const;

  Superoperator& operator+=(const Superoperator& rhs);
  friend Superoperator operator+(Superoperator lhs, const Superoperator& rhs) { return lhs += rhs; }
  friend Superoperator operator*(double s, Superoperator op);

 private:
  SpaceLayout layout_;
  SparseMat matrix_;
};

DenseVec vectorize(const DenseMat& rho);
DenseMat unvectorize(const DenseVec& v, int dim);

// Single-mode annihilation operator, <n-1|a|n> = sqrt(n).
SparseMat annihilation(int dim);

struct QubitOps {
  SparseMat lower;  // sigma, |e> -> |g>
  SparseMat raise;  // sigma^dag
  SparseMat z;      // sigma^dag sigma - sigma sigma^dag = diag(-1, +1)
};
QubitOps qubit_ops();

SparseMat sparse_identity(int dim);

// identity (x) ... (x) op (x) ... (x) identity in the fixed subsystem order.
Operator embed(const SparseMat& op, Subsystem slot, const SpaceLayout& layout);

// Reduced density matrix of one subsystem.
DenseMat partial_trace(const DensityMatrix& rho, Subsystem keep);

// rate * D[c], D[c]rho = c rho c^dag - {c^dag c, rho}/2.
struct Channel {
  double rate;
  Operator collapse;
};

// Unidirectional coupling of a source mode (b) into a target mode (a):
//   strength * (a rho b^dag + b rho a^dag - rho b^dag a - a^dag b rho).
struct CascadeCoupling {
  double strength;
  Operator source;
  Operator target;
};

// Schroedinger-picture generator L with drho/dt = -i[H, rho] + sum rate D[c] rho
// + cascade terms.  Entries below 1e-15 of the largest entry are dropped.
Superoperator vectorize_generator(const Operator& h, std::span<const Channel> channels,
                                  std::span<const CascadeCoupling> cross_terms = {});

// Superoperators of left and right multiplication: rho -> A rho, rho -> rho B.
SparseMat left_multiplication(const SparseMat& a);
SparseMat right_multiplication(const SparseMat& b);

}  // namespace cqed
