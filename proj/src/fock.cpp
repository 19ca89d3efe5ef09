#include "cqed/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "cqed/error.hpp"

namespace cqed {

namespace {

constexpr double kDropRelative = 1e-15;

SparseMat kron(const SparseMat& a, const SparseMat& b) {
  SparseMat out = Eigen::kroneckerProduct(a, b);
  return out;
}

void require_same_layout(const SpaceLayout& a, const SpaceLayout& b, const char* what) {
  if (!(a == b)) throw InvalidArgument(std::string(what) + ": layout mismatch");
}

double max_abs(const SparseMat& m) {
  double out = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

}  // namespace

const char* to_string(Subsystem s) {
  switch (s) {
    case Subsystem::qubit: return "qubit";
    case Subsystem::cavity: return "cavity";
    case Subsystem::jpa: return "jpa";
  }
  return "invalid";
}

SpaceLayout::SpaceLayout(int cavity_dim, int jpa_dim) : cavity_dim_(cavity_dim), jpa_dim_(jpa_dim) {
  if (cavity_dim < 1 || jpa_dim < 1)
    throw InvalidArgument("SpaceLayout: subsystem dimensions must be >= 1");
}

int SpaceLayout::dim(Subsystem s) const {
  switch (s) {
    case Subsystem::qubit: return 2;
    case Subsystem::cavity: return cavity_dim_;
    case Subsystem::jpa: return jpa_dim_;
  }
  throw InvalidArgument("subsystem slot out of range");
}

// ---------------------------------------------------------------------------

Operator::Operator(SpaceLayout layout, SparseMat matrix) : layout_(layout), matrix_(std::move(matrix)) {
  const int d = layout_.total_dim();
  if (matrix_.rows() != d || matrix_.cols() != d)
    throw InvalidArgument("Operator: matrix is " + std::to_string(matrix_.rows()) + "x" +
                          std::to_string(matrix_.cols()) + ", layout needs " + std::to_string(d));
  matrix_.makeCompressed();
}

Operator Operator::zero(const SpaceLayout& layout) {
  return Operator(layout, SparseMat(layout.total_dim(), layout.total_dim()));
}

Operator Operator::identity(const SpaceLayout& layout) {
  return Operator(layout, sparse_identity(layout.total_dim()));
}

Operator Operator::adjoint() const { return Operator(layout_, SparseMat(matrix_.adjoint())); }

double Operator::hermiticity_error() const {
  SparseMat diff = matrix_ - SparseMat(matrix_.adjoint());
  return max_abs(diff);
}

Operator& Operator::operator+=(const Operator& rhs) {
  require_same_layout(layout_, rhs.layout_, "Operator +");
  matrix_ += rhs.matrix_;
  return *this;
}

Operator& Operator::operator-=(const Operator& rhs) {
  require_same_layout(layout_, rhs.layout_, "Operator -");
  matrix_ -= rhs.matrix_;
  return *this;
}

Operator& Operator::operator*=(cplx s) {
  matrix_ *= s;
  return *this;
}

Operator operator*(const Operator& lhs, const Operator& rhs) {
  require_same_layout(lhs.layout_, rhs.layout_, "Operator *");
  return Operator(lhs.layout_, SparseMat(lhs.matrix_ * rhs.matrix_));
}

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(SpaceLayout layout, DenseMat matrix) : layout_(layout), matrix_(std::move(matrix)) {
  const int d = layout_.total_dim();
  if (matrix_.rows() != d || matrix_.cols() != d)
    throw InvalidArgument("DensityMatrix: dimension does not match layout");
}

DensityDiagnostics DensityMatrix::diagnostics() const {
  DensityDiagnostics out;
  out.trace_error = std::abs(matrix_.trace() - cplx(1.0));
  out.hermiticity_error = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  const DenseMat herm = 0.5 * (matrix_ + matrix_.adjoint());
  Eigen::SelfAdjointEigenSolver<DenseMat> es(herm, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  return out;
}

void DensityMatrix::validate(double trace_tol, double herm_tol, double eig_floor) const {
  const auto d = diagnostics();
  if (d.trace_error > trace_tol)
    throw InvalidArgument("density matrix trace off by " + std::to_string(d.trace_error));
  if (d.hermiticity_error > herm_tol)
    throw InvalidArgument("density matrix not Hermitian: " + std::to_string(d.hermiticity_error));
  if (d.min_eigenvalue < eig_floor)
    throw InvalidArgument("density matrix has eigenvalue " + std::to_string(d.min_eigenvalue));
}

cplx DensityMatrix::expectation(const Operator& op) const {
  require_same_layout(layout_, op.layout(), "expectation");
  // tr(A rho) = sum_ij A_ij rho_ji
  cplx acc = 0.0;
  const SparseMat& a = op.matrix();
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMat::InnerIterator it(a, k); it; ++it) acc += it.value() * matrix_(it.col(), it.row());
  return acc;
}

// ---------------------------------------------------------------------------

Superoperator::Superoperator(SpaceLayout layout, SparseMat matrix) : layout_(layout), matrix_(std::move(matrix)) {
  const long d = layout_.total_dim();
  if (matrix_.rows() != d * d || matrix_.cols() != d * d)
    throw InvalidArgument("Superoperator: matrix must be D^2 x D^2");
  matrix_.makeCompressed();
}

DenseMat Superoperator::apply(const DenseMat& rho) const {
  const int d = layout_.total_dim();
  return unvectorize(matrix_ * vectorize(rho), d);
}

DenseMat Superoperator::apply_adjoint(const DenseMat& s) const {
  // tr(S L(rho)) = vec(S^T)^T L vec(rho)  =>  L*(S)^T = unvec(L^T vec(S^T))
  const int d = layout_.total_dim();
  DenseVec v = matrix_.transpose() * vectorize(s.transpose());
  return unvectorize(v, d).transpose();
}

double Superoperator::max_abs_entry() const { return max_abs(matrix_); }

double Superoperator::trace_preservation_error() const {
  const int d = layout_.total_dim();
  const double scale = max_abs_entry();
  if (scale == 0.0) return 0.0;
  return apply_adjoint(DenseMat::Identity(d, d)).cwiseAbs().maxCoeff() / scale;
}

Superoperator& Superoperator::operator+=(const Superoperator& rhs) {
  require_same_layout(layout_, rhs.layout_, "Superoperator +");
  matrix_ += rhs.matrix_;
  return *this;
}

Superoperator operator*(double s, Superoperator op) {
  op.matrix_ *= s;
  return op;
}

// ---------------------------------------------------------------------------

DenseVec vectorize(const DenseMat& rho) {
  return Eigen::Map<const DenseVec>(rho.data(), rho.size());
}

DenseMat unvectorize(const DenseVec& v, int dim) {
  if (v.size() != static_cast<Eigen::Index>(dim) * dim) throw InvalidArgument("unvectorize: size mismatch");
  return Eigen::Map<const DenseMat>(v.data(), dim, dim);
}

SparseMat annihilation(int dim) {
  if (dim < 2) throw InvalidArgument("annihilation: dimension must be >= 2, got " + std::to_string(dim));
  SparseMat a(dim, dim);
  a.reserve(Eigen::VectorXi::Constant(dim, 1));
  for (int n = 1; n < dim; ++n) a.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
  a.makeCompressed();
  return a;
}

QubitOps qubit_ops() {
  QubitOps q;
  q.lower.resize(2, 2);
  q.lower.insert(0, 1) = 1.0;
  q.raise = q.lower.adjoint();
  q.z = SparseMat(q.raise * q.lower) - SparseMat(q.lower * q.raise);
  q.lower.makeCompressed();
  q.raise.makeCompressed();
  q.z.makeCompressed();
  return q;
}

SparseMat sparse_identity(int dim) {
  SparseMat id(dim, dim);
  id.setIdentity();
  return id;
}

Operator embed(const SparseMat& op, Subsystem slot, const SpaceLayout& layout) {
  const int d = layout.dim(slot);  // throws for an out-of-range slot
  if (op.rows() != d || op.cols() != d)
    throw InvalidArgument(std::string("embed: operator dimension ") + std::to_string(op.rows()) +
                          " does not match " + to_string(slot) + " dimension " + std::to_string(d));
  const int nq = layout.qubit_dim(), nc = layout.cavity_dim(), nj = layout.jpa_dim();
  SparseMat full;
  switch (slot) {
    case Subsystem::qubit: full = kron(op, sparse_identity(nc * nj)); break;
    case Subsystem::cavity: full = kron(sparse_identity(nq), kron(op, sparse_identity(nj))); break;
    case Subsystem::jpa: full = kron(sparse_identity(nq * nc), op); break;
  }
  return Operator(layout, std::move(full));
}

DenseMat partial_trace(const DensityMatrix& rho, Subsystem keep) {
  const SpaceLayout& lay = rho.layout();
  const int dims[3] = {lay.qubit_dim(), lay.cavity_dim(), lay.jpa_dim()};
  const int k = static_cast<int>(keep);
  if (k < 0 || k > 2) throw InvalidArgument("partial_trace: subsystem slot out of range");
  const DenseMat& m = rho.matrix();
  DenseMat out = DenseMat::Zero(dims[k], dims[k]);
  int idx[3], jdx[3];
  for (idx[0] = 0; idx[0] < dims[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < dims[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < dims[2]; ++idx[2]) {
        const int row = lay.index(idx[0], idx[1], idx[2]);
        for (int kk = 0; kk < dims[k]; ++kk) {
          jdx[0] = idx[0];
          jdx[1] = idx[1];
          jdx[2] = idx[2];
          jdx[k] = kk;
          out(idx[k], kk) += m(row, lay.index(jdx[0], jdx[1], jdx[2]));
        }
      }
  return out;
}

SparseMat left_multiplication(const SparseMat& a) {
  return kron(sparse_identity(static_cast<int>(a.rows())), a);
}

SparseMat right_multiplication(const SparseMat& b) {
  SparseMat bt = b.transpose();
  return kron(bt, sparse_identity(static_cast<int>(b.rows())));
}

Superoperator vectorize_generator(const Operator& h, std::span<const Channel> channels,
                                  std::span<const CascadeCoupling> cross_terms) {
  const SpaceLayout& layout = h.layout();
  const cplx minus_i(0.0, -1.0);

  SparseMat gen = minus_i * (left_multiplication(h.matrix()) - right_multiplication(h.matrix()));

  for (const Channel& ch : channels) {
    require_same_layout(layout, ch.collapse.layout(), "vectorize_generator channel");
    if (!(ch.rate >= 0.0)) throw InvalidArgument("vectorize_generator: negative channel rate");
    if (ch.rate == 0.0) continue;
    const SparseMat& c = ch.collapse.matrix();
    const SparseMat cdc = c.adjoint() * c;
    const SparseMat cconj = c.conjugate();
    SparseMat term = kron(cconj, c) - 0.5 * left_multiplication(cdc) - 0.5 * right_multiplication(cdc);
    gen += ch.rate * term;
  }

  for (const CascadeCoupling& cc : cross_terms) {
    require_same_layout(layout, cc.source.layout(), "vectorize_generator cascade");
    require_same_layout(layout, cc.target.layout(), "vectorize_generator cascade");
    if (cc.strength == 0.0) continue;
    const SparseMat& a = cc.target.matrix();
    const SparseMat& b = cc.source.matrix();
    const SparseMat ad = a.adjoint(), bd = b.adjoint();
    // a rho b^dag -> (b^dag)^T (x) a = conj(b) (x) a
    SparseMat term = kron(SparseMat(b.conjugate()), a) + kron(SparseMat(a.conjugate()), b) -
                     right_multiplication(SparseMat(bd * a)) - left_multiplication(SparseMat(ad * b));
    gen += cc.strength * term;
  }

  const double scale = max_abs(gen);
  if (scale > 0.0) gen.prune(cplx(scale), kDropRelative);
  return Superoperator(layout, std::move(gen));
}

}  // namespace cqed
