#include "curllod/solver.hpp"

#include <Eigen/SparseLU>
#include <sstream>

namespace curllod {

namespace {

constexpr double kResidualTol = 1e-10;   // acceptance gate
constexpr double kRefineTarget = 1e-13;  // refine while above this

bool matrix_is_real(const SparseOperator& A) {
  for (int col = 0; col < A.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(A, col); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

std::string with_context(const std::string& what, const std::string& ctx) {
  return ctx.empty() ? what : what + " [" + ctx + "]";
}

}  // namespace

struct Factorization::Impl {
  bool real = false;
  int n = 0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_r;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu_c;
  std::string context;
};

Factorization::Factorization(const SparseOperator& A, std::string context)
    : impl_(std::make_unique<Impl>()) {
  if (A.rows() != A.cols())
    throw SolverError(with_context("factorize: matrix not square", context));
  impl_->n = static_cast<int>(A.rows());
  impl_->context = std::move(context);
  impl_->real = matrix_is_real(A);
  if (impl_->real) {
    Eigen::SparseMatrix<double> Ar = A.real();
    Ar.makeCompressed();
    impl_->lu_r.compute(Ar);
    if (impl_->lu_r.info() != Eigen::Success)
      throw SolverError(with_context(
          "factorize: singular matrix: " + impl_->lu_r.lastErrorMessage(), impl_->context));
  } else {
    SparseOperator Ac = A;
    Ac.makeCompressed();
    impl_->lu_c.compute(Ac);
    if (impl_->lu_c.info() != Eigen::Success)
      throw SolverError(with_context(
          "factorize: singular matrix: " + impl_->lu_c.lastErrorMessage(), impl_->context));
  }
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

VecC Factorization::solve(const VecC& b) const {
  if (static_cast<int>(b.size()) != impl_->n)
    throw SolverError(with_context("solve: dimension mismatch", impl_->context));
  if (impl_->real) {
    Eigen::VectorXd xr = impl_->lu_r.solve(b.real());
    if (b.imag().isZero(0.0)) return xr.cast<Complex>();
    Eigen::VectorXd xi = impl_->lu_r.solve(b.imag());
    return xr.cast<Complex>() + Complex(0, 1) * xi.cast<Complex>();
  }
  return impl_->lu_c.solve(b);
}

int Factorization::size() const { return impl_->n; }
bool Factorization::real_path() const { return impl_->real; }

VecC solve(const SparseOperator& A, const VecC& b, const std::string& context) {
  const Factorization fact(A, context);
  VecC x = fact.solve(b);
  const double scale = std::max(b.norm(), 1e-300);
  for (int pass = 0; pass < 2 && (A * x - b).norm() > kRefineTarget * scale; ++pass)
    x += fact.solve(b - A * x);
  const double res = (A * x - b).norm();
  if (res > kResidualTol * scale) {
    std::ostringstream msg;
    msg << "solve: residual " << res << " exceeds " << kResidualTol << " * ||b|| = "
        << kResidualTol * scale;
    throw SolverError(with_context(msg.str(), context));
  }
  return x;
}

SaddleFactorization::SaddleFactorization(const SparseOperator& A, const SparseOperator& C,
                                         bool drop_gauge_row, std::string context)
    : n_(static_cast<int>(A.rows())),
      k_(static_cast<int>(C.rows())),
      A_(A),
      C_(C),
      context_(std::move(context)) {
  if (A.rows() != A.cols()) throw SolverError(with_context("saddle: A not square", context_));
  if (C.cols() != A.rows())
    throw SolverError(with_context("saddle: C has " + std::to_string(C.cols()) +
                                       " columns, A is " + std::to_string(A.rows()) + " wide",
                                   context_));

  // Prune identically-zero constraint rows.
  std::vector<std::uint8_t> nonzero_row(k_, 0);
  for (int col = 0; col < C.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(C, col); it; ++it)
      if (it.value() != Complex(0, 0)) nonzero_row[it.row()] = 1;
  for (int r = 0; r < k_; ++r)
    (nonzero_row[r] ? kept_rows_ : pruned_rows_).push_back(r);

  // The declared redundancy is a zero linear combination of all rows, so it
  // is vacuous when every row has already pruned to zero.
  if (drop_gauge_row && !kept_rows_.empty()) {
    dropped_row_ = kept_rows_.front();
    kept_rows_.erase(kept_rows_.begin());
  }

  const int kk = static_cast<int>(kept_rows_.size());
  std::vector<int> row_slot(k_, -1);
  for (int i = 0; i < kk; ++i) row_slot[kept_rows_[i]] = i;

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(A.nonZeros() + 2 * C.nonZeros());
  for (int col = 0; col < A.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(A, col); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), col, it.value());
  for (int col = 0; col < C.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(C, col); it; ++it) {
      const int slot = row_slot[it.row()];
      if (slot < 0) continue;
      trip.emplace_back(n_ + slot, col, it.value());             // C block
      trip.emplace_back(col, n_ + slot, std::conj(it.value()));  // C^H block
    }
  SparseOperator block(n_ + kk, n_ + kk);
  block.setFromTriplets(trip.begin(), trip.end());

  try {
    block_ = std::make_unique<Factorization>(block, context_);
  } catch (const SolverError& e) {
    std::ostringstream msg;
    msg << e.what() << "; rank deficiency beyond the declared gauge"
        << (dropped_row_ >= 0 ? " (dropped row " + std::to_string(dropped_row_) + ")" : "")
        << "; constraint rows in play:";
    for (int i = 0; i < std::min<int>(kk, 16); ++i) msg << ' ' << kept_rows_[i];
    if (kk > 16) msg << " ...";
    throw SolverError(msg.str());
  }
}

SaddleSolution SaddleFactorization::solve(const VecC& f, const VecC& g) const {
  if (static_cast<int>(f.size()) != n_ || static_cast<int>(g.size()) != k_)
    throw SolverError(with_context("saddle solve: dimension mismatch", context_));

  const int kk = static_cast<int>(kept_rows_.size());
  VecC rhs(n_ + kk);
  rhs.head(n_) = f;
  for (int i = 0; i < kk; ++i) rhs[n_ + i] = g[kept_rows_[i]];

  VecC xy = block_->solve(rhs);

  auto residual = [&](const VecC& v) {
    VecC lam = VecC::Zero(k_);
    for (int i = 0; i < kk; ++i) lam[kept_rows_[i]] = v[n_ + i];
    const VecC r1 = A_ * v.head(n_) + C_.adjoint() * lam - f;
    const VecC r2 = C_ * v.head(n_) - g;  // includes pruned and dropped rows
    return std::sqrt(r1.squaredNorm() + r2.squaredNorm());
  };
  const double scale = std::max(std::sqrt(f.squaredNorm() + g.squaredNorm()), 1e-300);
  for (int pass = 0; pass < 2 && residual(xy) > kRefineTarget * scale; ++pass) {
    VecC block_res(n_ + kk);
    VecC lam = VecC::Zero(k_);
    for (int i = 0; i < kk; ++i) lam[kept_rows_[i]] = xy[n_ + i];
    block_res.head(n_) = f - (A_ * xy.head(n_) + C_.adjoint() * lam);
    const VecC r2 = C_ * xy.head(n_);
    for (int i = 0; i < kk; ++i) block_res[n_ + i] = g[kept_rows_[i]] - r2[kept_rows_[i]];
    xy += block_->solve(block_res);
  }
  const double res = residual(xy);
  if (res > kResidualTol * scale) {
    std::ostringstream msg;
    msg << "saddle solve: residual " << res << " exceeds " << kResidualTol
        << " * ||rhs|| = " << kResidualTol * scale
        << " (constraints include pruned/dropped rows)";
    throw SolverError(with_context(msg.str(), context_));
  }

  SaddleSolution sol;
  sol.primal = xy.head(n_);
  sol.multiplier = VecC::Zero(k_);
  for (int i = 0; i < kk; ++i) sol.multiplier[kept_rows_[i]] = xy[n_ + i];
  sol.pruned_rows = pruned_rows_;
  sol.dropped_row = dropped_row_;
  return sol;
}

SaddleSolution solve_saddle(const SaddleSystem& sys) {
  const SaddleFactorization fact(sys.A, sys.C, sys.drop_gauge_row, sys.context);
  return fact.solve(sys.f, sys.g);
}

}  // namespace curllod
