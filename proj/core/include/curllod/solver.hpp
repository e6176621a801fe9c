#pragma once

#include <memory>
#include <string>
#include <vector>

#include "curllod/fem.hpp"

namespace curllod {

/// Direct sparse LU factorization (COLAMD ordering) with a real-arithmetic
/// fast path when every stored entry is purely real; complex right-hand
/// sides are then solved as two real solves. Throws SolverError on singular
/// matrices, quoting the factorization diagnostic and the caller context.
class Factorization {
 public:
  explicit Factorization(const SparseOperator& A, std::string context = {});
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  VecC solve(const VecC& b) const;
  int size() const;
  bool real_path() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Direct solve with the residual contract ||Ax - b|| <= 1e-10 ||b||;
/// iterative refinement runs first, toward 1e-13 ||b||.
VecC solve(const SparseOperator& A, const VecC& b, const std::string& context = {});

/// Constrained system [[A, C^H], [C, 0]] [w; lambda] = [f; g].
struct SaddleSystem {
  SparseOperator A;  // n x n, elliptic on ker C
  SparseOperator C;  // k x n constraint block
  VecC f;            // length n
  VecC g;            // length k
  /// One declared gauge dimension: drop the surviving constraint row with
  /// the lowest index before factorizing (the dropped row must still be
  /// consistent; the residual check covers it).
  bool drop_gauge_row = false;
  std::string context;
};

struct SaddleSolution {
  VecC primal;
  VecC multiplier;  // length k; zero on pruned or dropped rows
  std::vector<int> pruned_rows;
  int dropped_row = -1;
};

/// Factorization of a saddle system, reusable across right-hand sides.
/// Identically-zero constraint rows are pruned first; rank deficiency beyond
/// the declared gauge surfaces as a SolverError naming the constraint rows.
class SaddleFactorization {
 public:
  SaddleFactorization(const SparseOperator& A, const SparseOperator& C, bool drop_gauge_row,
                      std::string context = {});

  SaddleSolution solve(const VecC& f, const VecC& g) const;

  const std::vector<int>& pruned_rows() const { return pruned_rows_; }
  int dropped_row() const { return dropped_row_; }

 private:
  int n_ = 0, k_ = 0;
  std::vector<int> kept_rows_;    // surviving constraint rows, ascending
  std::vector<int> pruned_rows_;  // identically-zero rows
  int dropped_row_ = -1;
  SparseOperator A_, C_;  // originals, for the residual check
  std::unique_ptr<Factorization> block_;
  std::string context_;
};

SaddleSolution solve_saddle(const SaddleSystem& sys);

}  // namespace curllod
