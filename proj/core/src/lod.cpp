#include "curllod/lod.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "curllod/solver.hpp"

namespace curllod {

namespace {

using Triplet = Eigen::Triplet<Complex>;
using RowMajorOp = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

double mesh_spacing(const Mesh& mesh) { return (mesh.box.hi[0] - mesh.box.lo[0]) / mesh.n; }

/// Shared state of a corrector build over one hierarchy.
struct BasisEngine {
  const MeshHierarchy& hier;
  const Coefficient& coeff;
  const ProjectionMatrix& pm;
  int m;

  DofMap rows;  // coarse interior edges
  DofMap cols;  // fine interior edges
  SparseOperator prol;
  RowMajorOp p_rows;                       // row-major view of P for row gathering
  std::vector<std::vector<int>> tet_rows;  // coarse tet -> P rows whose patch contains it

  BasisEngine(const MeshHierarchy& h, const Coefficient& c, const ProjectionMatrix& p, int mm)
      : hier(h),
        coeff(c),
        pm(p),
        m(mm),
        rows(dofmap_global(h.coarse, Space::Nedelec, Ring::Domain)),
        cols(dofmap_global(h.fine, Space::Nedelec, Ring::Domain)),
        prol(prolongate(h, rows, cols)),
        p_rows(p.P),
        tet_rows(h.coarse.num_tets()) {
    if (pm.P.rows() != rows.num_dofs() || pm.P.cols() != cols.num_dofs())
      throw Error("corrector basis: projection matrix does not match the hierarchy");
    for (std::size_t i = 0; i < pm.patch_tets.size(); ++i)
      for (int tc : pm.patch_tets[i]) tet_rows[tc].push_back(static_cast<int>(i));
  }

  /// Patch-local systems shared by every element of one patch group.
  struct PatchSystem {
    std::vector<int> ctets;  // coarse patch tets
    std::vector<int> ftets;  // their children
    DofMap pdofs;            // fine Nedelec, ringed on boundary(patch)
    std::vector<int> crows;  // constrained P rows, ascending
    SaddleFactorization fact;
  };

  PatchSystem make_patch_system(std::vector<int> ctets, const std::string& ctx) const {
    std::vector<int> ftets;
    for (int tc : ctets)
      ftets.insert(ftets.end(), hier.children[tc].begin(), hier.children[tc].end());
    const Patch fpatch = patch_from_tets(hier.fine, ftets);
    DofMap pdofs = dofmap_patch(hier.fine, fpatch, Space::Nedelec, Ring::PatchBoundary);

    // Constraints: every P row whose patch shares a tet with this patch can
    // touch its ringed DOFs; rows that only graze the ring restrict to zero
    // and are pruned inside the factorization. Rows sharing no tet touch no
    // ringed DOF, so the kernel property holds globally and exactly.
    std::vector<int> crows;
    for (int tc : ctets)
      crows.insert(crows.end(), tet_rows[tc].begin(), tet_rows[tc].end());
    std::sort(crows.begin(), crows.end());
    crows.erase(std::unique(crows.begin(), crows.end()), crows.end());

    const SparseOperator A = assemble_B(hier.fine, coeff, pdofs, &ftets);
    std::vector<Triplet> trip;
    for (std::size_t ci = 0; ci < crows.size(); ++ci)
      for (RowMajorOp::InnerIterator it(p_rows, crows[ci]); it; ++it) {
        const int j = pdofs.index[cols.entities[it.col()]];
        if (j >= 0) trip.emplace_back(static_cast<int>(ci), j, it.value());
      }
    SparseOperator C(static_cast<int>(crows.size()), pdofs.num_dofs());
    C.setFromTriplets(trip.begin(), trip.end());

    return PatchSystem{std::move(ctets), std::move(ftets), std::move(pdofs), std::move(crows),
                       SaddleFactorization(A, C, false, ctx)};
  }

  /// Corrector of psi_E restricted to element T, on a prebuilt patch system.
  VecC element_solve(const PatchSystem& ps, int T, int E) const {
    const SparseOperator B_T = assemble_B(hier.fine, coeff, ps.pdofs, &hier.children[T]);
    VecC u = VecC::Zero(ps.pdofs.num_dofs());
    for (SparseOperator::InnerIterator it(prol, rows.index[E]); it; ++it) {
      const int j = ps.pdofs.index[cols.entities[it.row()]];
      if (j >= 0) u[j] = it.value();
    }
    const VecC f = -(B_T * u);
    try {
      return ps.fact.solve(f, VecC::Zero(static_cast<int>(ps.crows.size()))).primal;
    } catch (const SolverError& e) {
      throw SolverError("element corrector (T=" + std::to_string(T) + ", E=" + std::to_string(E) +
                        ", m=" + std::to_string(m) + "): " + e.what());
    }
  }
};

}  // namespace

ElementCorrector element_corrector(const MeshHierarchy& hier, const Coefficient& coeff,
                                   const ProjectionMatrix& pm, int T, int E, int m) {
  const Mesh& coarse = hier.coarse;
  if (T < 0 || T >= coarse.num_tets()) throw Error("element_corrector: bad element id");
  const auto& te = coarse.tet_edges[T];
  if (std::find(te.begin(), te.end(), E) == te.end())
    throw Error("element_corrector: element " + std::to_string(T) + " does not carry edge " +
                std::to_string(E));
  const BasisEngine eng(hier, coeff, pm, m);
  if (eng.rows.index[E] < 0) throw Error("element_corrector: edge is not interior");

  const Patch cpatch = patch(coarse, {T}, m);
  const auto ps = eng.make_patch_system(
      cpatch.tets, "corrector patch of element " + std::to_string(T) + " (m=" + std::to_string(m) +
                       ")");
  const VecC x = eng.element_solve(ps, T, E);

  ElementCorrector out;
  out.T = T;
  out.E = E;
  out.m = m;
  out.patch_tets = ps.ctets;
  for (int j = 0; j < ps.pdofs.num_dofs(); ++j)
    if (x[j] != Complex(0, 0)) out.values.emplace_back(eng.cols.index[ps.pdofs.entities[j]], x[j]);
  return out;
}

CorrectorBasis corrector_basis(const MeshHierarchy& hier, const Coefficient& coeff,
                               const ProjectionMatrix& pm, int m, const CorrectorOptions& opts) {
  const Mesh& coarse = hier.coarse;
  const BasisEngine eng(hier, coeff, pm, m);

  // Elements sharing the same patch share one factorization. The map key
  // is the patch tet set, so group order and merge order are canonical and
  // the result does not depend on scheduling.
  std::map<std::vector<int>, std::vector<int>> groups;
  for (int T = 0; T < coarse.num_tets(); ++T)
    groups[patch(coarse, {T}, m).tets].push_back(T);

  CorrectorBasis basis;
  basis.m = m;
  basis.columns.assign(eng.rows.num_dofs(), VecC());

  for (const auto& [ctets, Ts] : groups) {
    const auto ps = eng.make_patch_system(
        ctets, "corrector patch group at element " + std::to_string(Ts.front()) +
                   " (m=" + std::to_string(m) + ")");
    for (int T : Ts) {
      for (int k = 0; k < 6; ++k) {
        const int E = coarse.tet_edges[T][k];
        const int row = eng.rows.index[E];
        if (row < 0) continue;  // boundary coarse edge carries no basis function
        const VecC x = eng.element_solve(ps, T, E);
        VecC& col = basis.columns[row];
        if (col.size() == 0) col = VecC::Zero(eng.cols.num_dofs());
        for (int j = 0; j < ps.pdofs.num_dofs(); ++j)
          col[eng.cols.index[ps.pdofs.entities[j]]] += x[j];
        if (opts.keep_element) {
          ElementCorrector ec;
          ec.T = T;
          ec.E = E;
          ec.m = m;
          ec.patch_tets = ps.ctets;
          for (int j = 0; j < ps.pdofs.num_dofs(); ++j)
            if (x[j] != Complex(0, 0))
              ec.values.emplace_back(eng.cols.index[ps.pdofs.entities[j]], x[j]);
          basis.elements.push_back(std::move(ec));
        }
      }
    }
  }
  for (auto& col : basis.columns)
    if (col.size() == 0) col = VecC::Zero(eng.cols.num_dofs());

  if (opts.validate) {
    for (std::size_t j = 0; j < basis.columns.size(); ++j) {
      const VecC res = pm.P * basis.columns[j];
      const double tol = 1e-8 * std::max(1.0, basis.columns[j].cwiseAbs().maxCoeff());
      const double worst = res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
      if (worst > tol)
        throw Error("corrector basis: kernel property violated on column " + std::to_string(j) +
                    ", |P K| = " + std::to_string(worst));
    }
  }
  return basis;
}

MultiscaleSolution solve_multiscale_with(const MeshHierarchy& hier, const Coefficient& coeff,
                                         const SourceField& f, const ProjectionMatrix& pm,
                                         const CorrectorBasis& basis) {
  const DofMap rows = dofmap_global(hier.coarse, Space::Nedelec, Ring::Domain);
  const DofMap cols = dofmap_global(hier.fine, Space::Nedelec, Ring::Domain);
  const int nc = rows.num_dofs(), nf = cols.num_dofs();
  if (static_cast<int>(basis.columns.size()) != nc)
    throw Error("solve_multiscale: basis does not match the hierarchy");

  const SparseOperator prol = prolongate(hier, rows, cols);
  const SparseOperator M = assemble_B(hier.fine, coeff, cols);
  const VecC b = assemble_rhs(hier.fine, cols, f);

  // Trial matrix (Prol + K) as a sparse operator; the basis columns carry
  // exact zeros outside their support.
  std::vector<Triplet> trip;
  for (int j = 0; j < nc; ++j) {
    for (SparseOperator::InnerIterator it(prol, j); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), j, it.value());
    const VecC& col = basis.columns[j];
    for (int i = 0; i < nf; ++i)
      if (col[i] != Complex(0, 0)) trip.emplace_back(i, j, col[i]);
  }
  SparseOperator T(nf, nc);
  T.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  trip.shrink_to_fit();

  bool real_path = coeff.is_real();
  if (real_path)
    for (int k = 0; k < T.outerSize() && real_path; ++k)
      for (SparseOperator::InnerIterator it(T, k); it; ++it)
        if (it.value().imag() != 0.0) {
          real_path = false;
          break;
        }

  // Coarse system G = T^H M T, assembled through sparse products; solved
  // densely. Real coefficients keep everything in real arithmetic.
  VecC u_H(nc);
  const VecC rhs = T.adjoint() * b;
  if (real_path) {
    Eigen::SparseMatrix<double> Tr(nf, nc), Mr(nf, nf);
    Tr = T.real();
    Mr = M.real();
    const Eigen::SparseMatrix<double> MT = Mr * Tr;
    const Eigen::MatrixXd G = Eigen::MatrixXd(Tr.transpose() * MT);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(G);
    const Eigen::VectorXd xr = lu.solve(rhs.real());
    const Eigen::VectorXd xi = lu.solve(rhs.imag());
    u_H = xr + Complex(0, 1) * xi;
  } else {
    const SparseOperator MT = M * T;
    const Eigen::MatrixXcd G = Eigen::MatrixXcd(T.adjoint() * MT);
    u_H = Eigen::PartialPivLU<Eigen::MatrixXcd>(G).solve(rhs);
  }

  MultiscaleSolution sol;
  sol.u_H = u_H;
  sol.u_ms = T * u_H;
  sol.H = mesh_spacing(hier.coarse);
  sol.h = mesh_spacing(hier.fine);
  sol.m = basis.m;
  sol.descriptor = coeff.descriptor;

  // Coarse part must be recoverable by the projection.
  const VecC rec = pm.P * sol.u_ms - sol.u_H;
  const double tol = 1e-8 * std::max(1.0, sol.u_H.lpNorm<1>());
  if (rec.size() && rec.cwiseAbs().maxCoeff() > tol)
    throw Error("solve_multiscale: P u_ms != u_H, worst deviation " +
                std::to_string(rec.cwiseAbs().maxCoeff()));
  return sol;
}

MultiscaleSolution solve_multiscale(const MeshHierarchy& hier, const Coefficient& coeff,
                                    const SourceField& f, int m, int threads,
                                    const CorrectorOptions& opts) {
  const ProjectionMatrix pm = projection(hier, threads);
  const CorrectorBasis basis = corrector_basis(hier, coeff, pm, m, opts);
  return solve_multiscale_with(hier, coeff, f, pm, basis);
}

VecC solve_reference(const MeshHierarchy& hier, const Coefficient& coeff, const SourceField& f) {
  const DofMap cols = dofmap_global(hier.fine, Space::Nedelec, Ring::Domain);
  const SparseOperator A = assemble_B(hier.fine, coeff, cols);
  const VecC b = assemble_rhs(hier.fine, cols, f);
  return solve(A, b, "fine reference solve");
}

int default_localization(double H) {
  if (H <= 0.0 || H >= 1.0) throw Error("default_localization: H must be in (0, 1)");
  return static_cast<int>(std::ceil(std::abs(std::log2(H)))) + 1;
}

}  // namespace curllod
