#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "curllod/falk_winther.hpp"
#include "curllod/fem.hpp"
#include "curllod/mesh.hpp"

namespace curllod {

/// Corrector of one coarse basis function restricted to one coarse element:
/// the field in the projection kernel that matches -B_T(psi_E, .) on the
/// element patch N^m(T). Coefficients are exactly zero outside the patch
/// (the unknowns live there only).
struct ElementCorrector {
  int T = -1;
  int E = -1;  // global coarse edge id
  int m = 0;
  std::vector<int> patch_tets;                  // N^m(T), coarse element ids
  std::vector<std::pair<int, Complex>> values;  // (fine interior DOF, coefficient)
};

ElementCorrector element_corrector(const MeshHierarchy& hier, const Coefficient& coeff,
                                   const ProjectionMatrix& pm, int T, int E, int m);

struct CorrectorOptions {
  bool keep_element = false;  // retain per-element correctors (small scales)
  bool validate = true;       // kernel check on every summed column
};

/// Correctors of all coarse basis functions: column j is the fine-DOF
/// vector of the corrector applied to coarse basis function j, the sum of
/// its element correctors. Invariants (validated on construction):
///   - kernel: P * column = 0 for every column
///   - support: element contributions vanish outside their patch N^m(T)
struct CorrectorBasis {
  int m = 0;
  std::vector<VecC> columns;                // per coarse interior edge
  std::vector<ElementCorrector> elements;   // filled only if keep_element
};

CorrectorBasis corrector_basis(const MeshHierarchy& hier, const Coefficient& coeff,
                               const ProjectionMatrix& pm, int m,
                               const CorrectorOptions& opts = {});

/// Multiscale Galerkin solution. u_ms = (Prol + K) u_H; the coarse part is
/// recoverable by the projection: P u_ms = u_H.
struct MultiscaleSolution {
  VecC u_H;   // coarse interior DOFs
  VecC u_ms;  // fine interior DOFs
  double H = 0.0;
  double h = 0.0;
  int m = 0;
  std::string descriptor;
};

using SourceField = std::function<Vec3(const Vec3&)>;

/// Builds the projection and the corrector basis, then solves the coarse
/// Galerkin system with trial = test = (Prol + K) applied to the coarse
/// basis. threads parallelizes the projection row loop; the corrector stage
/// runs sequentially (one shared factorization per patch group dominated by
/// the direct solver).
MultiscaleSolution solve_multiscale(const MeshHierarchy& hier, const Coefficient& coeff,
                                    const SourceField& f, int m, int threads = 1,
                                    const CorrectorOptions& opts = {});

/// Same solve with a prebuilt projection and basis (used when scanning m).
MultiscaleSolution solve_multiscale_with(const MeshHierarchy& hier, const Coefficient& coeff,
                                         const SourceField& f, const ProjectionMatrix& pm,
                                         const CorrectorBasis& basis);

/// Fine Galerkin reference solve on the ringed fine space.
VecC solve_reference(const MeshHierarchy& hier, const Coefficient& coeff, const SourceField& f);

/// Default localization depth for coarse spacing H: ceil(|log2 H|) + 1.
int default_localization(double H);

}  // namespace curllod
