#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "curllod/lod.hpp"
#include "curllod/solver.hpp"

namespace curllod {

/// sqrt(|v|^2 + |curl v|^2) in L2 over the whole mesh or an element subset,
/// by quadrature that is exact at lowest order. Masked DOFs contribute zero.
double norm_hcurl(const Mesh& mesh, const DofMap& dofs_n, const VecC& v,
                  const std::vector<int>* region = nullptr);

/// |curl v| in L2. The curl is constant per element, so the cancellation is
/// linear before squaring and the value stays meaningful near zero, unlike
/// the stiffness quadratic form.
double seminorm_curl(const Mesh& mesh, const DofMap& dofs_n, const VecC& v,
                     const std::vector<int>* region = nullptr);

/// Discrete dual-norm surrogate: the Riesz representative r of the functional
/// v -> (e, v)_L2 over the unringed fine Raviart-Thomas space under the
/// H(div) inner product, reported as |r|_H(div). A mesh-dependent lower bound
/// of the continuous dual norm; the system is real and independent of the
/// problem coefficients, so the factorization is reusable across vectors.
class RieszDualNorm {
 public:
  explicit RieszDualNorm(const Mesh& fine);

  /// e is a DOF vector over the interior (ringed) fine Nedelec space.
  double norm(const VecC& e) const;

 private:
  SparseOperator A_;        // RT mass + div-div
  SparseOperator pairing_;  // rows RT, cols interior Nedelec
  Factorization fact_;
};

double dual_norm_hdiv(const MeshHierarchy& hier, const VecC& e);

/// Truncation-error study at fixed H: e_m = |u_m - u_mmax|_H(curl) together
/// with the geometric ratio fitted by least squares on log e_m over the
/// non-saturated entries (NaN when fewer than two are usable).
struct DecayRow {
  int m = 0;
  double e = 0.0;
};
struct DecayStudy {
  std::vector<DecayRow> rows;
  double fitted_ratio = std::numeric_limits<double>::quiet_NaN();
};
DecayStudy decay_study(const MeshHierarchy& hier, const Coefficient& coeff, const SourceField& f,
                       const std::vector<int>& m_list, int threads = 1);

/// One line of a study report; NaN fields print as empty CSV cells.
struct StudyRow {
  std::string scenario;
  double H = 0.0;
  double h = 0.0;
  int m = 0;
  double err_hcurl = std::numeric_limits<double>::quiet_NaN();
  double err_hdivdual = std::numeric_limits<double>::quiet_NaN();
  double order_hcurl = std::numeric_limits<double>::quiet_NaN();
  double order_hdivdual = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct ConvergenceRequest {
  std::string scenario = "default";
  int n_fine = 16;             // common fine resolution across all rows
  std::vector<int> n_coarse;   // each divides n_fine by a power of two >= 2
  std::function<Coefficient(const Mesh&)> coefficient;  // evaluated once, on the fine mesh
  SourceField f;
  int m = -1;  // -1: per-row default_localization(H)
  int threads = 1;
};

/// Errors of the localized method against the fine Galerkin solution on a
/// shared fine mesh: err_hcurl = |u_h - u_ms|, err_hdivdual = dual surrogate
/// of the coarse part u_h - Prol u_H. Observed orders are log2 ratios of
/// consecutive rows. Rows come back in request order.
std::vector<StudyRow> convergence_study(const ConvergenceRequest& req);

/// In-order fit of log2(err) drops between consecutive rows; call after
/// reordering or filtering if needed.
void fill_orders(std::vector<StudyRow>& rows);

/// Header: scenario,H,h,m,err_hcurl,err_hdivdual,order_hcurl,order_hdivdual,seconds
/// Reals as %.12e, seconds as %.3f, NaN as the empty cell.
void write_csv(const std::vector<StudyRow>& rows, std::ostream& os);

}  // namespace curllod
