#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "curllod/common.hpp"
#include "curllod/mesh.hpp"

namespace curllod {

/// Complex sparse matrix with deterministic assembly: triplets are always
/// emitted in ascending tet order and summed by Eigen in that fixed order.
using SparseOperator = Eigen::SparseMatrix<Complex>;
using VecC = Eigen::VectorXcd;

enum class Space { Nedelec, RaviartThomas, P1, P0 };

/// Entity -> global DOF table for one of the four lowest-order spaces.
/// index[entity] is -1 for masked entities (boundary DOFs of ringed spaces,
/// or entities outside a patch); entities[dof] inverts the map. DOFs are
/// numbered in ascending entity order, so the layout is deterministic.
struct DofMap {
  Space space = Space::Nedelec;
  std::vector<int> index;
  std::vector<int> entities;

  int num_dofs() const { return static_cast<int>(entities.size()); }
};

/// DOF-carrying entity kind of a space.
int entity_count(const Mesh& mesh, Space space);

/// Which entities lose their DOF (vanishing tangential trace for Nedelec,
/// normal trace for Raviart-Thomas, value for P1; P0 never masks).
enum class Ring {
  None,           // all entities carry DOFs
  Domain,         // mask entities on boundary(domain)
  PatchBoundary,  // mask entities on boundary(patch), incl. its boundary(domain) part
  PatchCut,       // mask only the cut boundary(patch) \ boundary(domain)
};

/// Global space. Ring::PatchBoundary and Ring::PatchCut are invalid here.
DofMap dofmap_global(const Mesh& mesh, Space space, Ring ring);

/// Patch-local space: DOFs only on entities of patch tets.
DofMap dofmap_patch(const Mesh& mesh, const Patch& patch, Space space, Ring ring);

/// Cellwise-constant coefficients on the (fine) mesh. mu is a symmetric 3x3
/// tensor per tet (row-major), kappa a complex scalar per tet.
struct Coefficient {
  std::vector<std::array<double, 9>> mu;
  std::vector<Complex> kappa;
  std::string descriptor;

  bool is_real() const;
};

Coefficient coefficient_constant(const Mesh& mesh, double mu, Complex kappa);
/// Periodic checkerboard: mu = v0 or v1 by parity of sum(floor((x-lo)/delta))
/// at the tet centroid.
Coefficient coefficient_checkerboard(const Mesh& mesh, double delta, double v0, double v1,
                                     Complex kappa);
/// Seeded random checkerboard at the mesh's own grid scale: one value per
/// grid cube, uniform in [lo, hi], from splitmix64(seed ^ cube index).
Coefficient coefficient_random_checkerboard(const Mesh& mesh, double lo, double hi,
                                            std::uint64_t seed, Complex kappa);

/// Quadrature on the reference tet in barycentric coordinates; weights sum
/// to 1 (relative to tet volume). Degree-2 rule: exact for all integrands in
/// the lowest-order assemblies (products of affine fields).
struct QuadPoint {
  std::array<double, 4> bary;
  double weight;
};
const std::array<QuadPoint, 4>& quad_degree2();

/// Local basis evaluation on tet t. Nedelec and Raviart-Thomas bases are
/// normalized to unit mean tangential / normal DOF with globally fixed signs
/// (edge tangent toward the larger vertex id, face normal by right-hand rule
/// on the sorted triple).
std::array<Vec3, 6> nedelec_at(const Mesh& mesh, int t, const Vec3& x);
std::array<Vec3, 6> nedelec_curls(const Mesh& mesh, int t);  // constant per tet
std::array<Vec3, 4> rt_at(const Mesh& mesh, int t, const Vec3& x);
std::array<double, 4> rt_divs(const Mesh& mesh, int t);  // constant per tet
std::array<double, 4> p1_at(const Mesh& mesh, int t, const Vec3& x);  // barycentric

/// Point in tet t at barycentric coordinates lam.
Vec3 tet_point(const Mesh& mesh, int t, const std::array<double, 4>& lam);

/// Sesquilinear-form matrix M[j,k] = B_G(psi_k, psi_j) with
/// B_G(v, w) = (mu curl v, curl w)_G + (kappa v, w)_G, conjugation on the
/// second slot. restriction: nullptr = whole mesh, else the element set G
/// (empty set gives the zero matrix). Exact at lowest order via the degree-2
/// rule.
SparseOperator assemble_B(const Mesh& mesh, const Coefficient& coeff, const DofMap& dofs,
                          const std::vector<int>* restriction = nullptr);

/// Discrete gradient G[E, z] = +-1/length(E) (+ at head y2, - at tail y1),
/// realizing grad: P1 -> Nedelec.
SparseOperator assemble_gradient(const Mesh& mesh, const DofMap& dofs_p1, const DofMap& dofs_n);

/// Load vector b[E] = integral of f . psi_E (degree-2 rule; exact for affine f).
VecC assemble_rhs(const Mesh& mesh, const DofMap& dofs_n,
                  const std::function<Vec3(const Vec3&)>& f);

/// Coarse-to-fine Nedelec embedding: Prol[e, E] = mean tangential trace of
/// the coarse basis psi_E along fine edge e (midpoint value; exact for
/// affine fields).
SparseOperator prolongate(const MeshHierarchy& hier, const DofMap& dofs_coarse,
                          const DofMap& dofs_fine);

/// Auxiliary same-mesh blocks used by the projection and dual-norm modules.
SparseOperator assemble_p1_stiffness(const Mesh& mesh, const DofMap& dofs_p1,
                                     const std::vector<int>* restriction = nullptr);
SparseOperator assemble_rt_mass(const Mesh& mesh, const DofMap& dofs_rt,
                                const std::vector<int>* restriction = nullptr);
/// K[j, k] = (div phi_k, div phi_j).
SparseOperator assemble_rt_divdiv(const Mesh& mesh, const DofMap& dofs_rt,
                                  const std::vector<int>* restriction = nullptr);
/// D[q, F] = (q, div phi_F); rows P0, cols Raviart-Thomas.
SparseOperator assemble_rt_div(const Mesh& mesh, const DofMap& dofs_p0, const DofMap& dofs_rt,
                               const std::vector<int>* restriction = nullptr);
SparseOperator assemble_n_curlcurl(const Mesh& mesh, const DofMap& dofs_n,
                                   const std::vector<int>* restriction = nullptr);
/// C[F, E] = (phi_F, curl psi_E); rows Raviart-Thomas, cols Nedelec.
SparseOperator assemble_rt_n_curl_pairing(const Mesh& mesh, const DofMap& dofs_rt,
                                          const DofMap& dofs_n,
                                          const std::vector<int>* restriction = nullptr);
/// C[F, E] = (psi_E, phi_F); rows Raviart-Thomas, cols Nedelec.
SparseOperator assemble_rt_n_mass_pairing(const Mesh& mesh, const DofMap& dofs_rt,
                                          const DofMap& dofs_n,
                                          const std::vector<int>* restriction = nullptr);
/// T[y, E] = (psi_E, grad lambda_y); rows P1, cols Nedelec.
SparseOperator assemble_n_p1grad_pairing(const Mesh& mesh, const DofMap& dofs_p1,
                                         const DofMap& dofs_n,
                                         const std::vector<int>* restriction = nullptr);
/// Row vector of DOF "masses": integral of each basis function (P1 hats or
/// P0 indicators), for mean constraints.
VecC assemble_mean_row(const Mesh& mesh, const DofMap& dofs,
                       const std::vector<int>* restriction = nullptr);

}  // namespace curllod
