#pragma once

#include <iosfwd>
#include <vector>

#include "curllod/fem.hpp"
#include "curllod/mesh.hpp"

namespace curllod {

/// Divergence-corrected face field z1_E on the coarse patch omega_E^ext:
/// the minimal-L2 Raviart-Thomas field with vanishing normal trace on the
/// interior cut of the patch boundary whose cellwise divergence is -(dz0)_E.
/// (dz0)_E is the difference of the normalized vertex-patch indicators of
/// the two edge endpoints (head minus tail); an endpoint on boundary(domain)
/// carries no volume indicator and instead sources a unit net flux through
/// its boundary class (the patch vertices connected to it by edges on
/// boundary(domain)), the trace pattern that pairs exactly with potentials
/// constant per class. Minimality makes z1 L2-orthogonal to the
/// divergence-free part of the ringed space.
struct EdgeFaceField {
  Patch patch;     // omega_E^ext on the coarse mesh
  DofMap dofs_rt;  // Raviart-Thomas space ringed on the interior cut only
  VecC z;          // one coefficient per unmasked patch face
};

EdgeFaceField z1_field(const MeshHierarchy& hier, int E);

/// Face-averaging part of the projection: row E combines the z1_E moments
/// M_E with the vertex-patch smoothing corrections at the two endpoints of
/// E. Rows = coarse interior edges, cols = fine interior edges.
SparseOperator assemble_P1(const MeshHierarchy& hier);

/// Edge-correction part: per row solves the patch Nedelec saddle system on
/// the space tangentially ringed on boundary(domain) (the cut stays free).
/// The curl-curl block is constrained by gradient moments, one hat per
/// unclassed vertex plus one aggregate per boundary class; the rows sum to
/// the constant's gradient, so one gauge row is dropped. The E-row of the
/// smoothed difference is then extracted by one adjoint solve.
SparseOperator assemble_P2(const MeshHierarchy& hier);

/// Coarse-edge x fine-edge projection matrix. Invariants, validated by
/// projection() before returning:
///   - locality: P[E, e] = 0 unless fine edge e lies in closure(omega_E^ext)
///   - projection: P * Prol = identity on coarse DOFs
struct ProjectionMatrix {
  SparseOperator P;                          // coarse interior x fine interior
  std::vector<std::vector<int>> patch_tets;  // per row: coarse tets of omega_E^ext
};

/// P = assemble_P1 + assemble_P2, both parts computed in one pass per row.
/// threads > 1 distributes rows over worker threads; the result is
/// bit-identical for any thread count (each row is built independently and
/// committed by row index).
ProjectionMatrix projection(const MeshHierarchy& hier, int threads = 1);

/// Coordinate text dump, one entry per line: "row col re im".
void dump_projection(const SparseOperator& P, std::ostream& out);

}  // namespace curllod
