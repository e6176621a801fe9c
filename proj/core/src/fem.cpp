#include "curllod/fem.hpp"

#include <algorithm>
#include <cmath>

namespace curllod {

namespace {

using Triplet = Eigen::Triplet<Complex>;

/// Per-tet data shared by the assembly loops.
struct TetCtx {
  std::array<Vec3, 4> grad;
  Vec3 p0;
  double vol;
  // local edges
  std::array<double, 6> elen;
  std::array<int, 6> eglobal;
  std::array<int, 6> esign;
  // local faces
  std::array<double, 4> farea;
  std::array<int, 4> fglobal;
  std::array<int, 4> fsign;

  TetCtx(const Mesh& mesh, int t) {
    grad = mesh.barycentric_gradients(t);
    p0 = mesh.vertices[mesh.tets[t][0]];
    vol = mesh.tet_volume(t);
    for (int k = 0; k < 6; ++k) {
      eglobal[k] = mesh.tet_edges[t][k];
      elen[k] = mesh.edge_length(eglobal[k]);
      esign[k] = mesh.tet_edge_signs[t][k];
    }
    for (int k = 0; k < 4; ++k) {
      fglobal[k] = mesh.tet_faces[t][k];
      farea[k] = mesh.face_area(fglobal[k]);
      fsign[k] = mesh.tet_face_signs[t][k];
    }
  }

  /// Edge basis at barycentric coordinates lam.
  std::array<Vec3, 6> nedelec(const std::array<double, 4>& lam) const {
    std::array<Vec3, 6> psi;
    for (int k = 0; k < 6; ++k) {
      const int a = kLocalEdges[k][0], b = kLocalEdges[k][1];
      const double s = esign[k] * elen[k];
      psi[k] = s * (lam[a] * grad[b] - lam[b] * grad[a]);
    }
    return psi;
  }

  std::array<Vec3, 6> curls() const {
    std::array<Vec3, 6> c;
    for (int k = 0; k < 6; ++k) {
      const int a = kLocalEdges[k][0], b = kLocalEdges[k][1];
      c[k] = (2.0 * esign[k] * elen[k]) * cross(grad[a], grad[b]);
    }
    return c;
  }
};

Vec3 apply_mu(const std::array<double, 9>& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

std::array<double, 9> diag_mu(double v) { return {v, 0, 0, 0, v, 0, 0, 0, v}; }

const std::vector<int>& all_elements(const Mesh& mesh) {
  // cache-free helper: materialize 0..nt-1 once per call site is wasteful,
  // so assembly loops take (begin, end) over either this or a restriction
  static thread_local std::vector<int> ids;
  ids.resize(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) ids[t] = t;
  return ids;
}

}  // namespace

int entity_count(const Mesh& mesh, Space space) {
  switch (space) {
    case Space::Nedelec: return mesh.num_edges();
    case Space::RaviartThomas: return mesh.num_faces();
    case Space::P1: return mesh.num_vertices();
    case Space::P0: return mesh.num_tets();
  }
  return 0;
}

namespace {

const std::vector<std::uint8_t>* boundary_flags(const Mesh& mesh, Space space) {
  switch (space) {
    case Space::Nedelec: return &mesh.edge_boundary;
    case Space::RaviartThomas: return &mesh.face_boundary;
    case Space::P1: return &mesh.vertex_boundary;
    case Space::P0: return nullptr;
  }
  return nullptr;
}

}  // namespace

DofMap dofmap_global(const Mesh& mesh, Space space, Ring ring) {
  if (ring == Ring::PatchBoundary || ring == Ring::PatchCut)
    throw Error("dofmap_global: patch ring kinds need a patch");
  DofMap dm;
  dm.space = space;
  const int n = entity_count(mesh, space);
  const auto* bnd = boundary_flags(mesh, space);
  dm.index.assign(n, -1);
  for (int e = 0; e < n; ++e) {
    if (ring == Ring::Domain && bnd && (*bnd)[e]) continue;
    dm.index[e] = static_cast<int>(dm.entities.size());
    dm.entities.push_back(e);
  }
  return dm;
}

DofMap dofmap_patch(const Mesh& mesh, const Patch& patch, Space space, Ring ring) {
  DofMap dm;
  dm.space = space;
  dm.index.assign(entity_count(mesh, space), -1);
  const auto* bnd = boundary_flags(mesh, space);
  auto add = [&](const std::vector<int>& ents, const std::vector<std::uint8_t>& on_ring) {
    for (std::size_t i = 0; i < ents.size(); ++i) {
      if (ring == Ring::PatchBoundary && on_ring[i]) continue;
      if (ring == Ring::PatchCut && on_ring[i] && !(bnd && (*bnd)[ents[i]])) continue;
      if (ring == Ring::Domain && bnd && (*bnd)[ents[i]]) continue;
      dm.index[ents[i]] = static_cast<int>(dm.entities.size());
      dm.entities.push_back(ents[i]);
    }
  };
  switch (space) {
    case Space::Nedelec: add(patch.edges, patch.edge_on_ring); break;
    case Space::RaviartThomas: add(patch.faces, patch.face_on_ring); break;
    case Space::P1: add(patch.vertices, patch.vertex_on_ring); break;
    case Space::P0: {
      for (int t : patch.tets) {
        dm.index[t] = static_cast<int>(dm.entities.size());
        dm.entities.push_back(t);
      }
      break;
    }
  }
  return dm;
}

bool Coefficient::is_real() const {
  for (const auto& k : kappa)
    if (k.imag() != 0.0) return false;
  return true;
}

Coefficient coefficient_constant(const Mesh& mesh, double mu, Complex kappa) {
  Coefficient c;
  c.mu.assign(mesh.num_tets(), diag_mu(mu));
  c.kappa.assign(mesh.num_tets(), kappa);
  c.descriptor = "constant(mu=" + std::to_string(mu) + ")";
  return c;
}

Coefficient coefficient_checkerboard(const Mesh& mesh, double delta, double v0, double v1,
                                     Complex kappa) {
  Coefficient c;
  c.mu.resize(mesh.num_tets());
  c.kappa.assign(mesh.num_tets(), kappa);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& T = mesh.tets[t];
    Vec3 centroid{0, 0, 0};
    for (int v : T) centroid = centroid + 0.25 * mesh.vertices[v];
    long parity = 0;
    for (int a = 0; a < 3; ++a)
      parity += static_cast<long>(std::floor((centroid[a] - mesh.box.lo[a]) / delta));
    c.mu[t] = diag_mu((parity % 2 == 0) ? v0 : v1);
  }
  c.descriptor = "checkerboard(delta=" + std::to_string(delta) + ")";
  return c;
}

Coefficient coefficient_random_checkerboard(const Mesh& mesh, double lo, double hi,
                                            std::uint64_t seed, Complex kappa) {
  Coefficient c;
  c.mu.resize(mesh.num_tets());
  c.kappa.assign(mesh.num_tets(), kappa);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const std::uint64_t cube = static_cast<std::uint64_t>(t / 6);
    c.mu[t] = diag_mu(lo + (hi - lo) * seeded_uniform(seed, cube));
  }
  c.descriptor = "random_checkerboard(seed=" + std::to_string(seed) + ")";
  return c;
}

const std::array<QuadPoint, 4>& quad_degree2() {
  static const double a = 0.58541019662496845446;  // (5 + 3 sqrt 5) / 20
  static const double b = 0.13819660112501051518;  // (5 - sqrt 5) / 20
  static const std::array<QuadPoint, 4> rule = {{{{a, b, b, b}, 0.25},
                                                 {{b, a, b, b}, 0.25},
                                                 {{b, b, a, b}, 0.25},
                                                 {{b, b, b, a}, 0.25}}};
  return rule;
}

std::array<Vec3, 6> nedelec_at(const Mesh& mesh, int t, const Vec3& x) {
  return TetCtx(mesh, t).nedelec(p1_at(mesh, t, x));
}

std::array<Vec3, 6> nedelec_curls(const Mesh& mesh, int t) { return TetCtx(mesh, t).curls(); }

std::array<Vec3, 4> rt_at(const Mesh& mesh, int t, const Vec3& x) {
  const TetCtx ctx(mesh, t);
  std::array<Vec3, 4> phi;
  for (int k = 0; k < 4; ++k) {
    const Vec3 d = x - mesh.vertices[mesh.tets[t][k]];
    phi[k] = (ctx.fsign[k] * ctx.farea[k] / (3.0 * ctx.vol)) * d;
  }
  return phi;
}

std::array<double, 4> rt_divs(const Mesh& mesh, int t) {
  const TetCtx ctx(mesh, t);
  std::array<double, 4> d;
  for (int k = 0; k < 4; ++k) d[k] = ctx.fsign[k] * ctx.farea[k] / ctx.vol;
  return d;
}

std::array<double, 4> p1_at(const Mesh& mesh, int t, const Vec3& x) {
  const auto g = mesh.barycentric_gradients(t);
  const Vec3 d = x - mesh.vertices[mesh.tets[t][0]];
  std::array<double, 4> lam;
  for (int k = 1; k < 4; ++k) lam[k] = dot(g[k], d);
  lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
  return lam;
}

Vec3 tet_point(const Mesh& mesh, int t, const std::array<double, 4>& lam) {
  Vec3 x{0, 0, 0};
  for (int k = 0; k < 4; ++k) x = x + lam[k] * mesh.vertices[mesh.tets[t][k]];
  return x;
}

SparseOperator assemble_B(const Mesh& mesh, const Coefficient& coeff, const DofMap& dofs,
                          const std::vector<int>* restriction) {
  if (static_cast<int>(coeff.mu.size()) != mesh.num_tets())
    throw Error("assemble_B: coefficient defined on a different mesh (" +
                std::to_string(coeff.mu.size()) + " cells vs " + std::to_string(mesh.num_tets()) +
                " tets)");
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  const auto& rule = quad_degree2();

  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 36);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    const auto c = ctx.curls();
    Eigen::Matrix<Complex, 6, 6> local;
    for (int j = 0; j < 6; ++j)
      for (int k = 0; k < 6; ++k) local(j, k) = dot(apply_mu(coeff.mu[t], c[k]), c[j]) * ctx.vol;
    for (const auto& qp : rule) {
      const auto psi = ctx.nedelec(qp.bary);
      const Complex w = qp.weight * ctx.vol * coeff.kappa[t];
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 6; ++k) local(j, k) += w * dot(psi[k], psi[j]);
    }
    for (int j = 0; j < 6; ++j) {
      const int J = dofs.index[ctx.eglobal[j]];
      if (J < 0) continue;
      for (int k = 0; k < 6; ++k) {
        const int K = dofs.index[ctx.eglobal[k]];
        if (K >= 0) trip.emplace_back(J, K, local(j, k));
      }
    }
  }
  SparseOperator M(dofs.num_dofs(), dofs.num_dofs());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

SparseOperator assemble_gradient(const Mesh& mesh, const DofMap& dofs_p1, const DofMap& dofs_n) {
  std::vector<Triplet> trip;
  trip.reserve(dofs_n.num_dofs() * 2);
  for (int E = 0; E < dofs_n.num_dofs(); ++E) {
    const int e = dofs_n.entities[E];
    const double inv_len = 1.0 / mesh.edge_length(e);
    const int tail = mesh.edges[e][0], head = mesh.edges[e][1];
    if (dofs_p1.index[head] >= 0) trip.emplace_back(E, dofs_p1.index[head], Complex(inv_len));
    if (dofs_p1.index[tail] >= 0) trip.emplace_back(E, dofs_p1.index[tail], Complex(-inv_len));
  }
  SparseOperator G(dofs_n.num_dofs(), dofs_p1.num_dofs());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

VecC assemble_rhs(const Mesh& mesh, const DofMap& dofs_n,
                  const std::function<Vec3(const Vec3&)>& f) {
  VecC b = VecC::Zero(dofs_n.num_dofs());
  const auto& rule = quad_degree2();
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const TetCtx ctx(mesh, t);
    for (const auto& qp : rule) {
      const Vec3 x = tet_point(mesh, t, qp.bary);
      const Vec3 fx = f(x);
      const auto psi = ctx.nedelec(qp.bary);
      const double w = qp.weight * ctx.vol;
      for (int k = 0; k < 6; ++k) {
        const int K = dofs_n.index[ctx.eglobal[k]];
        if (K >= 0) b[K] += w * dot(fx, psi[k]);
      }
    }
  }
  return b;
}

SparseOperator prolongate(const MeshHierarchy& hier, const DofMap& dofs_coarse,
                          const DofMap& dofs_fine) {
  const Mesh& cm = hier.coarse;
  const Mesh& fm = hier.fine;

  // coarse edge -> coarse tets
  std::vector<std::vector<int>> edge_tets(cm.num_edges());
  for (int t = 0; t < cm.num_tets(); ++t)
    for (int e : cm.tet_edges[t]) edge_tets[e].push_back(t);

  std::vector<Triplet> trip;
  std::vector<int> stamp(dofs_fine.num_dofs(), -1);
  for (int E = 0; E < dofs_coarse.num_dofs(); ++E) {
    const int ce = dofs_coarse.entities[E];
    for (int tc : edge_tets[ce]) {
      const TetCtx ctx(cm, tc);
      for (int tf : hier.children[tc]) {
        for (int k = 0; k < 6; ++k) {
          const int fe = fm.tet_edges[tf][k];
          const int row = dofs_fine.index[fe];
          if (row < 0 || stamp[row] == E) continue;
          stamp[row] = E;
          const Vec3 mid = fm.edge_midpoint(fe);
          const auto psi = ctx.nedelec(p1_at(cm, tc, mid));
          // the coarse basis function of edge ce has local index with
          // global edge ce in tc
          double val = 0.0;
          for (int j = 0; j < 6; ++j)
            if (ctx.eglobal[j] == ce) val = dot(psi[j], fm.edge_tangent(fe));
          if (std::abs(val) > 1e-14) trip.emplace_back(row, E, Complex(val));
        }
      }
    }
  }
  SparseOperator P(dofs_fine.num_dofs(), dofs_coarse.num_dofs());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

SparseOperator assemble_p1_stiffness(const Mesh& mesh, const DofMap& dofs_p1,
                                     const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 16);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    for (int j = 0; j < 4; ++j) {
      const int J = dofs_p1.index[mesh.tets[t][j]];
      if (J < 0) continue;
      for (int k = 0; k < 4; ++k) {
        const int K = dofs_p1.index[mesh.tets[t][k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(dot(ctx.grad[k], ctx.grad[j]) * ctx.vol));
      }
    }
  }
  SparseOperator A(dofs_p1.num_dofs(), dofs_p1.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

SparseOperator assemble_rt_mass(const Mesh& mesh, const DofMap& dofs_rt,
                                const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  const auto& rule = quad_degree2();
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 16);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    Eigen::Matrix<double, 4, 4> local = Eigen::Matrix<double, 4, 4>::Zero();
    for (const auto& qp : rule) {
      const Vec3 x = tet_point(mesh, t, qp.bary);
      const auto phi = rt_at(mesh, t, x);
      const double w = qp.weight * ctx.vol;
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) local(j, k) += w * dot(phi[k], phi[j]);
    }
    for (int j = 0; j < 4; ++j) {
      const int J = dofs_rt.index[ctx.fglobal[j]];
      if (J < 0) continue;
      for (int k = 0; k < 4; ++k) {
        const int K = dofs_rt.index[ctx.fglobal[k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(local(j, k)));
      }
    }
  }
  SparseOperator M(dofs_rt.num_dofs(), dofs_rt.num_dofs());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

SparseOperator assemble_rt_divdiv(const Mesh& mesh, const DofMap& dofs_rt,
                                  const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 16);
  for (int t : elems) {
    const double vol = mesh.tet_volume(t);
    const auto div = rt_divs(mesh, t);
    for (int j = 0; j < 4; ++j) {
      const int J = dofs_rt.index[mesh.tet_faces[t][j]];
      if (J < 0) continue;
      for (int k = 0; k < 4; ++k) {
        const int K = dofs_rt.index[mesh.tet_faces[t][k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(vol * div[j] * div[k]));
      }
    }
  }
  SparseOperator D(dofs_rt.num_dofs(), dofs_rt.num_dofs());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

SparseOperator assemble_rt_div(const Mesh& mesh, const DofMap& dofs_p0, const DofMap& dofs_rt,
                               const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 4);
  for (int t : elems) {
    const int J = dofs_p0.index[t];
    if (J < 0) continue;
    const double vol = mesh.tet_volume(t);
    const auto div = rt_divs(mesh, t);
    for (int k = 0; k < 4; ++k) {
      const int K = dofs_rt.index[mesh.tet_faces[t][k]];
      if (K >= 0) trip.emplace_back(J, K, Complex(vol * div[k]));
    }
  }
  SparseOperator D(dofs_p0.num_dofs(), dofs_rt.num_dofs());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

SparseOperator assemble_n_curlcurl(const Mesh& mesh, const DofMap& dofs_n,
                                   const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 36);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    const auto c = ctx.curls();
    for (int j = 0; j < 6; ++j) {
      const int J = dofs_n.index[ctx.eglobal[j]];
      if (J < 0) continue;
      for (int k = 0; k < 6; ++k) {
        const int K = dofs_n.index[ctx.eglobal[k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(dot(c[k], c[j]) * ctx.vol));
      }
    }
  }
  SparseOperator A(dofs_n.num_dofs(), dofs_n.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

SparseOperator assemble_rt_n_mass_pairing(const Mesh& mesh, const DofMap& dofs_rt,
                                          const DofMap& dofs_n,
                                          const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  const auto& rule = quad_degree2();
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 24);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    Eigen::Matrix<double, 4, 6> local = Eigen::Matrix<double, 4, 6>::Zero();
    for (const auto& qp : rule) {
      const Vec3 x = tet_point(mesh, t, qp.bary);
      const auto phi = rt_at(mesh, t, x);
      const auto psi = nedelec_at(mesh, t, x);
      const double w = qp.weight * ctx.vol;
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 6; ++k) local(j, k) += w * dot(psi[k], phi[j]);
    }
    for (int j = 0; j < 4; ++j) {
      const int J = dofs_rt.index[ctx.fglobal[j]];
      if (J < 0) continue;
      for (int k = 0; k < 6; ++k) {
        const int K = dofs_n.index[ctx.eglobal[k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(local(j, k)));
      }
    }
  }
  SparseOperator C(dofs_rt.num_dofs(), dofs_n.num_dofs());
  C.setFromTriplets(trip.begin(), trip.end());
  return C;
}

SparseOperator assemble_rt_n_curl_pairing(const Mesh& mesh, const DofMap& dofs_rt,
                                          const DofMap& dofs_n,
                                          const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  const auto& rule = quad_degree2();
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 24);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    const auto c = ctx.curls();
    Eigen::Matrix<double, 4, 6> local = Eigen::Matrix<double, 4, 6>::Zero();
    for (const auto& qp : rule) {
      const Vec3 x = tet_point(mesh, t, qp.bary);
      const auto phi = rt_at(mesh, t, x);
      const double w = qp.weight * ctx.vol;
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 6; ++k) local(j, k) += w * dot(c[k], phi[j]);
    }
    for (int j = 0; j < 4; ++j) {
      const int J = dofs_rt.index[ctx.fglobal[j]];
      if (J < 0) continue;
      for (int k = 0; k < 6; ++k) {
        const int K = dofs_n.index[ctx.eglobal[k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(local(j, k)));
      }
    }
  }
  SparseOperator C(dofs_rt.num_dofs(), dofs_n.num_dofs());
  C.setFromTriplets(trip.begin(), trip.end());
  return C;
}

SparseOperator assemble_n_p1grad_pairing(const Mesh& mesh, const DofMap& dofs_p1,
                                         const DofMap& dofs_n,
                                         const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  const auto& rule = quad_degree2();
  std::vector<Triplet> trip;
  trip.reserve(elems.size() * 24);
  for (int t : elems) {
    const TetCtx ctx(mesh, t);
    Eigen::Matrix<double, 4, 6> local = Eigen::Matrix<double, 4, 6>::Zero();
    for (const auto& qp : rule) {
      const auto psi = ctx.nedelec(qp.bary);
      const double w = qp.weight * ctx.vol;
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 6; ++k) local(j, k) += w * dot(psi[k], ctx.grad[j]);
    }
    for (int j = 0; j < 4; ++j) {
      const int J = dofs_p1.index[mesh.tets[t][j]];
      if (J < 0) continue;
      for (int k = 0; k < 6; ++k) {
        const int K = dofs_n.index[ctx.eglobal[k]];
        if (K >= 0) trip.emplace_back(J, K, Complex(local(j, k)));
      }
    }
  }
  SparseOperator T(dofs_p1.num_dofs(), dofs_n.num_dofs());
  T.setFromTriplets(trip.begin(), trip.end());
  return T;
}

VecC assemble_mean_row(const Mesh& mesh, const DofMap& dofs, const std::vector<int>* restriction) {
  const auto& elems = restriction ? *restriction : all_elements(mesh);
  VecC row = VecC::Zero(dofs.num_dofs());
  for (int t : elems) {
    const double vol = mesh.tet_volume(t);
    if (dofs.space == Space::P0) {
      const int J = dofs.index[t];
      if (J >= 0) row[J] += vol;
    } else if (dofs.space == Space::P1) {
      for (int v : mesh.tets[t]) {
        const int J = dofs.index[v];
        if (J >= 0) row[J] += vol / 4.0;
      }
    } else {
      throw Error("assemble_mean_row: only P0 and P1 spaces carry mean constraints");
    }
  }
  return row;
}

}  // namespace curllod
