#include "curllod/falk_winther.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "curllod/solver.hpp"

namespace curllod {

namespace {

using Triplet = Eigen::Triplet<Complex>;
using CVec3 = std::array<Complex, 3>;

Complex cdot(const CVec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

void axpy(CVec3& a, Complex s, const Vec3& v) {
  a[0] += s * v[0];
  a[1] += s * v[1];
  a[2] += s * v[2];
}

void axpy(CVec3& a, double s, const CVec3& v) {
  a[0] += s * v[0];
  a[1] += s * v[1];
  a[2] += s * v[2];
}

constexpr std::array<double, 4> kCentroid = {0.25, 0.25, 0.25, 0.25};

int find_sorted(const std::vector<int>& v, int x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) return -1;
  return static_cast<int>(it - v.begin());
}

/// Partition of the patch vertices by connectivity through patch edges on
/// boundary(domain). Gradients admissible for the Domain-ringed Nedelec
/// space have potentials constant on each class and free elsewhere, so the
/// classes are exactly the units the boundary corrections must resolve.
/// Each class also carries the patch faces on boundary(domain) it owns
/// (their vertices all lie in one class), weighted by the outward flux of
/// the face basis function (the basis has unit normal trace, so that flux
/// is the signed face area).
struct BoundaryClasses {
  std::vector<int> vclass;  // per patch vertex slot; -1 when unclassed
  int count = 0;
  std::vector<std::vector<std::pair<int, double>>> class_faces;  // global face, outward flux
};

BoundaryClasses boundary_classes(const Mesh& mesh, const Patch& p) {
  const int nv = static_cast<int>(p.vertices.size());
  BoundaryClasses bc;
  bc.vclass.assign(nv, -1);
  std::vector<int> parent(nv);
  for (int i = 0; i < nv; ++i) parent[i] = i;
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<std::uint8_t> touched(nv, 0);
  for (int e : p.edges) {
    if (!mesh.edge_boundary[e]) continue;
    const int a = find_sorted(p.vertices, mesh.edges[e][0]);
    const int b = find_sorted(p.vertices, mesh.edges[e][1]);
    touched[a] = touched[b] = 1;
    parent[find(a)] = find(b);
  }
  std::vector<int> id_of_root(nv, -1);
  for (int i = 0; i < nv; ++i) {
    if (!touched[i]) continue;
    const int root = find(i);
    if (id_of_root[root] < 0) id_of_root[root] = bc.count++;
    bc.vclass[i] = id_of_root[root];
  }
  bc.class_faces.resize(bc.count);
  for (int f : p.faces) {
    if (!mesh.face_boundary[f]) continue;
    const int k = bc.vclass[find_sorted(p.vertices, mesh.faces[f][0])];
    const int t = mesh.face_tets[f][0] >= 0 ? mesh.face_tets[f][0] : mesh.face_tets[f][1];
    Vec3 cf{0, 0, 0}, ct{0, 0, 0};
    for (int v : mesh.faces[f]) cf = cf + (1.0 / 3.0) * mesh.vertices[v];
    for (int v : mesh.tets[t]) ct = ct + 0.25 * mesh.vertices[v];
    const double sgn = dot(mesh.face_normal(f), cf - ct) > 0.0 ? 1.0 : -1.0;
    bc.class_faces[k].push_back({f, sgn * mesh.face_area(f)});
  }
  return bc;
}

/// Smoothing data at a coarse vertex y: the mean-constrained Neumann
/// problem on omega_y, solved once for the unit load at y. The saddle block
/// is real symmetric, so that single solve yields the "value at y" row
/// functional as a weight vector over patch vertices; applying the smoother
/// to any field then reduces to integrating a fixed piecewise-constant
/// gradient combination against it.
struct VertexSmoother {
  Patch vp;
  DofMap p1;
  std::vector<CVec3> grad_field;  // sum_y w[y] grad(phi_y), per patch tet
  double measure = 0.0;
};

VertexSmoother make_smoother(const Mesh& coarse, int y) {
  VertexSmoother s;
  s.vp = vertex_patch(coarse, y);
  s.p1 = dofmap_patch(coarse, s.vp, Space::P1, Ring::None);
  const int n = s.p1.num_dofs();

  SparseOperator A = assemble_p1_stiffness(coarse, s.p1, &s.vp.tets);
  const VecC mean = assemble_mean_row(coarse, s.p1, &s.vp.tets);
  std::vector<Triplet> trip;
  trip.reserve(n);
  for (int j = 0; j < n; ++j)
    if (mean[j] != 0.0) trip.emplace_back(0, j, mean[j]);
  SparseOperator C(1, n);
  C.setFromTriplets(trip.begin(), trip.end());

  SaddleFactorization fact(A, C, false, "vertex smoother at vertex " + std::to_string(y));
  VecC f = VecC::Zero(n);
  f[s.p1.index[y]] = 1.0;
  const VecC w = fact.solve(f, VecC::Zero(1)).primal;

  s.grad_field.resize(s.vp.tets.size());
  for (std::size_t i = 0; i < s.vp.tets.size(); ++i) {
    const int t = s.vp.tets[i];
    s.measure += coarse.tet_volume(t);
    const auto grad = coarse.barycentric_gradients(t);
    CVec3 g{};
    for (int a = 0; a < 4; ++a) axpy(g, w[s.p1.index[coarse.tets[t][a]]], grad[a]);
    s.grad_field[i] = g;
  }
  return s;
}

EdgeFaceField z1_impl(const Mesh& coarse, int E, Patch cpatch, const BoundaryClasses& bc,
                      const std::vector<int>& vp1_tets, double meas1,
                      const std::vector<int>& vp2_tets, double meas2) {
  EdgeFaceField out;
  out.patch = std::move(cpatch);
  // Normal trace vanishes on the interior cut of the patch boundary only;
  // faces on boundary(domain) stay free and are constrained in aggregate.
  out.dofs_rt = dofmap_patch(coarse, out.patch, Space::RaviartThomas, Ring::PatchCut);
  const DofMap p0 = dofmap_patch(coarse, out.patch, Space::P0, Ring::None);
  const int nt = p0.num_dofs();

  const SparseOperator M = assemble_rt_mass(coarse, out.dofs_rt, &out.patch.tets);
  const SparseOperator D = assemble_rt_div(coarse, p0, out.dofs_rt, &out.patch.tets);

  // (div z, q) = (-(dz0)_E, q): indicator jump head minus tail, each
  // interior endpoint indicator normalized by its vertex-patch measure. A
  // boundary endpoint carries no volume weight; it sources through its
  // boundary class instead.
  const int y1 = coarse.edges[E][0], y2 = coarse.edges[E][1];
  VecC g = VecC::Zero(nt + bc.count);
  for (int q = 0; q < nt; ++q) {
    const int t = p0.entities[q];
    double dz0 = 0.0;
    if (!coarse.vertex_boundary[y2] && find_sorted(vp2_tets, t) >= 0) dz0 += 1.0 / meas2;
    if (!coarse.vertex_boundary[y1] && find_sorted(vp1_tets, t) >= 0) dz0 -= 1.0 / meas1;
    g[q] = -dz0 * coarse.tet_volume(t);
  }

  // One aggregate row per boundary class: net outflux +1 through the class
  // of a boundary head, -1 through the class of a boundary tail, 0 through
  // any other class. Pairing a potential against z1 then telescopes exactly
  // for potentials constant per class, which is what the edge correction
  // needs to vanish on gradients.
  std::vector<Triplet> ct;
  ct.reserve(static_cast<std::size_t>(D.nonZeros()) + out.patch.faces.size());
  for (int col = 0; col < D.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(D, col); it; ++it)
      ct.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < bc.count; ++k)
    for (const auto& [f, sgn] : bc.class_faces[k])
      ct.emplace_back(nt + k, out.dofs_rt.index[f], Complex(sgn, 0));
  if (coarse.vertex_boundary[y2]) g[nt + bc.vclass[find_sorted(out.patch.vertices, y2)]] += 1.0;
  if (coarse.vertex_boundary[y1]) g[nt + bc.vclass[find_sorted(out.patch.vertices, y1)]] -= 1.0;

  SaddleSystem sys;
  sys.A = M;
  sys.C = SparseOperator(nt + bc.count, out.dofs_rt.num_dofs());
  sys.C.setFromTriplets(ct.begin(), ct.end());
  sys.f = VecC::Zero(out.dofs_rt.num_dofs());
  sys.g = std::move(g);
  // Total class outflux equals total volume source, so the constraint rows
  // carry exactly one redundancy.
  sys.drop_gauge_row = true;
  sys.context = "z1 field at coarse edge " + std::to_string(E);
  out.z = solve_saddle(sys).primal;
  return out;
}

/// One projection row: local column ids (global fine interior DOFs,
/// ascending) with the P1 and P2 values, plus the patch record.
struct RowPair {
  std::vector<int> cols;
  std::vector<Complex> p1;
  std::vector<Complex> p2;
  std::vector<int> patch_tets;
};

struct Engine {
  const MeshHierarchy& hier;
  const Mesh& coarse;
  const Mesh& fine;
  DofMap rows;  // coarse interior edges
  DofMap cols;  // fine interior edges
  std::vector<VertexSmoother> smoothers;

  explicit Engine(const MeshHierarchy& h)
      : hier(h),
        coarse(h.coarse),
        fine(h.fine),
        rows(dofmap_global(h.coarse, Space::Nedelec, Ring::Domain)),
        cols(dofmap_global(h.fine, Space::Nedelec, Ring::Domain)) {
    smoothers.reserve(coarse.num_vertices());
    for (int y = 0; y < coarse.num_vertices(); ++y)
      smoothers.push_back(coarse.vertex_boundary[y] ? VertexSmoother{} : make_smoother(coarse, y));
  }

  RowPair build_row(int E) const;
  std::vector<RowPair> build_all(int threads) const;
};

RowPair Engine::build_row(int E) const {
  const int y1 = coarse.edges[E][0], y2 = coarse.edges[E][1];  // tail, head
  // Smoothing corrections exist only at interior vertices: the gradient of a
  // boundary hat function is not tangentially ringed, so no such term enters
  // the expansion over interior edges.
  const bool sm1 = !coarse.vertex_boundary[y1], sm2 = !coarse.vertex_boundary[y2];
  const double inv_len = 1.0 / coarse.edge_length(E);
  const Patch cpatch = extended_edge_patch(coarse, E);
  const BoundaryClasses bclass = boundary_classes(coarse, cpatch);
  const std::string ctx = "projection row at coarse edge " + std::to_string(E);

  const VertexSmoother& s1 = smoothers[y1];
  const VertexSmoother& s2 = smoothers[y2];
  const EdgeFaceField zf =
      z1_impl(coarse, E, cpatch, bclass, s1.vp.tets, s1.measure, s2.vp.tets, s2.measure);

  // Fine DOFs on the closure of the patch: interior fine edges of the
  // refined patch tets. These are the only columns the row may touch.
  std::vector<int> ftets;
  for (int tc : cpatch.tets)
    ftets.insert(ftets.end(), hier.children[tc].begin(), hier.children[tc].end());
  const Patch fpatch = patch_from_tets(fine, std::move(ftets));
  const DofMap fdofs = dofmap_patch(fine, fpatch, Space::Nedelec, Ring::Domain);
  const int nloc = fdofs.num_dofs();

  // Patch Nedelec space for the edge correction, tangentially ringed on
  // boundary(domain) with the cut free: S U + T^H V = F, T U = G. The
  // multiplier rows pair against the gradients admissible for that space:
  // one hat per unclassed vertex plus one class aggregate, routed from the
  // full pairing. They sum to the constant's gradient, so one gauge row is
  // always redundant.
  const DofMap cN = dofmap_patch(coarse, cpatch, Space::Nedelec, Ring::Domain);
  const DofMap cP1 = dofmap_patch(coarse, cpatch, Space::P1, Ring::None);
  const SparseOperator S = assemble_n_curlcurl(coarse, cN, &cpatch.tets);
  const SparseOperator Tall = assemble_n_p1grad_pairing(coarse, cP1, cN, &cpatch.tets);
  std::vector<int> mrow(cpatch.vertices.size());
  int nfree_v = 0;
  for (std::size_t i = 0; i < mrow.size(); ++i)
    if (bclass.vclass[i] < 0) mrow[i] = nfree_v++;
  for (std::size_t i = 0; i < mrow.size(); ++i)
    if (bclass.vclass[i] >= 0) mrow[i] = nfree_v + bclass.vclass[i];
  const int nmult = nfree_v + bclass.count;
  std::vector<Triplet> tt;
  tt.reserve(Tall.nonZeros());
  for (int col = 0; col < Tall.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(Tall, col); it; ++it)
      tt.emplace_back(mrow[it.row()], static_cast<int>(it.col()), it.value());
  SparseOperator T(nmult, cN.num_dofs());
  T.setFromTriplets(tt.begin(), tt.end());

  const auto& rule = quad_degree2();

  // r = row E of the locally assembled averaging operator: the same
  // moment-plus-smoothing functionals, evaluated on the coarse patch basis.
  // Smoothing enters + at the head y2 and - at the tail y1, matching the
  // tangent convention t_E toward the larger vertex id.
  VecC r = VecC::Zero(cN.num_dofs());
  for (int tc : cpatch.tets) {
    const double vol = coarse.tet_volume(tc);
    std::array<Complex, 4> zc{};
    for (int k = 0; k < 4; ++k) {
      const int F = zf.dofs_rt.index[coarse.tet_faces[tc][k]];
      if (F >= 0) zc[k] = zf.z[F];
    }
    for (const auto& qp : rule) {
      const Vec3 x = tet_point(coarse, tc, qp.bary);
      const auto phi = rt_at(coarse, tc, x);
      CVec3 zval{};
      for (int k = 0; k < 4; ++k) axpy(zval, zc[k], phi[k]);
      const auto psi = nedelec_at(coarse, tc, x);
      const double w = qp.weight * vol;
      for (int k = 0; k < 6; ++k) {
        const int row = cN.index[coarse.tet_edges[tc][k]];
        if (row >= 0) r[row] += inv_len * w * cdot(zval, psi[k]);
      }
    }
    const int l1 = sm1 ? find_sorted(s1.vp.tets, tc) : -1;
    const int l2 = sm2 ? find_sorted(s2.vp.tets, tc) : -1;
    if (l1 < 0 && l2 < 0) continue;
    CVec3 wfield{};
    if (l2 >= 0) axpy(wfield, inv_len, s2.grad_field[l2]);
    if (l1 >= 0) axpy(wfield, -inv_len, s1.grad_field[l1]);
    const auto psi = nedelec_at(coarse, tc, tet_point(coarse, tc, kCentroid));
    for (int k = 0; k < 6; ++k) {
      const int row = cN.index[coarse.tet_edges[tc][k]];
      if (row >= 0) r[row] += vol * cdot(wfield, psi[k]);
    }
  }

  // Adjoint route to row E of U - P1loc*U: one saddle solve with the
  // combined functional on the right, then dot products against the fine
  // pairing columns. The saddle block is real symmetric, so this equals
  // extracting the row from the full multi-column solve.
  SaddleFactorization saddle(S, T, true, ctx);
  VecC f2 = -r;
  f2[cN.index[E]] += 1.0;
  const SaddleSolution adj = saddle.solve(f2, VecC::Zero(nmult));

  RowPair out;
  out.patch_tets = cpatch.tets;
  out.cols.resize(nloc);
  for (int j = 0; j < nloc; ++j) out.cols[j] = cols.index[fdofs.entities[j]];
  out.p1.assign(nloc, Complex(0, 0));
  out.p2.assign(nloc, Complex(0, 0));

  for (int tc : cpatch.tets) {
    // constants on this coarse tet
    std::array<Complex, 4> zc{};
    for (int k = 0; k < 4; ++k) {
      const int F = zf.dofs_rt.index[coarse.tet_faces[tc][k]];
      if (F >= 0) zc[k] = zf.z[F];
    }
    const auto cgrad = coarse.barycentric_gradients(tc);
    const auto ccurl = nedelec_curls(coarse, tc);
    CVec3 curl_sum{};  // sum_k adj.primal[k] curl(psi_k)
    for (int k = 0; k < 6; ++k) {
      const int row = cN.index[coarse.tet_edges[tc][k]];
      if (row >= 0) axpy(curl_sum, adj.primal[row], ccurl[k]);
    }
    CVec3 grad_sum{};  // sum over multiplier rows of adj.multiplier * grad(tau)
    for (int a = 0; a < 4; ++a)
      axpy(grad_sum, adj.multiplier[mrow[cP1.index[coarse.tets[tc][a]]]], cgrad[a]);
    CVec3 qfield{};  // smoothing field, head minus tail, scaled by 1/len
    const int l1 = sm1 ? find_sorted(s1.vp.tets, tc) : -1;
    const int l2 = sm2 ? find_sorted(s2.vp.tets, tc) : -1;
    if (l2 >= 0) axpy(qfield, inv_len, s2.grad_field[l2]);
    if (l1 >= 0) axpy(qfield, -inv_len, s1.grad_field[l1]);

    for (int tf : hier.children[tc]) {
      const double vol = fine.tet_volume(tf);
      const auto fcurl = nedelec_curls(fine, tf);
      const auto psic = nedelec_at(fine, tf, tet_point(fine, tf, kCentroid));
      std::array<Complex, 6> accum1{}, accum2{};
      // moment part of P1: coarse-RT x fine-Nedelec product, degree 2
      for (const auto& qp : rule) {
        const Vec3 x = tet_point(fine, tf, qp.bary);
        const auto phi = rt_at(coarse, tc, x);
        CVec3 zval{};
        for (int k = 0; k < 4; ++k) axpy(zval, zc[k], phi[k]);
        const auto psi = nedelec_at(fine, tf, x);
        const double w = qp.weight * vol;
        for (int k = 0; k < 6; ++k) accum1[k] += inv_len * w * cdot(zval, psi[k]);
      }
      // smoothing part of P1 and both parts of P2: constant-times-affine
      // integrands, exact at the centroid
      for (int k = 0; k < 6; ++k) {
        accum1[k] += vol * cdot(qfield, psic[k]);
        accum2[k] = vol * (cdot(curl_sum, fcurl[k]) + cdot(grad_sum, psic[k]));
        const int col = fdofs.index[fine.tet_edges[tf][k]];
        if (col < 0) continue;
        out.p1[col] += accum1[k];
        out.p2[col] += accum2[k];
      }
    }
  }
  return out;
}

std::vector<RowPair> Engine::build_all(int threads) const {
  const int nrows = rows.num_dofs();
  std::vector<RowPair> out(nrows);
  if (threads <= 1) {
    for (int i = 0; i < nrows; ++i) out[i] = build_row(rows.entities[i]);
    return out;
  }
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= nrows) return;
      out[i] = build_row(rows.entities[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return out;
}

SparseOperator rows_to_matrix(const Engine& eng, const std::vector<RowPair>& rows, bool use_p1,
                              bool use_p2) {
  std::vector<Triplet> trip;
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.cols.size();
  trip.reserve(nnz);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    for (std::size_t j = 0; j < r.cols.size(); ++j) {
      Complex v(0, 0);
      if (use_p1) v += r.p1[j];
      if (use_p2) v += r.p2[j];
      trip.emplace_back(static_cast<int>(i), r.cols[j], v);
    }
  }
  SparseOperator P(eng.rows.num_dofs(), eng.cols.num_dofs());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

}  // namespace

EdgeFaceField z1_field(const MeshHierarchy& hier, int E) {
  const Mesh& coarse = hier.coarse;
  if (E < 0 || E >= coarse.num_edges() || coarse.edge_boundary[E])
    throw Error("z1_field: edge " + std::to_string(E) + " is not an interior coarse edge");
  const int y1 = coarse.edges[E][0], y2 = coarse.edges[E][1];
  const Patch vp1 = vertex_patch(coarse, y1), vp2 = vertex_patch(coarse, y2);
  double meas1 = 0.0, meas2 = 0.0;
  for (int t : vp1.tets) meas1 += coarse.tet_volume(t);
  for (int t : vp2.tets) meas2 += coarse.tet_volume(t);
  Patch cpatch = extended_edge_patch(coarse, E);
  const BoundaryClasses bc = boundary_classes(coarse, cpatch);
  return z1_impl(coarse, E, std::move(cpatch), bc, vp1.tets, meas1, vp2.tets, meas2);
}

SparseOperator assemble_P1(const MeshHierarchy& hier) {
  const Engine eng(hier);
  return rows_to_matrix(eng, eng.build_all(1), true, false);
}

SparseOperator assemble_P2(const MeshHierarchy& hier) {
  const Engine eng(hier);
  return rows_to_matrix(eng, eng.build_all(1), false, true);
}

ProjectionMatrix projection(const MeshHierarchy& hier, int threads) {
  const Engine eng(hier);
  const auto rows = eng.build_all(threads);

  ProjectionMatrix pm;
  pm.P = rows_to_matrix(eng, rows, true, true);
  pm.patch_tets.reserve(rows.size());
  for (const auto& r : rows) pm.patch_tets.push_back(r.patch_tets);

  // Locality: every stored entry must sit on an interior fine edge of the
  // recorded patch closure, recomputed here from the patch record alone.
  Eigen::SparseMatrix<Complex, Eigen::RowMajor> by_row(pm.P);
  for (int i = 0; i < by_row.rows(); ++i) {
    std::vector<int> allowed;
    for (int tc : pm.patch_tets[i])
      for (int tf : hier.children[tc])
        for (int e : hier.fine.tet_edges[tf]) {
          const int c = eng.cols.index[e];
          if (c >= 0) allowed.push_back(c);
        }
    std::sort(allowed.begin(), allowed.end());
    for (Eigen::SparseMatrix<Complex, Eigen::RowMajor>::InnerIterator it(by_row, i); it; ++it)
      if (it.value() != Complex(0, 0) &&
          !std::binary_search(allowed.begin(), allowed.end(), static_cast<int>(it.col())))
        throw Error("projection: locality violated at row " + std::to_string(i) + ", col " +
                    std::to_string(it.col()));
  }

  // Projection identity: P * Prol = I on coarse DOFs.
  const SparseOperator prol = prolongate(hier, eng.rows, eng.cols);
  const SparseOperator prod = pm.P * prol;
  double worst = 0.0;
  Eigen::Index wr = -1, wc = -1;
  std::vector<std::uint8_t> diag_seen(prod.rows(), 0);
  for (int k = 0; k < prod.outerSize(); ++k)
    for (SparseOperator::InnerIterator it(prod, k); it; ++it) {
      Complex v = it.value();
      if (it.row() == it.col()) {
        diag_seen[it.row()] = 1;
        v -= 1.0;
      }
      if (std::abs(v) > worst) {
        worst = std::abs(v);
        wr = it.row();
        wc = it.col();
      }
    }
  for (Eigen::Index i = 0; i < prod.rows(); ++i)
    if (!diag_seen[i] && worst < 1.0) {
      worst = 1.0;
      wr = wc = i;
    }
  if (worst > 1e-8)
    throw Error("projection: identity violated, worst |(P*Prol - I)[" + std::to_string(wr) +
                "," + std::to_string(wc) + "]| = " + std::to_string(worst));
  return pm;
}

void dump_projection(const SparseOperator& P, std::ostream& out) {
  char buf[128];
  for (int k = 0; k < P.outerSize(); ++k)
    for (SparseOperator::InnerIterator it(P, k); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g %.17g\n", static_cast<long>(it.row()),
                    static_cast<long>(it.col()), it.value().real(), it.value().imag());
      out << buf;
    }
}

}  // namespace curllod
