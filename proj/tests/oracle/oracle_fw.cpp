#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "oracle.hpp"

namespace oracle {

namespace {

double dot(Vec3 a, Vec3 b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Complex cdot(const std::array<Complex, 3>& a, Vec3 b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

Vec3 point_in(const Mesh& m, int t, const std::array<double, 4>& l) {
  Vec3 x = {0, 0, 0};
  for (int a = 0; a < 4; ++a)
    for (int d = 0; d < 3; ++d) x[d] += l[a] * m.vertices[m.tets[t][a]][d];
  return x;
}

int slot(const std::vector<int>& sorted, int x) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
  if (it == sorted.end() || *it != x) return -1;
  return static_cast<int>(it - sorted.begin());
}

/// Mean-constrained Neumann solve on the tets around one coarse vertex; the
/// smoothing value of a field u is the solution of (grad p, grad rho) =
/// (u, grad rho) evaluated at the vertex itself.
struct Smoother {
  std::vector<int> tets;   // ascending
  std::vector<int> verts;  // ascending, vertices of those tets
  int slot_y = -1;
  std::unique_ptr<Lu> lu;  // KKT of size verts + 1
};

Smoother make_smoother(const Mesh& m, int y, const std::vector<int>& vp_tets) {
  Smoother s;
  s.tets = vp_tets;
  for (int t : s.tets)
    for (int v : m.tets[t]) s.verts.push_back(v);
  std::sort(s.verts.begin(), s.verts.end());
  s.verts.erase(std::unique(s.verts.begin(), s.verts.end()), s.verts.end());
  s.slot_y = slot(s.verts, y);

  const int n = static_cast<int>(s.verts.size());
  Mat kkt(n + 1, n + 1);
  for (int t : s.tets) {
    const double vol = tet_vol(m, t);
    const auto g = grads(m, t);
    for (int a = 0; a < 4; ++a) {
      const int i = slot(s.verts, m.tets[t][a]);
      for (int b = 0; b < 4; ++b)
        kkt.at(i, slot(s.verts, m.tets[t][b])) += vol * dot(g[a], g[b]);
      kkt.at(i, n) += vol / 4.0;
      kkt.at(n, i) += vol / 4.0;
    }
  }
  s.lu = std::make_unique<Lu>(std::move(kkt));
  return s;
}

Complex apply_smoother(const Smoother& s, std::vector<Complex> rhs) {
  rhs.push_back(Complex(0, 0));
  return s.lu->solve(std::move(rhs))[s.slot_y];
}

/// Extended edge patch with its entity lists, masked face dofs, and boundary
/// vertex classes.
struct PatchData {
  int E, y1, y2;
  std::vector<int> ptets, pverts, pedges, pfaces;
  std::vector<int> rtdofs;  // patch faces off the interior cut
  std::vector<int> vclass;  // per pverts slot; -1 when unclassed
  int nclass = 0;
};

PatchData make_patch(const Mesh& coarse, const Boundary& cb,
                     const std::vector<std::vector<int>>& vp, int E) {
  PatchData p;
  p.E = E;
  p.y1 = coarse.edges[E][0];
  p.y2 = coarse.edges[E][1];
  p.ptets = vp[p.y1];
  p.ptets.insert(p.ptets.end(), vp[p.y2].begin(), vp[p.y2].end());
  std::sort(p.ptets.begin(), p.ptets.end());
  p.ptets.erase(std::unique(p.ptets.begin(), p.ptets.end()), p.ptets.end());

  for (int t : p.ptets) {
    for (int v : coarse.tets[t]) p.pverts.push_back(v);
    for (const auto& pr : kPairs)
      p.pedges.push_back(edge_id(coarse, coarse.tets[t][pr[0]], coarse.tets[t][pr[1]]));
    for (const auto& tr : kTris)
      p.pfaces.push_back(
          face_id(coarse, coarse.tets[t][tr[0]], coarse.tets[t][tr[1]], coarse.tets[t][tr[2]]));
  }
  for (auto* v : {&p.pverts, &p.pedges, &p.pfaces}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }

  // Faces on the patch ring are owned by one patch tet; the ring minus
  // boundary(domain) is the cut, whose normal trace is masked.
  std::vector<int> fcount(p.pfaces.size(), 0);
  for (int t : p.ptets)
    for (const auto& tr : kTris)
      ++fcount[slot(p.pfaces, face_id(coarse, coarse.tets[t][tr[0]], coarse.tets[t][tr[1]],
                                      coarse.tets[t][tr[2]]))];
  for (std::size_t i = 0; i < p.pfaces.size(); ++i)
    if (!(fcount[i] == 1 && !cb.face[p.pfaces[i]])) p.rtdofs.push_back(p.pfaces[i]);

  // Boundary classes: patch vertices joined through patch edges on
  // boundary(domain).
  std::vector<int> uf(p.pverts.size());
  for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = static_cast<int>(i);
  const auto find = [&uf](int a) {
    while (uf[a] != a) a = uf[a] = uf[uf[a]];
    return a;
  };
  std::vector<char> touched(p.pverts.size(), 0);
  for (int e : p.pedges) {
    if (!cb.edge[e]) continue;
    const int a = slot(p.pverts, coarse.edges[e][0]), b = slot(p.pverts, coarse.edges[e][1]);
    touched[a] = touched[b] = 1;
    uf[find(a)] = find(b);
  }
  p.vclass.assign(p.pverts.size(), -1);
  std::vector<int> root_id(p.pverts.size(), -1);
  for (std::size_t i = 0; i < p.pverts.size(); ++i) {
    if (!touched[i]) continue;
    const int r = find(static_cast<int>(i));
    if (root_id[r] < 0) root_id[r] = p.nclass++;
    p.vclass[i] = root_id[r];
  }
  return p;
}

/// z1: minimal-L2 field with cellwise divergence matching the indicator jump
/// and one aggregate net-flux condition per boundary class. With the
/// unit-flux basis every constraint entry is the outwardness sign itself.
/// Returns coefficients by local face per patch tet, for point evaluation.
std::vector<std::array<Complex, 4>> build_z1(const Mesh& coarse, const Boundary& cb,
                                             const std::vector<std::vector<int>>& vp,
                                             const std::vector<double>& meas, const PatchData& p) {
  const auto& q5 = quad5();
  const int nrt = static_cast<int>(p.rtdofs.size());
  const int ntet = static_cast<int>(p.ptets.size());
  const int ncon = ntet + p.nclass;
  Mat M(nrt, nrt);
  Mat C(ncon, nrt);
  std::vector<Complex> g(ncon, Complex(0, 0));
  for (int q = 0; q < ntet; ++q) {
    const int t = p.ptets[q];
    const double vol = tet_vol(coarse, t);
    std::array<int, 4> loc;
    for (int k = 0; k < 4; ++k)
      loc[k] = slot(p.rtdofs, face_id(coarse, coarse.tets[t][kTris[k][0]],
                                      coarse.tets[t][kTris[k][1]], coarse.tets[t][kTris[k][2]]));
    for (int k = 0; k < 4; ++k) {
      if (loc[k] < 0) continue;
      for (int l = 0; l < 4; ++l) {
        if (loc[l] < 0) continue;
        double mm = 0.0;
        for (const auto& qp : q5) {
          const Vec3 x = point_in(coarse, t, qp.bary);
          mm += qp.weight * dot(face_basis(coarse, t, k, x), face_basis(coarse, t, l, x));
        }
        M.at(loc[k], loc[l]) += vol * mm;
      }
      C.at(q, loc[k]) += vol * face_div(coarse, t, k);
    }
    double dz0 = 0.0;
    if (!cb.vertex[p.y2] && slot(vp[p.y2], t) >= 0) dz0 += 1.0 / meas[p.y2];
    if (!cb.vertex[p.y1] && slot(vp[p.y1], t) >= 0) dz0 -= 1.0 / meas[p.y1];
    g[q] = -dz0 * vol;
    for (int k = 0; k < 4; ++k) {
      const int f = face_id(coarse, coarse.tets[t][kTris[k][0]], coarse.tets[t][kTris[k][1]],
                            coarse.tets[t][kTris[k][2]]);
      if (!cb.face[f] || loc[k] < 0) continue;
      C.at(ntet + p.vclass[slot(p.pverts, coarse.faces[f][0])], loc[k]) +=
          face_div(coarse, t, k) > 0 ? 1.0 : -1.0;
    }
  }
  if (cb.vertex[p.y2]) g[ntet + p.vclass[slot(p.pverts, p.y2)]] += 1.0;
  if (cb.vertex[p.y1]) g[ntet + p.vclass[slot(p.pverts, p.y1)]] -= 1.0;
  // A class without patch faces contributes an all-zero row (and never holds
  // an endpoint, so its datum is zero); drop those, then one more, since the
  // class fluxes balance the divergence totals exactly.
  std::vector<int> zkeep;
  for (int r = 0; r < ncon; ++r)
    for (int j = 0; j < nrt; ++j)
      if (C.at(r, j) != Complex(0, 0)) {
        zkeep.push_back(r);
        break;
      }
  zkeep.pop_back();
  const int nzk = static_cast<int>(zkeep.size());
  Mat zkkt(nrt + nzk, nrt + nzk);
  std::vector<Complex> zrhs(nrt + nzk, Complex(0, 0));
  for (int i = 0; i < nrt; ++i)
    for (int j = 0; j < nrt; ++j) zkkt.at(i, j) = M.at(i, j);
  for (int r = 0; r < nzk; ++r) {
    for (int j = 0; j < nrt; ++j) {
      zkkt.at(nrt + r, j) = C.at(zkeep[r], j);
      zkkt.at(j, nrt + r) = std::conj(C.at(zkeep[r], j));
    }
    zrhs[nrt + r] = g[zkeep[r]];
  }
  const std::vector<Complex> zsol = Lu(std::move(zkkt)).solve(std::move(zrhs));

  std::vector<std::array<Complex, 4>> zc(ntet);
  for (int q = 0; q < ntet; ++q)
    for (int k = 0; k < 4; ++k) {
      const int i = slot(p.rtdofs, face_id(coarse, coarse.tets[p.ptets[q]][kTris[k][0]],
                                           coarse.tets[p.ptets[q]][kTris[k][1]],
                                           coarse.tets[p.ptets[q]][kTris[k][2]]));
      zc[q][k] = i >= 0 ? zsol[i] : Complex(0, 0);
    }
  return zc;
}

}  // namespace

std::vector<Z1Probe> dense_z1_probe(const Mesh& coarse, int E) {
  const Boundary cb = boundary_of(coarse);
  const int ncv = static_cast<int>(coarse.vertices.size());
  std::vector<std::vector<int>> vp(ncv);
  for (std::size_t t = 0; t < coarse.tets.size(); ++t)
    for (int v : coarse.tets[t]) vp[v].push_back(static_cast<int>(t));
  std::vector<double> meas(ncv, 0.0);
  for (int y = 0; y < ncv; ++y)
    for (int t : vp[y]) meas[y] += tet_vol(coarse, t);

  const PatchData p = make_patch(coarse, cb, vp, E);
  const auto zc = build_z1(coarse, cb, vp, meas, p);
  std::vector<Z1Probe> out;
  for (std::size_t q = 0; q < p.ptets.size(); ++q) {
    const int t = p.ptets[q];
    const Vec3 x = point_in(coarse, t, {0.25, 0.25, 0.25, 0.25});
    Z1Probe pr;
    pr.tet = t;
    pr.at_centroid = {0, 0, 0};
    pr.div = 0.0;
    for (int k = 0; k < 4; ++k) {
      const Vec3 phi = face_basis(coarse, t, k, x);
      for (int d = 0; d < 3; ++d) pr.at_centroid[d] += zc[q][k].real() * phi[d];
      pr.div += zc[q][k].real() * face_div(coarse, t, k);
    }
    out.push_back(pr);
  }
  return out;
}

Mat dense_projection(const Mesh& coarse, const Mesh& fine, Mat* p1_out, Mat* p2_out) {
  const Boundary cb = boundary_of(coarse), fb = boundary_of(fine);
  const std::vector<int> rows = interior_edges(coarse, cb);
  const std::vector<int> cols = interior_edges(fine, fb);
  std::vector<int> col_of(fine.edges.size(), -1);
  for (std::size_t i = 0; i < cols.size(); ++i) col_of[cols[i]] = static_cast<int>(i);

  const std::vector<int> parent = parents_of(coarse, fine);
  std::vector<std::vector<int>> children(coarse.tets.size());
  for (std::size_t tf = 0; tf < fine.tets.size(); ++tf) children[parent[tf]].push_back((int)tf);

  const int ncv = static_cast<int>(coarse.vertices.size());
  std::vector<std::vector<int>> vp(ncv);
  for (std::size_t t = 0; t < coarse.tets.size(); ++t)
    for (int v : coarse.tets[t]) vp[v].push_back(static_cast<int>(t));
  std::vector<double> meas(ncv, 0.0);
  std::vector<Smoother> smoothers(ncv);
  for (int y = 0; y < ncv; ++y) {
    for (int t : vp[y]) meas[y] += tet_vol(coarse, t);
    if (!cb.vertex[y]) smoothers[y] = make_smoother(coarse, y, vp[y]);
  }

  const auto& q5 = quad5();
  const int nr = static_cast<int>(rows.size()), nc = static_cast<int>(cols.size());
  Mat P(nr, nc);
  if (p1_out) *p1_out = Mat(nr, nc);
  if (p2_out) *p2_out = Mat(nr, nc);

  for (std::size_t row = 0; row < rows.size(); ++row) {
    const PatchData pd = make_patch(coarse, cb, vp, rows[row]);
    const int E = pd.E, y1 = pd.y1, y2 = pd.y2;
    const double inv_len = 1.0 / edge_len(coarse, E);
    const std::vector<int>& ptets = pd.ptets;
    const int ntet = static_cast<int>(ptets.size());

    const auto zc = build_z1(coarse, cb, vp, meas, pd);
    const auto z1_at = [&](int q, Vec3 x) {
      std::array<Complex, 3> z{};
      for (int k = 0; k < 4; ++k) {
        const Vec3 phi = face_basis(coarse, ptets[q], k, x);
        for (int d = 0; d < 3; ++d) z[d] += zc[q][k] * phi[d];
      }
      return z;
    };

    // Edge-correction space: patch edges off boundary(domain), with
    // multiplier potentials one hat per unclassed vertex and one aggregate
    // per class. Near-zero rows are pruned, then the last survivor goes as
    // the gauge.
    std::vector<int> pdofs;
    for (int e : pd.pedges)
      if (!cb.edge[e]) pdofs.push_back(e);
    const int np = static_cast<int>(pdofs.size());
    std::vector<int> mrow(pd.pverts.size());
    int nfree = 0;
    for (std::size_t i = 0; i < pd.pverts.size(); ++i)
      if (pd.vclass[i] < 0) mrow[i] = nfree++;
    for (std::size_t i = 0; i < pd.pverts.size(); ++i)
      if (pd.vclass[i] >= 0) mrow[i] = nfree + pd.vclass[i];
    const int nmult = nfree + pd.nclass;

    Mat S(np, np), T(nmult, np);
    for (int q = 0; q < ntet; ++q) {
      const int t = ptets[q];
      const double vol = tet_vol(coarse, t);
      const auto g = grads(coarse, t);
      std::array<int, 6> loc;
      for (int k = 0; k < 6; ++k)
        loc[k] = slot(pdofs, edge_id(coarse, coarse.tets[t][kPairs[k][0]],
                                     coarse.tets[t][kPairs[k][1]]));
      for (int k = 0; k < 6; ++k) {
        if (loc[k] < 0) continue;
        const Vec3 ck = edge_curl(coarse, t, k);
        for (int l = 0; l < 6; ++l) {
          if (loc[l] < 0) continue;
          S.at(loc[k], loc[l]) += vol * dot(edge_curl(coarse, t, l), ck);
        }
        for (int a = 0; a < 4; ++a) {
          double mm = 0.0;
          for (const auto& qp : q5) {
            const Vec3 x = point_in(coarse, t, qp.bary);
            mm += qp.weight * dot(edge_basis(coarse, t, k, x), g[a]);
          }
          T.at(mrow[slot(pd.pverts, coarse.tets[t][a])], loc[k]) += vol * mm;
        }
      }
    }
    double tmax = 0.0;
    for (const Complex& v : T.a) tmax = std::max(tmax, std::abs(v));
    std::vector<int> keep;
    for (int r = 0; r < nmult; ++r) {
      double rmax = 0.0;
      for (int j = 0; j < np; ++j) rmax = std::max(rmax, std::abs(T.at(r, j)));
      if (rmax > 1e-9 * tmax) keep.push_back(r);
    }
    if (!keep.empty()) keep.pop_back();
    const int nk = static_cast<int>(keep.size());
    Mat wkkt(np + nk, np + nk);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < np; ++j) wkkt.at(i, j) = S.at(i, j);
    for (int r = 0; r < nk; ++r)
      for (int j = 0; j < np; ++j) {
        wkkt.at(np + r, j) = T.at(keep[r], j);
        wkkt.at(j, np + r) = std::conj(T.at(keep[r], j));
      }
    const Lu wlu(std::move(wkkt));
    const int pd_E = slot(pdofs, E);

    // The averaging functional, shared by the fine argument and its coarse
    // correction: z1 moment plus the endpoint smoothing difference.
    const auto p1_coarse = [&](const std::vector<Complex>& W) {
      Complex mom(0, 0);
      for (int q = 0; q < ntet; ++q) {
        const int t = ptets[q];
        const double vol = tet_vol(coarse, t);
        std::array<int, 6> loc;
        for (int k = 0; k < 6; ++k)
          loc[k] = slot(pdofs, edge_id(coarse, coarse.tets[t][kPairs[k][0]],
                                       coarse.tets[t][kPairs[k][1]]));
        for (const auto& qp : q5) {
          const Vec3 x = point_in(coarse, t, qp.bary);
          std::array<Complex, 3> wv{};
          for (int k = 0; k < 6; ++k) {
            if (loc[k] < 0) continue;
            const Vec3 psi = edge_basis(coarse, t, k, x);
            for (int d = 0; d < 3; ++d) wv[d] += W[loc[k]] * psi[d];
          }
          const auto zv = z1_at(q, x);
          mom += qp.weight * vol * (wv[0] * zv[0] + wv[1] * zv[1] + wv[2] * zv[2]);
        }
      }
      Complex sm(0, 0);
      for (const auto& [y, sign] : {std::pair<int, double>{y2, 1.0}, {y1, -1.0}}) {
        if (cb.vertex[y]) continue;
        const Smoother& s = smoothers[y];
        std::vector<Complex> rhs(s.verts.size(), Complex(0, 0));
        for (int t : s.tets) {
          const double vol = tet_vol(coarse, t);
          const auto g = grads(coarse, t);
          std::array<int, 6> loc;
          for (int k = 0; k < 6; ++k)
            loc[k] = slot(pdofs, edge_id(coarse, coarse.tets[t][kPairs[k][0]],
                                         coarse.tets[t][kPairs[k][1]]));
          for (int a = 0; a < 4; ++a) {
            Complex mm(0, 0);
            for (const auto& qp : q5) {
              const Vec3 x = point_in(coarse, t, qp.bary);
              std::array<Complex, 3> wv{};
              for (int k = 0; k < 6; ++k) {
                if (loc[k] < 0) continue;
                const Vec3 psi = edge_basis(coarse, t, k, x);
                for (int d = 0; d < 3; ++d) wv[d] += W[loc[k]] * psi[d];
              }
              mm += qp.weight * cdot(wv, g[a]);
            }
            rhs[slot(s.verts, coarse.tets[t][a])] += vol * mm;
          }
        }
        sm += sign * apply_smoother(s, std::move(rhs));
      }
      return inv_len * (mom + sm);
    };

    // Fine tets of the patch and the fine edges they carry.
    std::map<int, std::vector<int>> support;
    for (int q = 0; q < ntet; ++q)
      for (int tf : children[ptets[q]])
        for (const auto& pr : kPairs) {
          const int fe = edge_id(fine, fine.tets[tf][pr[0]], fine.tets[tf][pr[1]]);
          if (col_of[fe] >= 0) support[fe].push_back(tf);
        }

    for (const auto& [fe, sup] : support) {
      // Fine basis field of edge fe, per containing tet.
      const auto u_at = [&](int tf, Vec3 x) {
        for (int k = 0; k < 6; ++k)
          if (edge_id(fine, fine.tets[tf][kPairs[k][0]], fine.tets[tf][kPairs[k][1]]) == fe)
            return edge_basis(fine, tf, k, x);
        throw std::runtime_error("oracle: edge not in tet");
      };
      const auto ucurl = [&](int tf) {
        for (int k = 0; k < 6; ++k)
          if (edge_id(fine, fine.tets[tf][kPairs[k][0]], fine.tets[tf][kPairs[k][1]]) == fe)
            return edge_curl(fine, tf, k);
        throw std::runtime_error("oracle: edge not in tet");
      };

      Complex mom(0, 0);
      for (int tf : sup) {
        const int q = slot(ptets, parent[tf]);
        const double vol = tet_vol(fine, tf);
        for (const auto& qp : q5) {
          const Vec3 x = point_in(fine, tf, qp.bary);
          const Vec3 u = u_at(tf, x);
          const auto zv = z1_at(q, x);
          mom += qp.weight * vol * (zv[0] * u[0] + zv[1] * u[1] + zv[2] * u[2]);
        }
      }
      Complex sm(0, 0);
      for (const auto& [y, sign] : {std::pair<int, double>{y2, 1.0}, {y1, -1.0}}) {
        if (cb.vertex[y]) continue;
        const Smoother& s = smoothers[y];
        std::vector<Complex> rhs(s.verts.size(), Complex(0, 0));
        for (int tf : sup) {
          const int tc = parent[tf];
          if (slot(s.tets, tc) < 0) continue;
          const double vol = tet_vol(fine, tf);
          const auto g = grads(coarse, tc);
          for (int a = 0; a < 4; ++a) {
            double mm = 0.0;
            for (const auto& qp : q5) {
              const Vec3 x = point_in(fine, tf, qp.bary);
              mm += qp.weight * dot(u_at(tf, x), g[a]);
            }
            rhs[slot(s.verts, coarse.tets[tc][a])] += vol * mm;
          }
        }
        sm += sign * apply_smoother(s, std::move(rhs));
      }
      const Complex p1u = inv_len * (mom + sm);

      // Curl- and gradient-moment data of u against the patch coarse space.
      std::vector<Complex> r1(np, Complex(0, 0)), r2(nmult, Complex(0, 0));
      for (int tf : sup) {
        const int tc = parent[tf];
        const double vol = tet_vol(fine, tf);
        const Vec3 cu = ucurl(tf);
        const auto g = grads(coarse, tc);
        std::array<int, 6> loc;
        for (int k = 0; k < 6; ++k)
          loc[k] = slot(pdofs, edge_id(coarse, coarse.tets[tc][kPairs[k][0]],
                                       coarse.tets[tc][kPairs[k][1]]));
        for (int k = 0; k < 6; ++k)
          if (loc[k] >= 0) r1[loc[k]] += vol * dot(edge_curl(coarse, tc, k), cu);
        for (int a = 0; a < 4; ++a) {
          double mm = 0.0;
          for (const auto& qp : q5) {
            const Vec3 x = point_in(fine, tf, qp.bary);
            mm += qp.weight * dot(u_at(tf, x), g[a]);
          }
          r2[mrow[slot(pd.pverts, coarse.tets[tc][a])]] += vol * mm;
        }
      }
      std::vector<Complex> wrhs(np + nk, Complex(0, 0));
      for (int i = 0; i < np; ++i) wrhs[i] = r1[i];
      for (int r = 0; r < nk; ++r) wrhs[np + r] = r2[keep[r]];
      std::vector<Complex> W = wlu.solve(std::move(wrhs));
      W.resize(np);

      const Complex v1 = p1u, v2 = W[pd_E] - p1_coarse(W);
      if (p1_out) p1_out->at(static_cast<int>(row), col_of[fe]) = v1;
      if (p2_out) p2_out->at(static_cast<int>(row), col_of[fe]) = v2;
      P.at(static_cast<int>(row), col_of[fe]) = v1 + v2;
    }
  }
  return P;
}

}  // namespace oracle
