#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oracle.hpp"

namespace oracle {

namespace {

double dot(Vec3 a, Vec3 b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(Vec3 a, Vec3 b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 sub(Vec3 a, Vec3 b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

const std::array<std::array<int, 2>, 6> kPairs = {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
const std::array<std::array<int, 3>, 4> kTris = {{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

const std::vector<QPoint>& quad5() {
  static const std::vector<QPoint> rule = [] {
    // Degree 2s+1 with s = 2 on the 3-simplex: for each i in 0..s the points
    // have barycentric parts (2b + 1) / (d + 2s + 1 - 2i) over all
    // nonnegative integer 4-tuples b with |b| = s - i.
    constexpr int d = 3, s = 2;
    std::vector<QPoint> out;
    for (int i = 0; i <= s; ++i) {
      const double denom = d + 2 * s + 1 - 2 * i;
      double coeff = std::pow(2.0, -2 * s) * std::pow(denom, 2 * s + 1) /
                     (factorial(i) * factorial(d + 2 * s + 1 - i));
      if (i % 2 == 1) coeff = -coeff;
      const int rem = s - i;
      for (int b0 = 0; b0 <= rem; ++b0)
        for (int b1 = 0; b1 + b0 <= rem; ++b1)
          for (int b2 = 0; b2 + b1 + b0 <= rem; ++b2) {
            const int b3 = rem - b0 - b1 - b2;
            QPoint q;
            q.bary = {(2 * b0 + 1) / denom, (2 * b1 + 1) / denom, (2 * b2 + 1) / denom,
                      (2 * b3 + 1) / denom};
            // The raw weights sum to the reference simplex volume 1/d!.
            q.weight = coeff * factorial(d);
            out.push_back(q);
          }
    }
    return out;
  }();
  return rule;
}

Lu::Lu(Mat m) : m_(std::move(m)), piv_(m_.rows) {
  if (m_.rows != m_.cols) throw std::runtime_error("oracle lu: not square");
  const int n = m_.rows;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(m_.at(i, k)) > std::abs(m_.at(p, k))) p = i;
    piv_[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(m_.at(k, j), m_.at(p, j));
    if (m_.at(k, k) == Complex(0, 0)) throw std::runtime_error("oracle lu: zero pivot");
    for (int i = k + 1; i < n; ++i) {
      m_.at(i, k) /= m_.at(k, k);
      const Complex l = m_.at(i, k);
      for (int j = k + 1; j < n; ++j) m_.at(i, j) -= l * m_.at(k, j);
    }
  }
}

std::vector<Complex> Lu::solve(std::vector<Complex> b) const {
  const int n = m_.rows;
  if (static_cast<int>(b.size()) != n) throw std::runtime_error("oracle lu: size mismatch");
  // All row swaps first: the stored multipliers belong to the rows in their
  // final positions, so substitution must run on the fully permuted vector.
  for (int k = 0; k < n; ++k) std::swap(b[k], b[piv_[k]]);
  for (int k = 0; k < n; ++k)
    for (int i = k + 1; i < n; ++i) b[i] -= m_.at(i, k) * b[k];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) b[i] -= m_.at(i, j) * b[j];
    b[i] /= m_.at(i, i);
  }
  return b;
}

Boundary boundary_of(const Mesh& m) {
  std::vector<int> count(m.faces.size(), 0);
  for (const auto& tet : m.tets)
    for (const auto& tri : kTris) {
      std::array<int, 3> v = {tet[tri[0]], tet[tri[1]], tet[tri[2]]};
      std::sort(v.begin(), v.end());
      ++count[face_id(m, v[0], v[1], v[2])];
    }
  Boundary b;
  b.vertex.assign(m.vertices.size(), 0);
  b.edge.assign(m.edges.size(), 0);
  b.face.assign(m.faces.size(), 0);
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (count[f] != 1) continue;
    b.face[f] = 1;
    const auto& tri = m.faces[f];
    for (int v : tri) b.vertex[v] = 1;
    b.edge[edge_id(m, tri[0], tri[1])] = 1;
    b.edge[edge_id(m, tri[0], tri[2])] = 1;
    b.edge[edge_id(m, tri[1], tri[2])] = 1;
  }
  return b;
}

double tet_vol(const Mesh& m, int t) {
  const auto& v = m.tets[t];
  const Vec3 a = sub(m.vertices[v[1]], m.vertices[v[0]]);
  const Vec3 b = sub(m.vertices[v[2]], m.vertices[v[0]]);
  const Vec3 c = sub(m.vertices[v[3]], m.vertices[v[0]]);
  return std::abs(dot(a, cross(b, c))) / 6.0;
}

std::array<Vec3, 4> grads(const Mesh& m, int t) {
  // grad(lambda_k) is the inward normal of the opposite face scaled so the
  // affine function is 1 at vertex k: n / dot(n, v_k - v_opp).
  std::array<Vec3, 4> out;
  const auto& tet = m.tets[t];
  for (int k = 0; k < 4; ++k) {
    const auto& tri = kTris[k];
    const Vec3 p0 = m.vertices[tet[tri[0]]];
    const Vec3 n = cross(sub(m.vertices[tet[tri[1]]], p0), sub(m.vertices[tet[tri[2]]], p0));
    const double s = dot(n, sub(m.vertices[tet[k]], p0));
    out[k] = {n[0] / s, n[1] / s, n[2] / s};
  }
  return out;
}

std::array<double, 4> bary(const Mesh& m, int t, Vec3 x) {
  const auto g = grads(m, t);
  std::array<double, 4> out;
  for (int k = 0; k < 4; ++k) {
    const Vec3 d = sub(x, m.vertices[m.tets[t][k]]);
    out[k] = 1.0 + dot(g[k], d);
  }
  return out;
}

bool contains(const Mesh& m, int t, Vec3 x) {
  const auto l = bary(m, t, x);
  return *std::min_element(l.begin(), l.end()) >= -1e-12;
}

double edge_len(const Mesh& m, int e) {
  const Vec3 d = sub(m.vertices[m.edges[e][1]], m.vertices[m.edges[e][0]]);
  return std::sqrt(dot(d, d));
}

double face_area(const Mesh& m, int f) {
  const auto& tri = m.faces[f];
  const Vec3 n = cross(sub(m.vertices[tri[1]], m.vertices[tri[0]]),
                       sub(m.vertices[tri[2]], m.vertices[tri[0]]));
  return 0.5 * std::sqrt(dot(n, n));
}

Vec3 edge_basis(const Mesh& m, int t, int k, Vec3 x) {
  const auto l = bary(m, t, x);
  const auto g = grads(m, t);
  const int a = kPairs[k][0], b = kPairs[k][1];
  const double len = edge_len(m, edge_id(m, m.tets[t][a], m.tets[t][b]));
  return {len * (l[a] * g[b][0] - l[b] * g[a][0]), len * (l[a] * g[b][1] - l[b] * g[a][1]),
          len * (l[a] * g[b][2] - l[b] * g[a][2])};
}

Vec3 edge_curl(const Mesh& m, int t, int k) {
  const auto g = grads(m, t);
  const int a = kPairs[k][0], b = kPairs[k][1];
  const double len = edge_len(m, edge_id(m, m.tets[t][a], m.tets[t][b]));
  const Vec3 c = cross(g[a], g[b]);
  return {2.0 * len * c[0], 2.0 * len * c[1], 2.0 * len * c[2]};
}

namespace {

/// +1 when the global normal of the face opposite local vertex k (right-hand
/// rule on its sorted vertex triple) points out of tet t.
double face_orient(const Mesh& m, int t, int k) {
  const auto& tet = m.tets[t];
  const auto& tri = kTris[k];
  std::array<int, 3> v = {tet[tri[0]], tet[tri[1]], tet[tri[2]]};
  std::sort(v.begin(), v.end());
  const Vec3 n = cross(sub(m.vertices[v[1]], m.vertices[v[0]]),
                       sub(m.vertices[v[2]], m.vertices[v[0]]));
  // Outward from t means pointing away from the opposite vertex.
  return dot(n, sub(m.vertices[v[0]], m.vertices[tet[k]])) > 0.0 ? 1.0 : -1.0;
}

}  // namespace

Vec3 face_basis(const Mesh& m, int t, int k, Vec3 x) {
  const double s = face_orient(m, t, k) / (3.0 * tet_vol(m, t));
  const Vec3 d = sub(x, m.vertices[m.tets[t][k]]);
  return {s * d[0], s * d[1], s * d[2]};
}

double face_div(const Mesh& m, int t, int k) { return face_orient(m, t, k) / tet_vol(m, t); }

int edge_id(const Mesh& m, int a, int b) {
  const std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
  const auto it = std::lower_bound(m.edges.begin(), m.edges.end(), key);
  if (it == m.edges.end() || *it != key) throw std::runtime_error("oracle: edge not found");
  return static_cast<int>(it - m.edges.begin());
}

int face_id(const Mesh& m, int a, int b, int c) {
  std::array<int, 3> key = {a, b, c};
  std::sort(key.begin(), key.end());
  const auto it = std::lower_bound(m.faces.begin(), m.faces.end(), key);
  if (it == m.faces.end() || *it != key) throw std::runtime_error("oracle: face not found");
  return static_cast<int>(it - m.faces.begin());
}

std::vector<int> interior_edges(const Mesh& m, const Boundary& b) {
  std::vector<int> out;
  for (std::size_t e = 0; e < m.edges.size(); ++e)
    if (!b.edge[e]) out.push_back(static_cast<int>(e));
  return out;
}

std::vector<int> parents_of(const Mesh& coarse, const Mesh& fine) {
  std::vector<int> out(fine.tets.size(), -1);
  for (std::size_t tf = 0; tf < fine.tets.size(); ++tf) {
    Vec3 c = {0, 0, 0};
    for (int v : fine.tets[tf])
      for (int d = 0; d < 3; ++d) c[d] += 0.25 * fine.vertices[v][d];
    for (std::size_t tc = 0; tc < coarse.tets.size(); ++tc)
      if (contains(coarse, static_cast<int>(tc), c)) {
        out[tf] = static_cast<int>(tc);
        break;
      }
    if (out[tf] < 0) throw std::runtime_error("oracle: fine tet has no parent");
  }
  return out;
}

Mat dense_prolongation(const Mesh& coarse, const Mesh& fine) {
  const Boundary cb = boundary_of(coarse), fb = boundary_of(fine);
  const std::vector<int> rows = interior_edges(fine, fb);
  const std::vector<int> cols = interior_edges(coarse, cb);
  const std::vector<int> parent = parents_of(coarse, fine);

  std::vector<int> row_of(fine.edges.size(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_of[rows[i]] = static_cast<int>(i);
  std::vector<int> col_of(coarse.edges.size(), -1);
  for (std::size_t i = 0; i < cols.size(); ++i) col_of[cols[i]] = static_cast<int>(i);

  Mat P(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  std::vector<char> done(fine.edges.size(), 0);
  for (std::size_t tf = 0; tf < fine.tets.size(); ++tf) {
    const int tc = parent[tf];
    for (const auto& pr : kPairs) {
      const int va = fine.tets[tf][pr[0]], vb = fine.tets[tf][pr[1]];
      const int e = edge_id(fine, va, vb);
      if (done[e] || row_of[e] < 0) continue;
      done[e] = 1;
      // The tangential trace is continuous and affine along the edge, so the
      // mean equals the midpoint value; evaluate in any containing tet.
      Vec3 mid, tan;
      for (int d = 0; d < 3; ++d) {
        mid[d] = 0.5 * (fine.vertices[va][d] + fine.vertices[vb][d]);
        tan[d] = (fine.vertices[std::max(va, vb)][d] - fine.vertices[std::min(va, vb)][d]) /
                 edge_len(fine, e);
      }
      for (int k = 0; k < 6; ++k) {
        const int E = edge_id(coarse, coarse.tets[tc][kPairs[k][0]], coarse.tets[tc][kPairs[k][1]]);
        if (col_of[E] < 0) continue;
        const Vec3 psi = edge_basis(coarse, tc, k, mid);
        P.at(row_of[e], col_of[E]) = dot(psi, tan);
      }
    }
  }
  return P;
}

Mat dense_B(const Mesh& m, const std::vector<std::array<double, 9>>& mu,
            const std::vector<Complex>& kappa) {
  const Boundary b = boundary_of(m);
  const std::vector<int> dofs = interior_edges(m, b);
  std::vector<int> dof_of(m.edges.size(), -1);
  for (std::size_t i = 0; i < dofs.size(); ++i) dof_of[dofs[i]] = static_cast<int>(i);

  Mat B(static_cast<int>(dofs.size()), static_cast<int>(dofs.size()));
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const double vol = tet_vol(m, static_cast<int>(t));
    std::array<int, 6> loc;
    for (int k = 0; k < 6; ++k)
      loc[k] = dof_of[edge_id(m, m.tets[t][kPairs[k][0]], m.tets[t][kPairs[k][1]])];
    std::array<Vec3, 6> curls;
    for (int k = 0; k < 6; ++k) curls[k] = edge_curl(m, static_cast<int>(t), k);
    const auto& mt = mu[t];
    std::array<Vec3, 6> mcurl;
    for (int k = 0; k < 6; ++k)
      for (int d = 0; d < 3; ++d)
        mcurl[k][d] =
            mt[3 * d] * curls[k][0] + mt[3 * d + 1] * curls[k][1] + mt[3 * d + 2] * curls[k][2];
    for (int j = 0; j < 6; ++j) {
      if (loc[j] < 0) continue;
      for (int k = 0; k < 6; ++k) {
        if (loc[k] < 0) continue;
        double cc = 0.0, mm = 0.0;
        for (int d = 0; d < 3; ++d) cc += mcurl[k][d] * curls[j][d];
        for (const auto& qp : quad5()) {
          Vec3 x = {0, 0, 0};
          for (int a = 0; a < 4; ++a)
            for (int d = 0; d < 3; ++d) x[d] += qp.bary[a] * m.vertices[m.tets[t][a]][d];
          const Vec3 pk = edge_basis(m, static_cast<int>(t), k, x);
          const Vec3 pj = edge_basis(m, static_cast<int>(t), j, x);
          mm += qp.weight * dot(pk, pj);
        }
        B.at(loc[j], loc[k]) += vol * (cc + kappa[t] * mm);
      }
    }
  }
  return B;
}

}  // namespace oracle
