#include "curllod/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <utility>

namespace curllod {

namespace {

// The 6 axis permutations in fixed lexicographic order; tet 6*c + k of cube c
// walks corner -> +e_{perm[k][0]} -> +e_{perm[k][1]} -> +e_{perm[k][2]}.
constexpr std::array<std::array<int, 3>, 6> kPerms = {
    {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

int perm_rank(const std::array<int, 3>& p) {
  for (int k = 0; k < 6; ++k)
    if (kPerms[k] == p) return k;
  return -1;
}

double det3(const Vec3& a, const Vec3& b, const Vec3& c) { return dot(a, cross(b, c)); }

}  // namespace

int Mesh::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  const std::array<int, 2> key{a, b};
  auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it == edges.end() || *it != key) return -1;
  return static_cast<int>(it - edges.begin());
}

int Mesh::find_face(int a, int b, int c) const {
  std::array<int, 3> key{a, b, c};
  std::sort(key.begin(), key.end());
  auto it = std::lower_bound(faces.begin(), faces.end(), key);
  if (it == faces.end() || *it != key) return -1;
  return static_cast<int>(it - faces.begin());
}

Vec3 Mesh::edge_midpoint(int e) const {
  const auto& E = edges[e];
  return 0.5 * (vertices[E[0]] + vertices[E[1]]);
}

double Mesh::edge_length(int e) const {
  const auto& E = edges[e];
  return norm(vertices[E[1]] - vertices[E[0]]);
}

Vec3 Mesh::edge_tangent(int e) const {
  const auto& E = edges[e];
  const Vec3 d = vertices[E[1]] - vertices[E[0]];
  return (1.0 / norm(d)) * d;
}

double Mesh::tet_volume(int t) const {
  const auto& T = tets[t];
  const Vec3 d1 = vertices[T[1]] - vertices[T[0]];
  const Vec3 d2 = vertices[T[2]] - vertices[T[0]];
  const Vec3 d3 = vertices[T[3]] - vertices[T[0]];
  return std::abs(det3(d1, d2, d3)) / 6.0;
}

std::array<Vec3, 4> Mesh::barycentric_gradients(int t) const {
  const auto& T = tets[t];
  const Vec3& p0 = vertices[T[0]];
  const Vec3 d1 = vertices[T[1]] - p0;
  const Vec3 d2 = vertices[T[2]] - p0;
  const Vec3 d3 = vertices[T[3]] - p0;
  const double d = det3(d1, d2, d3);  // signed; gradients come out consistent
  std::array<Vec3, 4> g;
  g[1] = (1.0 / d) * cross(d2, d3);
  g[2] = (1.0 / d) * cross(d3, d1);
  g[3] = (1.0 / d) * cross(d1, d2);
  g[0] = {-g[1][0] - g[2][0] - g[3][0], -g[1][1] - g[2][1] - g[3][1], -g[1][2] - g[2][2] - g[3][2]};
  return g;
}

double Mesh::face_area(int f) const {
  const auto& F = faces[f];
  const Vec3 u = vertices[F[1]] - vertices[F[0]];
  const Vec3 v = vertices[F[2]] - vertices[F[0]];
  return 0.5 * norm(cross(u, v));
}

Vec3 Mesh::face_normal(int f) const {
  const auto& F = faces[f];
  const Vec3 u = vertices[F[1]] - vertices[F[0]];
  const Vec3 v = vertices[F[2]] - vertices[F[0]];
  const Vec3 c = cross(u, v);
  return (1.0 / norm(c)) * c;
}

Mesh build_box_mesh(int n, const Box& box) {
  if (n < 1) throw MeshError("build_box_mesh: n must be >= 1, got " + std::to_string(n));

  Mesh mesh;
  mesh.n = n;
  mesh.box = box;

  const int np = n + 1;
  mesh.vertices.resize(static_cast<std::size_t>(np) * np * np);
  for (int iz = 0; iz < np; ++iz)
    for (int iy = 0; iy < np; ++iy)
      for (int ix = 0; ix < np; ++ix) {
        const int v = ix + np * (iy + np * iz);
        mesh.vertices[v] = {box.lo[0] + (box.hi[0] - box.lo[0]) * ix / n,
                            box.lo[1] + (box.hi[1] - box.lo[1]) * iy / n,
                            box.lo[2] + (box.hi[2] - box.lo[2]) * iz / n};
      }

  auto vid = [np](int ix, int iy, int iz) { return ix + np * (iy + np * iz); };

  mesh.tets.reserve(static_cast<std::size_t>(6) * n * n * n);
  for (int cz = 0; cz < n; ++cz)
    for (int cy = 0; cy < n; ++cy)
      for (int cx = 0; cx < n; ++cx)
        for (const auto& p : kPerms) {
          std::array<int, 3> c{cx, cy, cz};
          std::array<int, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[p[s]] += 1;
            tet[s + 1] = vid(c[0], c[1], c[2]);
          }
          // each step increases the linear vertex id, so the tuple is ascending
          mesh.tets.push_back(tet);
        }

  // Global edge and face tables, sorted lexicographically.
  std::vector<std::array<int, 2>> edges;
  edges.reserve(mesh.tets.size() * 6);
  std::vector<std::array<int, 3>> faces;
  faces.reserve(mesh.tets.size() * 4);
  for (const auto& T : mesh.tets) {
    for (const auto& le : kLocalEdges) edges.push_back({T[le[0]], T[le[1]]});
    for (const auto& lf : kLocalFaces) faces.push_back({T[lf[0]], T[lf[1]], T[lf[2]]});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::sort(faces.begin(), faces.end());
  faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
  mesh.edges = std::move(edges);
  mesh.faces = std::move(faces);

  // Incidence tables.
  const int nt = mesh.num_tets();
  mesh.tet_edges.resize(nt);
  mesh.tet_edge_signs.resize(nt);
  mesh.tet_faces.resize(nt);
  mesh.tet_face_signs.resize(nt);
  mesh.face_tets.assign(mesh.num_faces(), {-1, -1});
  for (int t = 0; t < nt; ++t) {
    const auto& T = mesh.tets[t];
    for (int k = 0; k < 6; ++k) {
      const int a = T[kLocalEdges[k][0]], b = T[kLocalEdges[k][1]];
      const int e = mesh.find_edge(a, b);
      mesh.tet_edges[t][k] = e;
      // ascending tuples make every local direction the global one
      mesh.tet_edge_signs[t][k] = static_cast<std::int8_t>(a < b ? 1 : -1);
    }
    for (int k = 0; k < 4; ++k) {
      const auto& lf = kLocalFaces[k];
      const int f = mesh.find_face(T[lf[0]], T[lf[1]], T[lf[2]]);
      mesh.tet_faces[t][k] = f;
      auto& inc = mesh.face_tets[f];
      (inc[0] < 0 ? inc[0] : inc[1]) = t;
      // outward normal vs global normal: outward points away from the
      // opposite vertex
      const Vec3 nf = mesh.face_normal(f);
      const Vec3 to_opp = mesh.vertices[T[k]] - mesh.vertices[mesh.faces[f][0]];
      mesh.tet_face_signs[t][k] = static_cast<std::int8_t>(dot(nf, to_opp) < 0 ? 1 : -1);
    }
  }

  // Boundary flags: a face is boundary iff it has one incident tet; edges and
  // vertices inherit from boundary faces.
  mesh.face_boundary.assign(mesh.num_faces(), 0);
  mesh.edge_boundary.assign(mesh.num_edges(), 0);
  mesh.vertex_boundary.assign(mesh.num_vertices(), 0);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face_tets[f][1] >= 0) continue;
    mesh.face_boundary[f] = 1;
    const auto& F = mesh.faces[f];
    for (int i = 0; i < 3; ++i) {
      mesh.vertex_boundary[F[i]] = 1;
      mesh.edge_boundary[mesh.find_edge(F[i], F[(i + 1) % 3])] = 1;
    }
  }

  // CSR vertex -> tets.
  mesh.vertex_tet_offset.assign(mesh.num_vertices() + 1, 0);
  for (const auto& T : mesh.tets)
    for (int v : T) ++mesh.vertex_tet_offset[v + 1];
  std::partial_sum(mesh.vertex_tet_offset.begin(), mesh.vertex_tet_offset.end(),
                   mesh.vertex_tet_offset.begin());
  mesh.vertex_tet_data.resize(mesh.vertex_tet_offset.back());
  std::vector<int> cursor(mesh.vertex_tet_offset.begin(), mesh.vertex_tet_offset.end() - 1);
  for (int t = 0; t < nt; ++t)
    for (int v : mesh.tets[t]) mesh.vertex_tet_data[cursor[v]++] = t;

  return mesh;
}

MeshHierarchy refine(const Mesh& mesh, int r) {
  if (r < 1) throw MeshError("refine: r must be >= 1, got " + std::to_string(r));
  if (mesh.n < 1) throw MeshError("refine: mesh lacks grid provenance");

  MeshHierarchy hier;
  hier.coarse = mesh;
  hier.r = r;
  const int nf = mesh.n << r;
  hier.fine = build_box_mesh(nf, mesh.box);

  // Red refinement of a Kuhn tet yields the Kuhn tets of the halved grid that
  // lie inside it, so parenthood is containment. The fine tet barycenter, in
  // coarse-cube-local coordinates scaled by 4*2^r, is the integer vector
  // 4*offset + placed(3,2,1); sorting it descending identifies the coarse
  // permutation. Components are distinct mod 4, so the order is strict.
  const int scale = 1 << r;
  hier.parent.resize(hier.fine.num_tets());
  hier.children.assign(mesh.num_tets(), {});
  for (int tf = 0; tf < hier.fine.num_tets(); ++tf) {
    const int cube = tf / 6;
    const auto& perm = kPerms[tf % 6];
    const int fx = cube % nf, fy = (cube / nf) % nf, fz = cube / (nf * nf);
    const std::array<int, 3> fc{fx, fy, fz};
    std::array<long, 3> w;
    for (int a = 0; a < 3; ++a) w[a] = 4L * (fc[a] & (scale - 1));
    w[perm[0]] += 3;
    w[perm[1]] += 2;
    w[perm[2]] += 1;
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return w[a] > w[b]; });
    const int coarse_cube = (fx >> r) + mesh.n * ((fy >> r) + mesh.n * (fz >> r));
    const int tc = 6 * coarse_cube + perm_rank(order);
    hier.parent[tf] = tc;
    hier.children[tc].push_back(tf);
  }
  return hier;
}

namespace {

Patch classify_patch(const Mesh& mesh, std::vector<int> tets, int m) {
  std::sort(tets.begin(), tets.end());
  tets.erase(std::unique(tets.begin(), tets.end()), tets.end());

  Patch p;
  p.tets = std::move(tets);
  p.m = m;

  std::vector<std::uint8_t> in_patch(mesh.num_tets(), 0);
  for (int t : p.tets) in_patch[t] = 1;

  for (int t : p.tets) {
    const auto& T = mesh.tets[t];
    p.vertices.insert(p.vertices.end(), T.begin(), T.end());
    for (int e : mesh.tet_edges[t]) p.edges.push_back(e);
    for (int f : mesh.tet_faces[t]) p.faces.push_back(f);
  }
  for (auto* v : {&p.vertices, &p.edges, &p.faces}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }

  // Ring faces: not interior to the patch (second incident tet missing or
  // outside). Ring edges/vertices: those of ring faces.
  std::vector<std::uint8_t> vring(mesh.num_vertices(), 0), ering(mesh.num_edges(), 0);
  p.face_on_ring.assign(p.faces.size(), 0);
  for (std::size_t i = 0; i < p.faces.size(); ++i) {
    const int f = p.faces[i];
    const auto& inc = mesh.face_tets[f];
    const bool interior =
        inc[0] >= 0 && inc[1] >= 0 && in_patch[inc[0]] && in_patch[inc[1]];
    if (interior) continue;
    p.face_on_ring[i] = 1;
    const auto& F = mesh.faces[f];
    for (int j = 0; j < 3; ++j) {
      vring[F[j]] = 1;
      ering[mesh.find_edge(F[j], F[(j + 1) % 3])] = 1;
    }
  }
  p.vertex_on_ring.resize(p.vertices.size());
  for (std::size_t i = 0; i < p.vertices.size(); ++i) p.vertex_on_ring[i] = vring[p.vertices[i]];
  p.edge_on_ring.resize(p.edges.size());
  for (std::size_t i = 0; i < p.edges.size(); ++i) p.edge_on_ring[i] = ering[p.edges[i]];
  return p;
}

}  // namespace

Patch patch(const Mesh& mesh, const std::vector<int>& seed, int m) {
  if (seed.empty()) throw MeshError("patch: empty seed");
  if (m < 1) throw MeshError("patch: m must be >= 1, got " + std::to_string(m));

  std::vector<std::uint8_t> in(mesh.num_tets(), 0);
  std::vector<int> cur = seed;
  for (int t : cur) in[t] = 1;
  for (int round = 0; round < m; ++round) {
    std::vector<std::uint8_t> vseen(mesh.num_vertices(), 0);
    std::vector<int> next;
    for (int t : cur)
      for (int v : mesh.tets[t]) {
        if (vseen[v]) continue;
        vseen[v] = 1;
        auto [b, e] = mesh.tets_of_vertex(v);
        for (const int* it = b; it != e; ++it)
          if (!in[*it]) {
            in[*it] = 1;
            next.push_back(*it);
          }
      }
    if (next.empty()) break;  // saturated
    cur = std::move(next);
  }
  std::vector<int> all;
  for (int t = 0; t < mesh.num_tets(); ++t)
    if (in[t]) all.push_back(t);
  return classify_patch(mesh, std::move(all), m);
}

Patch vertex_patch(const Mesh& mesh, int y) {
  auto [b, e] = mesh.tets_of_vertex(y);
  return classify_patch(mesh, std::vector<int>(b, e), 0);
}

Patch patch_from_tets(const Mesh& mesh, std::vector<int> tets) {
  return classify_patch(mesh, std::move(tets), 0);
}

Patch extended_edge_patch(const Mesh& mesh, int E) {
  const auto& ed = mesh.edges[E];
  auto [b1, e1] = mesh.tets_of_vertex(ed[0]);
  auto [b2, e2] = mesh.tets_of_vertex(ed[1]);
  std::vector<int> tets(b1, e1);
  tets.insert(tets.end(), b2, e2);
  return classify_patch(mesh, std::move(tets), 0);
}

std::string check_conformity(const Mesh& mesh) {
  std::ostringstream err;

  // Exact tile: volumes sum to the box volume.
  double vol = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t) vol += mesh.tet_volume(t);
  const Vec3 ext = mesh.box.hi - mesh.box.lo;
  const double box_vol = ext[0] * ext[1] * ext[2];
  if (std::abs(vol - box_vol) > 1e-12 * box_vol) {
    err << "tet volumes sum to " << vol << ", box volume is " << box_vol;
    return err.str();
  }

  // Duplicate tets.
  auto sorted_tets = mesh.tets;
  std::sort(sorted_tets.begin(), sorted_tets.end());
  if (std::adjacent_find(sorted_tets.begin(), sorted_tets.end()) != sorted_tets.end())
    return "duplicate tets present";

  // Face incidence and boundary consistency.
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const auto& inc = mesh.face_tets[f];
    const bool is_bnd = inc[1] < 0;
    if (static_cast<bool>(mesh.face_boundary[f]) != is_bnd) {
      err << "face " << f << " boundary flag inconsistent with incidence";
      return err.str();
    }
    if (is_bnd) {
      // all three vertices on a common box facet
      const auto& F = mesh.faces[f];
      bool on_facet = false;
      for (int a = 0; a < 3 && !on_facet; ++a)
        for (double plane : {mesh.box.lo[a], mesh.box.hi[a]}) {
          bool all = true;
          for (int v : F) all = all && std::abs(mesh.vertices[v][a] - plane) < 1e-12;
          on_facet = on_facet || all;
        }
      if (!on_facet) {
        err << "single-incidence face " << f << " not on the box surface (hole or overlap)";
        return err.str();
      }
    } else {
      // interior face: the two opposite vertices must lie strictly on
      // opposite sides of the face plane
      const Vec3 nf = mesh.face_normal(f);
      const Vec3& p = mesh.vertices[mesh.faces[f][0]];
      double side[2];
      for (int s = 0; s < 2; ++s) {
        const int t = inc[s];
        int opp = -1;
        for (int k = 0; k < 4; ++k)
          if (mesh.tet_faces[t][k] == f) opp = mesh.tets[t][k];
        side[s] = dot(nf, mesh.vertices[opp] - p);
      }
      if (!(side[0] * side[1] < 0)) {
        err << "tets " << inc[0] << " and " << inc[1] << " lie on the same side of shared face "
            << f;
        return err.str();
      }
    }
  }

  // Hanging nodes / overlaps: any mesh vertex inside the closure of a tet
  // must be one of its vertices. Candidate tets found by walking tets of the
  // vertices of each tet's cube-neighborhood via shared-vertex adjacency is
  // not sufficient for corrupted meshes, so use a bounding-box bucket grid.
  {
    const int nb = std::max(1, mesh.n);
    const Vec3 inv{nb / ext[0], nb / ext[1], nb / ext[2]};
    auto clampi = [nb](int i) { return std::max(0, std::min(nb - 1, i)); };
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nb) * nb * nb);
    for (int t = 0; t < mesh.num_tets(); ++t) {
      Vec3 lo = mesh.vertices[mesh.tets[t][0]], hi = lo;
      for (int k = 1; k < 4; ++k)
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], mesh.vertices[mesh.tets[t][k]][a]);
          hi[a] = std::max(hi[a], mesh.vertices[mesh.tets[t][k]][a]);
        }
      int i0[3], i1[3];
      for (int a = 0; a < 3; ++a) {
        i0[a] = clampi(static_cast<int>((lo[a] - mesh.box.lo[a]) * inv[a] - 0.5));
        i1[a] = clampi(static_cast<int>((hi[a] - mesh.box.lo[a]) * inv[a] + 0.5));
      }
      for (int iz = i0[2]; iz <= i1[2]; ++iz)
        for (int iy = i0[1]; iy <= i1[1]; ++iy)
          for (int ix = i0[0]; ix <= i1[0]; ++ix)
            buckets[ix + nb * (iy + static_cast<std::size_t>(nb) * iz)].push_back(t);
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const Vec3& x = mesh.vertices[v];
      const int ix = clampi(static_cast<int>((x[0] - mesh.box.lo[0]) * inv[0]));
      const int iy = clampi(static_cast<int>((x[1] - mesh.box.lo[1]) * inv[1]));
      const int iz = clampi(static_cast<int>((x[2] - mesh.box.lo[2]) * inv[2]));
      for (int t : buckets[ix + nb * (iy + static_cast<std::size_t>(nb) * iz)]) {
        const auto& T = mesh.tets[t];
        if (v == T[0] || v == T[1] || v == T[2] || v == T[3]) continue;
        const auto g = mesh.barycentric_gradients(t);
        const Vec3& p0 = mesh.vertices[T[0]];
        bool inside = true;
        for (int k = 0; k < 4 && inside; ++k) {
          double lam = dot(g[k], x - p0) + (k == 0 ? 1.0 : 0.0);
          inside = lam > 1e-10;
        }
        if (inside) {
          err << "vertex " << v << " lies strictly inside foreign tet " << t;
          return err.str();
        }
      }
    }
  }

  // Euler relation for a ball.
  const long euler = static_cast<long>(mesh.num_vertices()) - mesh.num_edges() +
                     mesh.num_faces() - mesh.num_tets();
  if (euler != 1) {
    err << "Euler characteristic V-E+F-C = " << euler << ", expected 1";
    return err.str();
  }
  return {};
}

std::string check_orientation(const Mesh& mesh) {
  std::ostringstream err;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& T = mesh.tets[t];
    for (int k = 0; k < 6; ++k) {
      const int a = T[kLocalEdges[k][0]], b = T[kLocalEdges[k][1]];
      const int e = mesh.find_edge(a, b);
      if (e != mesh.tet_edges[t][k]) {
        err << "tet " << t << " local edge " << k << " index mismatch";
        return err.str();
      }
      const Vec3 d = mesh.vertices[b] - mesh.vertices[a];
      const int sign = dot(mesh.edge_tangent(e), d) > 0 ? 1 : -1;
      if (sign != mesh.tet_edge_signs[t][k]) {
        err << "tet " << t << " local edge " << k << " (edge " << e
            << ") stored sign disagrees with coordinates";
        return err.str();
      }
    }
    for (int k = 0; k < 4; ++k) {
      const int f = mesh.tet_faces[t][k];
      const Vec3 nf = mesh.face_normal(f);
      const Vec3 to_opp = mesh.vertices[T[k]] - mesh.vertices[mesh.faces[f][0]];
      const int sign = dot(nf, to_opp) < 0 ? 1 : -1;
      if (sign != mesh.tet_face_signs[t][k]) {
        err << "tet " << t << " local face " << k << " (face " << f
            << ") stored sign disagrees with coordinates";
        return err.str();
      }
    }
  }
  return {};
}

void dump_mesh(const Mesh& mesh, std::ostream& os) {
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v[0], v[1], v[2]);
    os << buf;
  }
  for (const auto& t : mesh.tets) {
    std::snprintf(buf, sizeof buf, "t %d %d %d %d\n", t[0], t[1], t[2], t[3]);
    os << buf;
  }
}

}  // namespace curllod
