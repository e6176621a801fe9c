#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "curllod/common.hpp"

namespace curllod {

struct Box {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, 1.0};
};

/// Conforming tetrahedral mesh of an axis-aligned box (Kuhn triangulation:
/// each grid cube split into 6 tets sharing the same main diagonal).
///
/// Entity conventions, fixed globally:
///  - tets stored as ascending 4-tuples of vertex ids,
///  - edges as (y1, y2) with y1 < y2; unit tangent t_E = (y2 - y1)/|E|,
///  - faces as ascending 3-tuples; face normal by right-hand rule on the
///    sorted triple,
///  - edge and face lists sorted lexicographically, so global indices are
///    independent of discovery order.
struct Mesh {
  int n = 0;  // subdivisions per axis
  Box box;

  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> faces;

  std::vector<std::uint8_t> vertex_boundary;
  std::vector<std::uint8_t> edge_boundary;
  std::vector<std::uint8_t> face_boundary;

  /// Local edge k of a tet is the vertex pair kLocalEdges[k]; the stored sign
  /// is sign(t_E . local direction). With ascending tet tuples every local
  /// direction agrees with the global one, but signs are kept and validated.
  std::vector<std::array<int, 6>> tet_edges;
  std::vector<std::array<std::int8_t, 6>> tet_edge_signs;
  /// Local face k is opposite local vertex k; sign = outward normal vs the
  /// global face normal.
  std::vector<std::array<int, 4>> tet_faces;
  std::vector<std::array<std::int8_t, 4>> tet_face_signs;

  /// CSR vertex -> incident tets.
  std::vector<int> vertex_tet_offset;
  std::vector<int> vertex_tet_data;
  /// face -> incident tets (1 or 2; -1 when absent).
  std::vector<std::array<int, 2>> face_tets;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_tets() const { return static_cast<int>(tets.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }

  /// Incident tets of a vertex.
  std::pair<const int*, const int*> tets_of_vertex(int v) const {
    return {vertex_tet_data.data() + vertex_tet_offset[v],
            vertex_tet_data.data() + vertex_tet_offset[v + 1]};
  }

  /// Global edge index of vertex pair (a,b), any order; -1 if absent.
  int find_edge(int a, int b) const;
  /// Global face index of a vertex triple, any order; -1 if absent.
  int find_face(int a, int b, int c) const;

  Vec3 edge_midpoint(int e) const;
  double edge_length(int e) const;
  Vec3 edge_tangent(int e) const;  // unit, tail -> head
  double tet_volume(int t) const;
  /// Gradients of the four barycentric coordinates of tet t.
  std::array<Vec3, 4> barycentric_gradients(int t) const;
  double face_area(int f) const;
  Vec3 face_normal(int f) const;  // unit, right-hand rule on sorted triple
};

constexpr std::array<std::array<int, 2>, 6> kLocalEdges = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
constexpr std::array<std::array<int, 3>, 4> kLocalFaces = {
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

/// Two nested meshes with exact element containment.
struct MeshHierarchy {
  Mesh coarse;
  Mesh fine;
  int r = 0;  // h = H * 2^-r
  std::vector<int> parent;                 // fine tet -> coarse tet
  std::vector<std::vector<int>> children;  // coarse tet -> fine tets (ascending)
};

/// Element patch: a set of tets with entity classification relative to the
/// patch boundary. "Artificial boundary" = on the patch boundary but not on
/// the domain boundary; ringed spaces mask artificial and domain boundary
/// entities alike.
struct Patch {
  std::vector<int> tets;  // ascending, unique
  int m = 0;

  std::vector<int> vertices;  // ascending
  std::vector<int> edges;     // ascending
  std::vector<int> faces;     // ascending
  /// Parallel to the entity lists: 1 when on boundary(patch) or boundary(domain).
  std::vector<std::uint8_t> vertex_on_ring;
  std::vector<std::uint8_t> edge_on_ring;
  std::vector<std::uint8_t> face_on_ring;
};

/// Kuhn triangulation of the box with n subdivisions per axis. Throws
/// MeshError for n < 1.
Mesh build_box_mesh(int n, const Box& box = Box{});

/// r >= 1 levels of red (Bey) refinement; Kuhn meshes refine into Kuhn meshes
/// of the halved grid, so the fine mesh is built directly at resolution
/// n * 2^r and the parent map is recovered in exact integer arithmetic.
MeshHierarchy refine(const Mesh& mesh, int r);

/// N^m(seed): m-fold vertex-adjacency neighborhood of a tet set.
Patch patch(const Mesh& mesh, const std::vector<int>& seed, int m);

/// omega_y: all tets containing vertex y (as a Patch, m = 0).
Patch vertex_patch(const Mesh& mesh, int y);

/// omega_E^ext = omega_{y1} union omega_{y2} for edge E = (y1, y2).
Patch extended_edge_patch(const Mesh& mesh, int E);

/// Entity classification for an explicit tet set (m = 0).
Patch patch_from_tets(const Mesh& mesh, std::vector<int> tets);

/// Full-suite conformity check; returns an empty string on success, else a
/// diagnostic. Criteria: exact tile of the box (volume sum), every face
/// shared by <= 2 tets with boundary faces exactly the ones on the box
/// surface, no vertex interior to a foreign entity (hanging nodes), Euler
/// relation V - E + F - C = 1.
std::string check_conformity(const Mesh& mesh);

/// Validates stored orientation signs against recomputation from coordinates.
std::string check_orientation(const Mesh& mesh);

/// Plain-text dump: "v x y z" per vertex then "t i0 i1 i2 i3" per tet.
void dump_mesh(const Mesh& mesh, std::ostream& os);

}  // namespace curllod
