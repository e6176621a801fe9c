#include "curllod/analysis.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "curllod/falk_winther.hpp"

namespace curllod {

namespace {

std::vector<int> all_tets(const Mesh& mesh) {
  std::vector<int> v(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) v[t] = t;
  return v;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_cell(std::ostream& os, double v, const char* fmt) {
  if (std::isnan(v)) return;  // empty cell
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  os << buf;
}

}  // namespace

double norm_hcurl(const Mesh& mesh, const DofMap& dofs_n, const VecC& v,
                  const std::vector<int>* region) {
  const auto& rule = quad_degree2();
  const std::vector<int> all = region ? std::vector<int>() : all_tets(mesh);
  const std::vector<int>& elems = region ? *region : all;
  double acc = 0.0;
  for (int t : elems) {
    const double vol = mesh.tet_volume(t);
    std::array<Complex, 6> c{};
    for (int k = 0; k < 6; ++k) {
      const int dof = dofs_n.index[mesh.tet_edges[t][k]];
      if (dof >= 0) c[k] = v[dof];
    }
    const auto curls = nedelec_curls(mesh, t);
    std::array<Complex, 3> cv{};
    for (int k = 0; k < 6; ++k)
      for (int d = 0; d < 3; ++d) cv[d] += c[k] * curls[k][d];
    for (int d = 0; d < 3; ++d) acc += vol * std::norm(cv[d]);
    for (const auto& qp : rule) {
      const auto psi = nedelec_at(mesh, t, tet_point(mesh, t, qp.bary));
      std::array<Complex, 3> val{};
      for (int k = 0; k < 6; ++k)
        for (int d = 0; d < 3; ++d) val[d] += c[k] * psi[k][d];
      const double w = qp.weight * vol;
      for (int d = 0; d < 3; ++d) acc += w * std::norm(val[d]);
    }
  }
  return std::sqrt(acc);
}

double seminorm_curl(const Mesh& mesh, const DofMap& dofs_n, const VecC& v,
                     const std::vector<int>* region) {
  const std::vector<int> all = region ? std::vector<int>() : all_tets(mesh);
  const std::vector<int>& elems = region ? *region : all;
  double acc = 0.0;
  for (int t : elems) {
    std::array<Complex, 6> c{};
    for (int k = 0; k < 6; ++k) {
      const int dof = dofs_n.index[mesh.tet_edges[t][k]];
      if (dof >= 0) c[k] = v[dof];
    }
    const auto curls = nedelec_curls(mesh, t);
    std::array<Complex, 3> cv{};
    for (int k = 0; k < 6; ++k)
      for (int d = 0; d < 3; ++d) cv[d] += c[k] * curls[k][d];
    const double vol = mesh.tet_volume(t);
    for (int d = 0; d < 3; ++d) acc += vol * std::norm(cv[d]);
  }
  return std::sqrt(acc);
}

RieszDualNorm::RieszDualNorm(const Mesh& fine)
    : A_([&] {
        const DofMap rt = dofmap_global(fine, Space::RaviartThomas, Ring::None);
        return SparseOperator(assemble_rt_mass(fine, rt) + assemble_rt_divdiv(fine, rt));
      }()),
      pairing_(assemble_rt_n_mass_pairing(
          fine, dofmap_global(fine, Space::RaviartThomas, Ring::None),
          dofmap_global(fine, Space::Nedelec, Ring::Domain))),
      fact_(A_, "dual norm Riesz system") {}

double RieszDualNorm::norm(const VecC& e) const {
  if (e.size() != pairing_.cols()) throw Error("dual norm: vector does not match the fine mesh");
  const VecC b = pairing_ * e;
  const VecC r = fact_.solve(b);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if ((A_ * r - b).norm() > 1e-10 * std::max(scale, b.norm()))
    throw SolverError("dual norm: Riesz solve residual out of contract");
  // |r|^2_H(div) = r^H A r = r^H b up to solver tolerance.
  return std::sqrt(std::abs(r.dot(b)));
}

double dual_norm_hdiv(const MeshHierarchy& hier, const VecC& e) {
  return RieszDualNorm(hier.fine).norm(e);
}

DecayStudy decay_study(const MeshHierarchy& hier, const Coefficient& coeff, const SourceField& f,
                       const std::vector<int>& m_list, int threads) {
  if (m_list.empty()) throw Error("decay study: empty m list");
  for (std::size_t i = 1; i < m_list.size(); ++i)
    if (m_list[i] <= m_list[i - 1]) throw Error("decay study: m list must be increasing");

  const ProjectionMatrix pm = projection(hier, threads);
  std::vector<VecC> solutions;
  solutions.reserve(m_list.size());
  for (int m : m_list) {
    const CorrectorBasis basis = corrector_basis(hier, coeff, pm, m, {});
    solutions.push_back(solve_multiscale_with(hier, coeff, f, pm, basis).u_ms);
  }

  const DofMap cols = dofmap_global(hier.fine, Space::Nedelec, Ring::Domain);
  DecayStudy study;
  for (std::size_t i = 0; i < m_list.size(); ++i)
    study.rows.push_back(
        {m_list[i], norm_hcurl(hier.fine, cols, solutions[i] - solutions.back())});

  // Least-squares slope of log e over the non-saturated rows.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i + 1 < study.rows.size(); ++i) {
    if (study.rows[i].e <= 0.0) continue;
    const double x = study.rows[i].m, y = std::log(study.rows[i].e);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n >= 2) {
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    study.fitted_ratio = std::exp(slope);
  }
  return study;
}

std::vector<StudyRow> convergence_study(const ConvergenceRequest& req) {
  if (req.n_coarse.empty()) throw Error("convergence study: empty resolution list");
  if (!req.coefficient || !req.f) throw Error("convergence study: coefficient and f required");
  std::vector<int> r_of(req.n_coarse.size());
  for (std::size_t i = 0; i < req.n_coarse.size(); ++i) {
    const int n = req.n_coarse[i];
    int r = 0, k = n;
    while (k < req.n_fine) k *= 2, ++r;
    if (n < 1 || k != req.n_fine || r < 1)
      throw Error("convergence study: coarse resolution " + std::to_string(n) +
                  " does not refine into " + std::to_string(req.n_fine) +
                  " by at least one halving");
    r_of[i] = r;
  }

  // All rows share one fine mesh (refinement rebuilds it at n * 2^r, which is
  // identical for every row), so the reference solve, the coefficient, and
  // the Riesz factorization are computed once.
  const MeshHierarchy hier0 = refine(build_box_mesh(req.n_coarse.front()), r_of.front());
  const Coefficient coeff = req.coefficient(hier0.fine);
  if (static_cast<int>(coeff.mu.size()) != hier0.fine.num_tets())
    throw Error("convergence study: coefficient was not generated on the fine mesh");
  const VecC u_h = solve_reference(hier0, coeff, req.f);
  const DofMap cols = dofmap_global(hier0.fine, Space::Nedelec, Ring::Domain);
  const RieszDualNorm dual(hier0.fine);

  std::vector<StudyRow> rows;
  for (std::size_t i = 0; i < req.n_coarse.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const MeshHierarchy hier = refine(build_box_mesh(req.n_coarse[i]), r_of[i]);
    StudyRow row;
    row.scenario = req.scenario;
    row.H = (hier.coarse.box.hi[0] - hier.coarse.box.lo[0]) / hier.coarse.n;
    row.h = (hier.fine.box.hi[0] - hier.fine.box.lo[0]) / hier.fine.n;
    row.m = req.m > 0 ? req.m : default_localization(row.H);

    const MultiscaleSolution ms =
        solve_multiscale(hier, coeff, req.f, row.m, req.threads, {});
    row.err_hcurl = norm_hcurl(hier.fine, cols, u_h - ms.u_ms);

    const DofMap crows = dofmap_global(hier.coarse, Space::Nedelec, Ring::Domain);
    const SparseOperator prol = prolongate(hier, crows, cols);
    row.err_hdivdual = dual.norm(u_h - prol * ms.u_H);
    row.seconds = seconds_since(t0);
    rows.push_back(std::move(row));
  }
  fill_orders(rows);
  return rows;
}

void fill_orders(std::vector<StudyRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i - 1].err_hcurl > 0.0 && rows[i].err_hcurl > 0.0)
      rows[i].order_hcurl = std::log2(rows[i - 1].err_hcurl / rows[i].err_hcurl);
    if (rows[i - 1].err_hdivdual > 0.0 && rows[i].err_hdivdual > 0.0)
      rows[i].order_hdivdual = std::log2(rows[i - 1].err_hdivdual / rows[i].err_hdivdual);
  }
}

void write_csv(const std::vector<StudyRow>& rows, std::ostream& os) {
  os << "scenario,H,h,m,err_hcurl,err_hdivdual,order_hcurl,order_hdivdual,seconds\n";
  for (const auto& row : rows) {
    os << row.scenario << ',';
    write_cell(os, row.H, "%.12e");
    os << ',';
    write_cell(os, row.h, "%.12e");
    os << ',' << row.m << ',';
    write_cell(os, row.err_hcurl, "%.12e");
    os << ',';
    write_cell(os, row.err_hdivdual, "%.12e");
    os << ',';
    write_cell(os, row.order_hcurl, "%.12e");
    os << ',';
    write_cell(os, row.order_hdivdual, "%.12e");
    os << ',';
    write_cell(os, row.seconds, "%.3f");
    os << '\n';
  }
}

}  // namespace curllod
