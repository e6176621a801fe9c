#include "curllod/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "curllod/falk_winther.hpp"

namespace curllod {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

struct KeyCtx {
  const std::string& origin;
  int line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "': " + what);
  }
};

double to_double(const KeyCtx& ctx, const std::string& w) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(w, &used);
  } catch (const std::exception&) {
    ctx.fail("'" + w + "' is not a number");
  }
  if (used != w.size()) ctx.fail("'" + w + "' is not a number");
  return v;
}

long long to_ll(const KeyCtx& ctx, const std::string& w) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(w, &used);
  } catch (const std::exception&) {
    ctx.fail("'" + w + "' is not an integer");
  }
  if (used != w.size()) ctx.fail("'" + w + "' is not an integer");
  return v;
}

std::uint64_t to_u64(const KeyCtx& ctx, const std::string& w) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(w, &used);
  } catch (const std::exception&) {
    ctx.fail("'" + w + "' is not an unsigned integer");
  }
  if (used != w.size()) ctx.fail("'" + w + "' is not an unsigned integer");
  return v;
}

std::vector<std::string> exactly(const KeyCtx& ctx, const std::string& value, std::size_t count) {
  auto w = words(value);
  if (w.size() != count)
    ctx.fail("expected " + std::to_string(count) + " value(s), got " + std::to_string(w.size()));
  return w;
}

std::string fmt(const char* f, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string out_path(const Scenario& sc, const char* cmd) {
  return sc.out.empty() ? std::string(cmd) + ".csv" : sc.out;
}

void write_rows(const Scenario& sc, const char* cmd, std::vector<StudyRow> rows,
                std::ostream& log) {
  if (!sc.emit_seconds)
    for (auto& row : rows) row.seconds = 0.0;
  const std::string path = out_path(sc, cmd);
  std::ofstream os(path);
  if (!os) throw Error(std::string(cmd) + ": cannot open output path " + path);
  write_csv(rows, os);
  if (!os.flush()) throw Error(std::string(cmd) + ": write failed on " + path);
  log << cmd << ": " << rows.size() << " row(s) -> " << path << "\n";
}

void maybe_dump_projection(const Scenario& sc, const ProjectionMatrix& pm, std::ostream& log) {
  if (sc.dump_projection.empty()) return;
  std::ofstream os(sc.dump_projection);
  if (!os) throw Error("cannot open projection dump path " + sc.dump_projection);
  dump_projection(pm.P, os);
  log << "projection matrix -> " << sc.dump_projection << "\n";
}

double spacing(const Mesh& mesh) { return (mesh.box.hi[0] - mesh.box.lo[0]) / mesh.n; }

}  // namespace

Scenario parse_config(std::istream& in, const std::string& origin) {
  Scenario sc;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty() || (line.front() == '[' && line.back() == ']')) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyCtx ctx{origin, lineno, key};
    if (key.empty()) ctx.fail("empty key");

    if (key == "name") {
      if (value.empty()) ctx.fail("empty value");
      sc.name = value;
    } else if (key == "n") {
      sc.n = static_cast<int>(to_ll(ctx, value));
      if (sc.n < 1) ctx.fail("must be >= 1");
    } else if (key == "r") {
      sc.r = static_cast<int>(to_ll(ctx, value));
      if (sc.r < 1) ctx.fail("must be >= 1");
    } else if (key == "m") {
      if (value == "auto") {
        sc.m = -1;
      } else {
        sc.m = static_cast<int>(to_ll(ctx, value));
        if (sc.m < 0) ctx.fail("must be 'auto' or >= 0");
      }
    } else if (key == "threads") {
      sc.threads = static_cast<int>(to_ll(ctx, value));
      if (sc.threads < 1) ctx.fail("must be >= 1");
    } else if (key == "coefficient") {
      if (value != "constant" && value != "checkerboard" && value != "random_checkerboard")
        ctx.fail("unknown kind '" + value +
                 "' (constant | checkerboard | random_checkerboard)");
      sc.coefficient = value;
    } else if (key == "mu") {
      sc.mu = to_double(ctx, value);
      if (!(sc.mu > 0)) ctx.fail("must be > 0");
    } else if (key == "mu_range") {
      const auto w = exactly(ctx, value, 2);
      sc.mu_lo = to_double(ctx, w[0]);
      sc.mu_hi = to_double(ctx, w[1]);
      if (!(sc.mu_lo > 0) || sc.mu_hi < sc.mu_lo) ctx.fail("need 0 < lo <= hi");
    } else if (key == "mu_values") {
      const auto w = exactly(ctx, value, 2);
      sc.mu_v0 = to_double(ctx, w[0]);
      sc.mu_v1 = to_double(ctx, w[1]);
      if (!(sc.mu_v0 > 0) || !(sc.mu_v1 > 0)) ctx.fail("both values must be > 0");
    } else if (key == "delta") {
      sc.delta = to_double(ctx, value);
      if (!(sc.delta > 0)) ctx.fail("must be > 0");
    } else if (key == "seed") {
      sc.seed = to_u64(ctx, value);
    } else if (key == "kappa") {
      const auto w = words(value);
      if (w.empty() || w.size() > 2) ctx.fail("expected one or two numbers");
      sc.kappa = Complex(to_double(ctx, w[0]), w.size() == 2 ? to_double(ctx, w[1]) : 0.0);
      if (std::abs(sc.kappa) == 0.0) ctx.fail("must be nonzero");
      if (sc.kappa.imag() == 0.0 && sc.kappa.real() <= 0.0)
        ctx.fail("a real kappa must be positive");
    } else if (key == "f") {
      const auto w = exactly(ctx, value, 3);
      for (int d = 0; d < 3; ++d) sc.f_const[d] = to_double(ctx, w[d]);
    } else if (key == "f_linear") {
      const auto w = exactly(ctx, value, 9);
      for (int d = 0; d < 9; ++d) sc.f_linear[d] = to_double(ctx, w[d]);
    } else if (key == "n_list") {
      const auto w = words(value);
      if (w.empty()) ctx.fail("expected at least one resolution");
      sc.n_list.clear();
      for (const auto& x : w) {
        const int n = static_cast<int>(to_ll(ctx, x));
        if (n < 1) ctx.fail("resolutions must be >= 1");
        sc.n_list.push_back(n);
      }
    } else if (key == "n_fine") {
      sc.n_fine = static_cast<int>(to_ll(ctx, value));
      if (sc.n_fine < 2) ctx.fail("must be >= 2");
    } else if (key == "m_list") {
      const auto w = words(value);
      if (w.empty()) ctx.fail("expected at least one m");
      sc.m_list.clear();
      for (const auto& x : w) {
        const int m = static_cast<int>(to_ll(ctx, x));
        if (m < 0) ctx.fail("m values must be >= 0");
        sc.m_list.push_back(m);
      }
      if (!std::is_sorted(sc.m_list.begin(), sc.m_list.end()) ||
          std::adjacent_find(sc.m_list.begin(), sc.m_list.end()) != sc.m_list.end())
        ctx.fail("m values must be strictly increasing");
    } else if (key == "out") {
      sc.out = value;
    } else if (key == "emit_seconds") {
      if (value == "0" || value == "false")
        sc.emit_seconds = false;
      else if (value == "1" || value == "true")
        sc.emit_seconds = true;
      else
        ctx.fail("expected 0 or 1");
    } else {
      ctx.fail("unknown key");
    }
  }
  return sc;
}

Scenario load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  return parse_config(in, path);
}

Coefficient make_coefficient(const Scenario& sc, const Mesh& fine) {
  if (sc.coefficient == "constant") return coefficient_constant(fine, sc.mu, sc.kappa);
  if (sc.coefficient == "checkerboard") {
    const double delta = sc.delta > 0 ? sc.delta : spacing(fine);
    return coefficient_checkerboard(fine, delta, sc.mu_v0, sc.mu_v1, sc.kappa);
  }
  return coefficient_random_checkerboard(fine, sc.mu_lo, sc.mu_hi, sc.seed, sc.kappa);
}

SourceField make_source(const Scenario& sc) {
  const auto c = sc.f_const;
  const auto L = sc.f_linear;
  const bool linear = std::any_of(L.begin(), L.end(), [](double v) { return v != 0.0; });
  if (!linear)
    return [c](const Vec3&) { return Vec3{c[0], c[1], c[2]}; };
  return [c, L](const Vec3& x) {
    Vec3 out{c[0], c[1], c[2]};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out[i] += L[3 * i + j] * x[j];
    return out;
  };
}

int pick_m(const Scenario& sc, double H) { return sc.m >= 0 ? sc.m : default_localization(H); }

int cmd_check(const Scenario& sc, std::ostream& log, const CheckOptions& opts) {
  bool all_ok = true;
  const auto report = [&](const char* name, bool ok, const std::string& detail) {
    log << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) log << ": " << detail;
    log << '\n';
    all_ok = all_ok && ok;
  };

  const MeshHierarchy hier = refine(build_box_mesh(sc.n), sc.r);
  {
    std::string d = check_conformity(hier.coarse);
    if (d.empty()) d = check_conformity(hier.fine);
    report("mesh conformity", d.empty(), d);
  }
  {
    Mesh probe = hier.fine;
    if (opts.inject_orientation_fault) probe.tet_edge_signs[0][0] = -probe.tet_edge_signs[0][0];
    std::string d = check_orientation(hier.coarse);
    if (d.empty()) d = check_orientation(probe);
    report("orientation signs", d.empty(), d);
  }

  const DofMap rows = dofmap_global(hier.coarse, Space::Nedelec, Ring::Domain);
  const DofMap cols = dofmap_global(hier.fine, Space::Nedelec, Ring::Domain);
  const DofMap p1 = dofmap_global(hier.fine, Space::P1, Ring::Domain);
  const SparseOperator G = assemble_gradient(hier.fine, p1, cols);

  std::vector<VecC> grads;
  for (int trial = 0; trial < 10; ++trial) {
    VecC theta(p1.num_dofs());
    for (int j = 0; j < p1.num_dofs(); ++j)
      theta[j] = seeded_uniform(sc.seed + trial, static_cast<std::uint64_t>(j)) - 0.5;
    grads.push_back(G * theta);
  }
  {
    double worst = 0.0;
    for (const auto& g : grads) {
      // seminorm_curl cancels linearly per element; the quadratic form floors
      // near 1e-8 relative and cannot certify a 1e-10 gate.
      const double energy = seminorm_curl(hier.fine, cols, g);
      const double scale = norm_hcurl(hier.fine, cols, g);
      worst = std::max(worst, scale > 0 ? energy / scale : energy);
    }
    report("discrete gradients are curl-free", worst <= 1e-10,
           "relative curl energy " + fmt("%.3e", worst));
  }

  bool have_p = false;
  ProjectionMatrix pm;
  try {
    pm = projection(hier, sc.threads);
    have_p = true;
  } catch (const Error& e) {
    report("projection build", false, e.what());
  }
  if (!have_p) return 1;
  maybe_dump_projection(sc, pm, log);

  {
    const SparseOperator prol = prolongate(hier, rows, cols);
    const Eigen::MatrixXcd prod = Eigen::MatrixXcd(pm.P * prol);
    double dev = 0.0;
    for (int i = 0; i < prod.rows(); ++i)
      for (int j = 0; j < prod.cols(); ++j)
        dev = std::max(dev, std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)));
    report("projection identity on the coarse space", dev <= 1e-8,
           "max |P Prol - I| = " + fmt("%.3e", dev));
  }
  {
    double worst = 0.0;
    for (const auto& g : grads) {
      const VecC w = pm.P * g;
      const double energy = seminorm_curl(hier.coarse, rows, w);
      const double scale = norm_hcurl(hier.fine, cols, g);
      worst = std::max(worst, scale > 0 ? energy / scale : energy);
    }
    report("projection commutes on gradients", worst <= 1e-8,
           "relative curl energy " + fmt("%.3e", worst));
  }
  {
    const Eigen::SparseMatrix<Complex, Eigen::RowMajor> by_row(pm.P);
    bool ok = true;
    for (int i = 0; i < by_row.rows() && ok; ++i) {
      std::vector<int> allowed;
      for (int tc : pm.patch_tets[i])
        for (int tf : hier.children[tc])
          for (int k = 0; k < 6; ++k) allowed.push_back(hier.fine.tet_edges[tf][k]);
      std::sort(allowed.begin(), allowed.end());
      for (Eigen::SparseMatrix<Complex, Eigen::RowMajor>::InnerIterator it(by_row, i); it; ++it) {
        if (it.value() == Complex(0, 0)) continue;
        const int edge = cols.entities[it.col()];
        if (!std::binary_search(allowed.begin(), allowed.end(), edge)) ok = false;
      }
    }
    report("projection locality", ok, ok ? "" : "entry outside its edge patch");
  }
  {
    const Coefficient coeff = make_coefficient(sc, hier.fine);
    const int m = pick_m(sc, spacing(hier.coarse));
    double worst_kernel = 0.0;
    bool support_ok = true;
    for (int T = 0; T < hier.coarse.num_tets(); ++T) {
      std::vector<int> allowed;
      for (int tc : patch(hier.coarse, {T}, m).tets)
        for (int tf : hier.children[tc])
          for (int k = 0; k < 6; ++k) allowed.push_back(hier.fine.tet_edges[tf][k]);
      std::sort(allowed.begin(), allowed.end());
      for (int k = 0; k < 6; ++k) {
        const int E = hier.coarse.tet_edges[T][k];
        if (rows.index[E] < 0) continue;
        const ElementCorrector ec = element_corrector(hier, coeff, pm, T, E, m);
        VecC col = VecC::Zero(cols.num_dofs());
        for (const auto& [dof, v] : ec.values) {
          col[dof] = v;
          if (!std::binary_search(allowed.begin(), allowed.end(), cols.entities[dof]))
            support_ok = false;
        }
        const VecC res = pm.P * col;
        const double scale = std::max(1.0, col.cwiseAbs().maxCoeff());
        if (res.size())
          worst_kernel = std::max(worst_kernel, res.cwiseAbs().maxCoeff() / scale);
      }
    }
    report("corrector kernel property", worst_kernel <= 1e-8,
           "max |P k|/|k| = " + fmt("%.3e", worst_kernel));
    report("corrector support", support_ok,
           support_ok ? "" : "corrector value outside its element patch");
  }
  return all_ok ? 0 : 1;
}

int cmd_solve(const Scenario& sc, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const MeshHierarchy hier = refine(build_box_mesh(sc.n), sc.r);
  const Coefficient coeff = make_coefficient(sc, hier.fine);
  const SourceField f = make_source(sc);
  const int m = pick_m(sc, spacing(hier.coarse));

  const ProjectionMatrix pm = projection(hier, sc.threads);
  maybe_dump_projection(sc, pm, log);
  const CorrectorBasis basis = corrector_basis(hier, coeff, pm, m, {});
  const MultiscaleSolution ms = solve_multiscale_with(hier, coeff, f, pm, basis);
  const VecC u_h = solve_reference(hier, coeff, f);

  const DofMap cols = dofmap_global(hier.fine, Space::Nedelec, Ring::Domain);
  const DofMap rows = dofmap_global(hier.coarse, Space::Nedelec, Ring::Domain);
  const SparseOperator prol = prolongate(hier, rows, cols);

  StudyRow row;
  row.scenario = sc.name;
  row.H = ms.H;
  row.h = ms.h;
  row.m = m;
  row.err_hcurl = norm_hcurl(hier.fine, cols, u_h - ms.u_ms);
  row.err_hdivdual = RieszDualNorm(hier.fine).norm(u_h - prol * ms.u_H);
  row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << "solve: scenario=" << sc.name << " H=" << fmt("%g", row.H) << " h=" << fmt("%g", row.h)
      << " m=" << m << " err_hcurl=" << fmt("%.6e", row.err_hcurl)
      << " err_hdivdual=" << fmt("%.6e", row.err_hdivdual) << "\n";
  write_rows(sc, "solve", {row}, log);
  return 0;
}

int cmd_convergence(const Scenario& sc, std::ostream& log) {
  ConvergenceRequest req;
  req.scenario = sc.name;
  req.n_fine = sc.n_fine;
  req.n_coarse = sc.n_list;
  req.coefficient = [&sc](const Mesh& fine) { return make_coefficient(sc, fine); };
  req.f = make_source(sc);
  req.m = sc.m;
  req.threads = sc.threads;
  const std::vector<StudyRow> rows = convergence_study(req);

  std::ostringstream orders;
  for (const auto& row : rows)
    if (!std::isnan(row.order_hcurl)) orders << ' ' << fmt("%.3f", row.order_hcurl);
  log << "convergence: scenario=" << sc.name << " orders_hcurl:" << orders.str() << "\n";
  write_rows(sc, "convergence", rows, log);

  if (!sc.dump_projection.empty()) {
    int r = 0, k = sc.n_list.front();
    while (k < sc.n_fine) k *= 2, ++r;
    const MeshHierarchy hier = refine(build_box_mesh(sc.n_list.front()), r);
    maybe_dump_projection(sc, projection(hier, sc.threads), log);
  }
  return 0;
}

int cmd_decay(const Scenario& sc, std::ostream& log) {
  const MeshHierarchy hier = refine(build_box_mesh(sc.n), sc.r);
  const Coefficient coeff = make_coefficient(sc, hier.fine);
  const SourceField f = make_source(sc);
  const DecayStudy ds = decay_study(hier, coeff, f, sc.m_list, sc.threads);

  std::vector<StudyRow> rows;
  for (const auto& dr : ds.rows) {
    StudyRow row;
    row.scenario = sc.name;
    row.H = spacing(hier.coarse);
    row.h = spacing(hier.fine);
    row.m = dr.m;
    row.err_hcurl = dr.e;
    rows.push_back(std::move(row));
  }
  log << "decay: scenario=" << sc.name << " fitted ratio="
      << (std::isnan(ds.fitted_ratio) ? std::string("n/a") : fmt("%.4f", ds.fitted_ratio))
      << "\n";
  write_rows(sc, "decay", rows, log);

  if (!sc.dump_projection.empty())
    maybe_dump_projection(sc, projection(hier, sc.threads), log);
  return 0;
}

}  // namespace curllod
