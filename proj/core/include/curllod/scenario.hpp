#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "curllod/analysis.hpp"

namespace curllod {

/// Full description of one experiment, as read from a config file. Seeds
/// make runs bit-reproducible; H = 1/n, h = H * 2^-r.
struct Scenario {
  std::string name = "default";
  int n = 2;        // coarse subdivisions per axis
  int r = 1;        // refinement levels
  int m = -1;       // localization layers; -1 = pick from H
  int threads = 1;

  // Coefficient: mu scalar per fine grid cube, kappa global.
  std::string coefficient = "random_checkerboard";  // constant | checkerboard | random_checkerboard
  double mu = 1.0;                                  // constant
  double mu_lo = 1.0, mu_hi = 10.0;                 // random_checkerboard range
  double mu_v0 = 1.0, mu_v1 = 10.0;                 // checkerboard values
  double delta = 0.0;                               // checkerboard cell size; 0 = fine h
  std::uint64_t seed = 1;
  Complex kappa{1.0, 0.0};

  // Source f(x) = f_const + f_linear * x (row-major), constant by default.
  std::array<double, 3> f_const{1.0, 1.0, 1.0};
  std::array<double, 9> f_linear{};

  // Study controls.
  std::vector<int> n_list{2, 4, 8};   // convergence: coarse resolutions
  int n_fine = 16;                    // convergence: shared fine resolution
  std::vector<int> m_list{1, 2, 3, 4};  // decay: localization sweep

  std::string out;          // CSV path; empty = derived from the command name
  bool emit_seconds = false;  // keep timing column zeroed unless asked

  std::string dump_projection;  // write the projection matrix here after building (CLI flag)
};

/// Flat key = value parser: '#' starts a comment, [section] lines are
/// ignored, unknown keys and malformed values raise ConfigError naming the
/// key and line.
Scenario parse_config(std::istream& in, const std::string& origin);
Scenario load_config(const std::string& path);  // ConfigError when unreadable

/// Generator bound to the scenario's coefficient block; evaluated on the
/// fine mesh of each run.
Coefficient make_coefficient(const Scenario& sc, const Mesh& fine);
SourceField make_source(const Scenario& sc);
int pick_m(const Scenario& sc, double H);

struct CheckOptions {
  bool inject_orientation_fault = false;  // test hook: corrupt one stored sign
};

/// Invariant suite: conformity, orientation, projection identity, commuting
/// on gradients, locality, corrector kernel and support. One pass/fail line
/// per invariant on `log`; returns 0 when all pass, 1 otherwise.
int cmd_check(const Scenario& sc, std::ostream& log, const CheckOptions& opts = {});

/// Single multiscale solve against the fine reference; one CSV row.
int cmd_solve(const Scenario& sc, std::ostream& log);

/// Convergence sweep over n_list at fixed fine mesh n_fine.
int cmd_convergence(const Scenario& sc, std::ostream& log);

/// Localization sweep over m_list at fixed (n, r).
int cmd_decay(const Scenario& sc, std::ostream& log);

}  // namespace curllod
