#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "homlab/cell.hpp"
#include "homlab/fem.hpp"
#include "homlab/mesh.hpp"

namespace homlab {

enum class Verdict { pass, fail, inconclusive, degenerate_zero };
std::string to_string(Verdict v);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// OLS of log(error) on log(eps). Needs >= 3 pairs, all positive.
RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs);

struct RatePoint {
  double eps = 0.0;
  double h = 0.0;
  double value = 0.0;
  /// Richardson estimate of the discretization error in `value`; 0 for
  /// closed-form oracles.
  double estimate = 0.0;
  bool admitted = false;
  std::string gate;  ///< "pass", "fail" or "exact"
};

struct RateStudy {
  std::string name;
  std::string quantity;
  std::array<double, 2> window{0.0, 0.0};
  bool graded = true;
  std::vector<RatePoint> points;
  std::optional<RateFit> fit;
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::string> diagnostics;

  /// Fit the admitted points and set the verdict. `zero_level` is the value
  /// below which every point counts as an exact zero.
  void grade(double zero_level);
  nlohmann::json to_json() const;
};

/// Pass/fail check that is not a slope (orthogonality, mini-max, ...).
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
  nlohmann::json to_json() const;
};

struct StudyReport {
  std::string experiment;
  std::vector<RateStudy> studies;
  std::vector<Check> checks;
  nlohmann::json summary = nlohmann::json::object();

  /// Worst verdict over graded studies and checks.
  Verdict verdict() const;
  nlohmann::json to_json() const;
  const RateStudy& study(const std::string& name) const;
};

struct Sweep {
  std::string family = "scalar-1d-cos";
  nlohmann::json params = nlohmann::json::object();
  Shape domain = Shape::interval;
  std::vector<double> eps;
  /// Coarse level h = 1 / ceil(cells_per_eps / eps), reduced until the
  /// refined level fits max_dofs but never coarser than eps / 8. The gate
  /// solves again at h / 2 and the graded values come from that level.
  int cells_per_eps = 8;
  int cell_n = 128;
  double tol = 1e-10;
  double gate_fraction = 0.2;
  int jobs = 1;
  std::uint64_t seed = 1;
  int eigen_count = 3;
  /// "unit-load" (F = 1, Dirichlet only) or "manufactured" (u0 prescribed).
  std::string data = "manufactured";
  /// Use closed-form solutions where the family allows it (1D cosine).
  bool oracle = true;
  Index max_dofs = 1'100'000;  ///< dofs of the refined level
  /// Sampled coefficient grid-file; replaces family and params when set.
  std::string grid;

  CoefficientField coefficient() const;

  int dim() const;
  /// Cells per unit length at the coarse level for eps, m components.
  int cells_for(double eps, int m = 1) const;
  void validate() const;
  /// Checks of a single eps value (positive, at most 1/8).
  void validate_single(double eps) const;
  /// Everything except the eps list; `finest` sizes the dof budget check.
  void validate_setup(double finest) const;
  nlohmann::json to_json() const;
  static Sweep from_json(const nlohmann::json& j);
};

/// eps_k = 1 / (2^k + shift) for k = first..last.
std::vector<double> dyadic_eps(int first, int last, double shift = 0.0);

/// L2 of u_eps - u0 and H1 of the smoothed expansion. Property mode (all
/// studies ungraded) on the L-shape.
StudyReport run_dirichlet_rates(const Sweep& sweep);
/// H1 of the smoothed expansion with Neumann data.
StudyReport run_neumann_rates(const Sweep& sweep);
/// L^p of u_eps - u0, graded at p = 2d / (d - 1) (p = 2 in 1D).
StudyReport run_Lp_rates(const Sweep& sweep);
/// |lambda_eps,k - lambda_0,k| for k = 1..eigen_count.
StudyReport run_eigen_rates(const Sweep& sweep);
/// ||Phi - P||_inf and the H1 discrepancy of the corrector variant.
StudyReport run_corrector_study(const Sweep& sweep);
/// Dirichlet H1 / L^p rates and Neumann rigid-mode checks for m = d = 2.
StudyReport run_elasticity_rates(const Sweep& sweep);

/// u_eps and u0 at one eps on the coarse mesh of the sweep rule, no gate.
struct SingleSolve {
  std::shared_ptr<const Mesh> mesh;
  std::vector<FEField> fields;  ///< u_eps, u0
  nlohmann::json summary;
};
SingleSolve solve_single(const Sweep& sweep, double eps, BoundaryKind kind);

/// First eigen_count Dirichlet eigenvalues of L_eps and L_0 at one eps.
nlohmann::json eigen_single(const Sweep& sweep, double eps);

StudyReport run_experiment(const std::string& name, const Sweep& sweep);
const std::vector<std::string>& experiment_names();

/// RFC 4180 rows eps,h,quantity,value,gate-status with 17 significant digits.
std::string study_csv(const StudyReport& report);
/// Log-log plot of every study in the report.
std::string study_svg(const StudyReport& report);

/// Decimal with 17 significant digits (round-trips any double).
std::string format_double(double v);

}  // namespace homlab
