#include "homlab/run.hpp"

#include <cholmod.h>

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "homlab/cell.hpp"
#include "homlab/gridfile.hpp"

namespace homlab {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

const std::vector<std::pair<Command, std::string>>& command_names() {
  static const std::vector<std::pair<Command, std::string>> n = {{Command::cell, "cell"},
                                                                  {Command::solve, "solve"},
                                                                  {Command::sweep, "sweep"},
                                                                  {Command::eig, "eig"},
                                                                  {Command::report, "report"}};
  return n;
}

Command command_from_string(const std::string& s) {
  for (const auto& [c, name] : command_names())
    if (name == s) return c;
  throw ValidationError("unknown command '" + s + "'");
}

const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> k = {"command", "experiment", "boundary", "eps",   "flux",
                                             "svg",     "fields",     "runs",     "out",   "strict"};
  return k;
}

bool is_run_key(const std::string& k) {
  return std::find(run_keys().begin(), run_keys().end(), k) != run_keys().end();
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cc, name] : command_names())
    if (cc == c) return name;
  return "?";
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  if (!j.contains("command")) throw ValidationError("config: missing 'command'");
  RunConfig c;
  Json sweep = Json::object();
  try {
    for (const auto& [k, v] : j.items())
      if (!is_run_key(k)) sweep[k] = v;
    c.command = command_from_string(j.at("command").get<std::string>());
    if (j.contains("experiment")) c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("boundary")) {
      const std::string b = j.at("boundary").get<std::string>();
      if (b == "dirichlet") {
        c.boundary = BoundaryKind::dirichlet;
      } else if (b == "neumann") {
        c.boundary = BoundaryKind::neumann;
      } else {
        throw ValidationError("boundary must be 'dirichlet' or 'neumann'");
      }
    }
    if (j.contains("eps")) {
      const Json& e = j.at("eps");
      if (e.is_number()) {
        c.single_eps = e.get<double>();
      } else {
        sweep["eps"] = e;
      }
    }
    if (j.contains("flux")) c.flux = j.at("flux").get<bool>();
    if (j.contains("svg")) c.svg = j.at("svg").get<bool>();
    if (j.contains("fields")) c.fields = j.at("fields").get<bool>();
    if (j.contains("runs")) c.runs = j.at("runs").get<std::vector<std::string>>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("strict")) c.strict = j.at("strict").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.sweep = Sweep::from_json(sweep);
  return c;
}

void RunConfig::validate() const {
  if (out.empty()) throw ValidationError("out must not be empty");
  switch (command) {
    case Command::cell: {
      if (sweep.cell_n < 8 || sweep.cell_n % 2) throw ValidationError("cell_n must be even and at least 8");
      if (!(sweep.tol >= 1e-14 && sweep.tol <= 1e-6)) throw ValidationError("tol must lie in [1e-14, 1e-6]");
      if (sweep.jobs < 1) throw ValidationError("jobs must be positive");
      (void)sweep.coefficient();
      if (single_eps || !sweep.eps.empty()) throw ValidationError("cell takes no eps");
      break;
    }
    case Command::solve:
      if (!single_eps) throw ValidationError("solve needs a single eps value");
      if (boundary == BoundaryKind::neumann && sweep.data != "manufactured") {
        throw ValidationError("Neumann solves use manufactured data");
      }
      sweep.validate_single(*single_eps);
      sweep.validate_setup(*single_eps);
      break;
    case Command::sweep: {
      if (single_eps) throw ValidationError("sweep needs an eps list");
      const auto& names = experiment_names();
      if (std::find(names.begin(), names.end(), experiment) == names.end()) {
        throw ValidationError("unknown experiment '" + experiment + "'");
      }
      sweep.validate();
      break;
    }
    case Command::eig:
      if (single_eps) {
        sweep.validate_single(*single_eps);
        sweep.validate_setup(*single_eps);
      } else {
        sweep.validate();
      }
      break;
    case Command::report:
      if (runs.empty()) throw ValidationError("report needs a non-empty 'runs' list");
      break;
  }
}

Json RunConfig::to_json() const {
  Json j = sweep.to_json();
  j["command"] = to_string(command);
  j["experiment"] = experiment;
  j["boundary"] = boundary == BoundaryKind::dirichlet ? "dirichlet" : "neumann";
  if (single_eps) j["eps"] = *single_eps;
  j["flux"] = flux;
  j["svg"] = svg;
  j["fields"] = fields;
  j["runs"] = runs;
  j["out"] = out;
  j["strict"] = strict;
  return j;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json build_versions() {
  std::ostringstream eigen, cholmod, json;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  cholmod << CHOLMOD_MAIN_VERSION << "." << CHOLMOD_SUB_VERSION << "." << CHOLMOD_SUBSUB_VERSION;
  json << NLOHMANN_JSON_VERSION_MAJOR << "." << NLOHMANN_JSON_VERSION_MINOR << "." << NLOHMANN_JSON_VERSION_PATCH;
  return {{"homlab", kToolVersion},
          {"eigen", eigen.str()},
          {"cholmod", cholmod.str()},
          {"nlohmann_json", json.str()},
          {"compiler", __VERSION__},
          {"cxx", static_cast<long>(__cplusplus)}};
}

namespace {

class RunDir {
 public:
  explicit RunDir(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& text) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + (dir_ / name).string());
    f << text;
    if (!f) throw ValidationError("write failed: " + (dir_ / name).string());
    artifacts_.push_back(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }
  void write_grid(const std::string& name, const GridData& g) {
    write_grid_file((dir_ / name).string(), g);
    artifacts_.push_back(name);
  }
  /// Record files written by library exporters under a subdirectory.
  void collect(const std::string& sub) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir_ / sub))
      if (e.is_regular_file()) names.push_back(sub + "/" + e.path().filename().string());
    std::sort(names.begin(), names.end());
    artifacts_.insert(artifacts_.end(), names.begin(), names.end());
  }

  const fs::path& path() const { return dir_; }
  const std::vector<std::string>& artifacts() const { return artifacts_; }

 private:
  fs::path dir_;
  std::vector<std::string> artifacts_;
};

struct Outcome {
  Json result = Json::object();
  std::optional<Verdict> verdict;
};

Json tensor_json(const CoeffTensor& t) {
  const Eigen::MatrixXd q = t.matrix();
  Json rows = Json::array();
  for (int r = 0; r < q.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < q.cols(); ++c) row.push_back(q(r, c));
    rows.push_back(row);
  }
  return rows;
}

Outcome run_cell(const RunConfig& c, RunDir& dir) {
  const CoefficientField a = c.sweep.coefficient();
  CellOptions opt;
  opt.tol = c.sweep.tol;
  opt.jobs = c.sweep.jobs;
  const HomogenizedTensor ht = effective_tensor(a, c.sweep.cell_n, opt);
  Json cell = ht.to_json();
  cell["coefficient"] = {{"name", a.name()}, {"d", a.dim()}, {"m", a.components()}};
  cell["coefficient_ellipticity"] = check_ellipticity(a, std::min(4 * c.sweep.cell_n, 512)).to_json();
  if (c.fields || c.flux) {
    const CorrectorSet chi = solve_correctors(a, c.sweep.cell_n, opt);
    if (c.fields) {
      export_correctors(chi, (dir.path() / "correctors").string());
      dir.collect("correctors");
    }
    if (c.flux) {
      const HomogenizedTensor plain = homogenized_tensor(a, chi);
      FluxData fd = flux_field(a, chi, plain);
      flux_correctors(fd, c.sweep.tol, c.sweep.jobs);
      cell["flux"] = {{"mean_defect", fd.mean_defect},
                      {"weak_divergence", fd.weak_divergence},
                      {"max_abs_b", fd.max_abs_b()},
                      {"antisymmetry_defect", fd.antisymmetry_defect()},
                      {"reconstruction_error", fd.reconstruction_error()},
                      {"poisson_residuals", fd.poisson_residuals}};
      if (c.fields) {
        export_flux(fd, (dir.path() / "flux").string());
        dir.collect("flux");
      }
    }
  }
  dir.write_json("cell.json", cell);
  Outcome o;
  o.result = {{"ahat", tensor_json(ht.best())},
              {"N", ht.N},
              {"symmetry_defect", ht.symmetry_defect},
              {"legendre", ht.certificate.legendre}};
  return o;
}

Outcome run_solve(const RunConfig& c, RunDir& dir) {
  const SingleSolve s = solve_single(c.sweep, *c.single_eps, c.boundary);
  dir.write_json("solve.json", s.summary);
  if (c.fields) {
    dir.write_grid("u_eps.hglb", grid_from_field(s.fields[0], "u_eps"));
    dir.write_grid("u0.hglb", grid_from_field(s.fields[1], "u0"));
  }
  Outcome o;
  o.result = {{"L2_u_eps_minus_u0", s.summary.at("L2_u_eps_minus_u0")},
              {"H1_smoothed_expansion", s.summary.at("H1_smoothed_expansion")},
              {"h", s.summary.at("h")}};
  return o;
}

Outcome write_study(const RunConfig& c, const StudyReport& r, RunDir& dir) {
  dir.write_json("study.json", r.to_json());
  dir.write("study.csv", study_csv(r));
  if (c.svg) dir.write("study.svg", study_svg(r));
  Outcome o;
  o.verdict = r.verdict();
  Json studies = Json::object();
  for (const auto& st : r.studies) {
    studies[st.name] = {{"slope", st.fit ? Json(st.fit->slope) : Json(nullptr)},
                        {"window", st.window},
                        {"graded", st.graded},
                        {"verdict", to_string(st.verdict)}};
  }
  o.result = {{"experiment", r.experiment}, {"verdict", to_string(r.verdict())}, {"studies", studies}};
  return o;
}

Outcome run_report(const RunConfig& c, RunDir& dir) {
  Json runs = Json::array();
  std::string csv = "eps,h,quantity,value,gate-status\r\n";
  Verdict worst = Verdict::pass;
  auto rank = [](Verdict v) {
    switch (v) {
      case Verdict::fail: return 3;
      case Verdict::inconclusive: return 2;
      case Verdict::degenerate_zero: return 1;
      default: return 0;
    }
  };
  bool any_pass = false;
  for (const auto& run : c.runs) {
    const fs::path study = fs::path(run) / "study.json";
    std::ifstream f(study);
    if (!f) throw ValidationError("report: missing " + study.string());
    Json j;
    try {
      j = Json::parse(f);
    } catch (const Json::exception& e) {
      throw ValidationError("report: " + study.string() + ": " + e.what());
    }
    const std::string vs = j.value("verdict", std::string("inconclusive"));
    Verdict v = Verdict::inconclusive;
    for (Verdict cand : {Verdict::pass, Verdict::fail, Verdict::inconclusive, Verdict::degenerate_zero})
      if (to_string(cand) == vs) v = cand;
    if (rank(v) > rank(worst)) worst = v;
    any_pass = any_pass || v == Verdict::pass;
    Json studies = Json::array();
    for (const auto& st : j.at("studies")) {
      studies.push_back({{"name", st.at("name")}, {"slope", st.at("slope")}, {"verdict", st.at("verdict")}});
      const std::string q = fs::path(run).filename().string() + "/" + st.at("name").get<std::string>();
      for (const auto& p : st.at("points")) {
        csv += format_double(p.at("eps").get<double>()) + "," + format_double(p.at("h").get<double>()) + "," +
               csv_field(q) + "," + format_double(p.at("value").get<double>()) + "," +
               csv_field(p.at("gate").get<std::string>()) + "\r\n";
      }
    }
    runs.push_back({{"run", run}, {"experiment", j.value("experiment", "")}, {"verdict", vs}, {"studies", studies}});
  }
  // degenerate-zero only dominates when nothing passed
  if (worst == Verdict::degenerate_zero && any_pass) worst = Verdict::pass;
  const Json report = {{"runs", runs}, {"verdict", to_string(worst)}};
  dir.write_json("report.json", report);
  dir.write("report.csv", csv);
  Outcome o;
  o.verdict = worst;
  o.result = {{"verdict", to_string(worst)}, {"runs", c.runs.size()}};
  return o;
}

Outcome run_command(const RunConfig& c, RunDir& dir) {
  switch (c.command) {
    case Command::cell: return run_cell(c, dir);
    case Command::solve: return run_solve(c, dir);
    case Command::sweep: return write_study(c, run_experiment(c.experiment, c.sweep), dir);
    case Command::eig:
      if (c.single_eps) {
        const Json e = eigen_single(c.sweep, *c.single_eps);
        dir.write_json("eigen.json", e);
        Outcome o;
        o.result = {{"lambda_eps", e.at("lambda_eps")}, {"lambda_0", e.at("lambda_0")}};
        return o;
      }
      return write_study(c, run_eigen_rates(c.sweep), dir);
    case Command::report: return run_report(c, dir);
  }
  throw ValidationError("unknown command");
}

Json reason(const std::string& kind, const std::string& message) {
  return {{"kind", kind}, {"message", message}};
}

}  // namespace

int execute(const Json& raw, const RunOverrides& ov) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  Json manifest = {{"tool", "homlab"}, {"versions", build_versions()}, {"config", raw}};

  std::string out = ov.out.value_or("run");
  if (!ov.out && raw.is_object() && raw.contains("out") && raw.at("out").is_string()) {
    out = raw.at("out").get<std::string>();
  }
  std::optional<RunDir> dir;
  auto open_dir = [&]() -> bool {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
      std::cerr << "homlab: cannot create output directory '" << out << "': " << ec.message() << "\n";
      return false;
    }
    dir.emplace(out);
    return true;
  };
  auto finish = [&](int code, const std::string& status, Json why) {
    manifest["status"] = status;
    manifest["exit_code"] = code;
    manifest["reason"] = std::move(why);
    manifest["artifacts"] = dir ? dir->artifacts() : std::vector<std::string>{};
    manifest["timings"] = {{"total_seconds", std::chrono::duration<double>(Clock::now() - t0).count()}};
    if (dir || open_dir()) {
      std::ofstream f(dir->path() / "manifest.json", std::ios::binary);
      f << manifest.dump(2) << "\n";
    }
    if (code != exit_ok) std::cerr << "homlab: " << status << ": " << manifest["reason"].value("message", "") << "\n";
    return code;
  };

  RunConfig config;
  try {
    config = RunConfig::from_json(raw);
    if (ov.out) config.out = *ov.out;
    if (ov.jobs) config.sweep.jobs = *ov.jobs;
    if (ov.seed) config.sweep.seed = *ov.seed;
    config.strict = config.strict || ov.strict;
    out = config.out;
    config.validate();
  } catch (const ValidationError& e) {
    return finish(exit_validation, "validation-error", reason("validation", e.what()));
  }
  manifest["command"] = to_string(config.command);
  manifest["config"] = config.to_json();
  if (!open_dir()) return exit_validation;

  try {
    const Outcome o = run_command(config, *dir);
    manifest["result"] = o.result;
    manifest["verdict"] = o.verdict ? Json(to_string(*o.verdict)) : Json(nullptr);
    if (config.strict && o.verdict && (*o.verdict == Verdict::fail || *o.verdict == Verdict::inconclusive)) {
      return finish(exit_verdict, "verdict-failure", reason("verdict", "verdict is " + to_string(*o.verdict)));
    }
    return finish(exit_ok, "ok", nullptr);
  } catch (const ValidationError& e) {
    return finish(exit_validation, "validation-error", reason("validation", e.what()));
  } catch (const SolverError& e) {
    Json why = reason("solver", e.what());
    why["last_residual"] = e.last_residual();
    return finish(exit_solver, "solver-error", why);
  } catch (const std::exception& e) {
    return finish(exit_solver, "solver-error", reason("internal", e.what()));
  }
}

void write_failure_manifest(const std::string& out, int code, const std::string& message) {
  const Json manifest = {{"tool", "homlab"},
                         {"versions", build_versions()},
                         {"config", nullptr},
                         {"status", "validation-error"},
                         {"exit_code", code},
                         {"reason", reason("validation", message)},
                         {"artifacts", Json::array()},
                         {"timings", {{"total_seconds", 0.0}}}};
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream m(fs::path(out) / "manifest.json", std::ios::binary);
  if (m) m << manifest.dump(2) << "\n";
  std::cerr << "homlab: validation-error: " << message << "\n";
}

int execute(const std::string& config_path, const RunOverrides& ov) {
  Json raw;
  std::ifstream f(config_path);
  if (!f) {
    write_failure_manifest(ov.out.value_or("run"), exit_validation, "cannot read config '" + config_path + "'");
    return exit_validation;
  }
  try {
    raw = Json::parse(f);
  } catch (const Json::exception& e) {
    write_failure_manifest(ov.out.value_or("run"), exit_validation,
                           std::string("config is not valid JSON: ") + e.what());
    return exit_validation;
  }
  return execute(raw, ov);
}

}  // namespace homlab
