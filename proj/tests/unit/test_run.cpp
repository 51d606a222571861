#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "homlab/gridfile.hpp"
#include "homlab/run.hpp"

using namespace homlab;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("homlab_run_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Json manifest(const fs::path& dir) { return Json::parse(slurp(dir / "manifest.json")); }

int run(const Json& config, const fs::path& out, bool strict = false) {
  RunOverrides ov;
  ov.out = out.string();
  ov.strict = strict;
  return execute(config, ov);
}

const Json cosine_sweep = {{"command", "sweep"},
                           {"experiment", "dirichlet"},
                           {"family", "scalar-1d-cos"},
                           {"domain", "interval"},
                           {"eps", {0.125, 0.0625, 0.03125, 0.015625}},
                           {"data", "unit-load"}};

}  // namespace

TEST_CASE("cell with constant A reports the identity") {
  const fs::path out = scratch("cell");
  const Json c = {{"command", "cell"}, {"family", "constant"}, {"params", {{"d", 2}, {"value", 1.0}}}, {"cell_n", 16}};
  REQUIRE(run(c, out) == exit_ok);
  const Json m = manifest(out);
  CHECK(m["status"] == "ok");
  CHECK(m["exit_code"] == 0);
  const auto ahat = m["result"]["ahat"].get<std::vector<std::vector<double>>>();
  REQUIRE(ahat.size() == 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(ahat[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
  CHECK(fs::exists(out / "cell.json"));
  const GridData g = read_grid_file((out / "correctors" / "chi_j1_beta1.hglb").string());
  CHECK(g.dims == std::vector<std::uint32_t>{16, 16});
}

TEST_CASE("eps <= 0 is rejected before any compute") {
  for (double eps : {0.0, -0.1}) {
    const fs::path out = scratch("bad_eps");
    CHECK(run({{"command", "solve"}, {"family", "laminate-2d"}, {"domain", "square"}, {"eps", eps}}, out) ==
          exit_validation);
    const Json m = manifest(out);
    CHECK(m["status"] == "validation-error");
    CHECK(m["reason"]["kind"] == "validation");
    CHECK(m["artifacts"].empty());
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(out)) files += e.is_regular_file();
    CHECK(files == 1);
  }
  const fs::path out = scratch("bad_list");
  Json c = cosine_sweep;
  c["eps"] = {0.125, 0.0, -0.1};
  CHECK(run(c, out) == exit_validation);
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("unknown keys and malformed configs") {
  const fs::path out = scratch("unknown");
  Json c = cosine_sweep;
  c["colour"] = "red";
  CHECK(run(c, out) == exit_validation);
  CHECK(manifest(out)["reason"]["message"].get<std::string>().find("colour") != std::string::npos);
  CHECK(run({{"command", "launch"}}, out) == exit_validation);
  CHECK(run(Json::array(), out) == exit_validation);
  CHECK(run({{"command", "sweep"}, {"experiment", "nonsense"}, {"eps", {0.1, 0.05, 0.025}}}, out) ==
        exit_validation);
  CHECK(run({{"command", "report"}}, out) == exit_validation);

  RunOverrides ov;
  ov.out = out.string();
  CHECK(execute((out / "missing.json").string(), ov) == exit_validation);
  CHECK(manifest(out)["status"] == "validation-error");
}

TEST_CASE("1D cosine sweep writes decreasing L2 errors, byte-identical on rerun") {
  const fs::path a = scratch("sweep_a");
  const fs::path b = scratch("sweep_b");
  REQUIRE(run(cosine_sweep, a) == exit_ok);
  REQUIRE(run(cosine_sweep, b) == exit_ok);
  const std::string csv = slurp(a / "study.csv");
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);
  CHECK(line == "eps,h,quantity,value,gate-status\r");
  std::vector<double> l2;
  while (std::getline(rows, line)) {
    REQUIRE(line.back() == '\r');
    std::vector<std::string> f;
    std::istringstream cells(line.substr(0, line.size() - 1));
    std::string cell;
    while (std::getline(cells, cell, ',')) f.push_back(cell);
    REQUIRE(f.size() == 5);
    if (f[2] == "L2") l2.push_back(std::stod(f[3]));
  }
  REQUIRE(l2.size() == 4);
  for (std::size_t k = 1; k < l2.size(); ++k) CHECK(l2[k] < l2[k - 1]);
  for (const char* name : {"study.csv", "study.json", "study.svg"}) CHECK(slurp(a / name) == slurp(b / name));
  Json ma = manifest(a), mb = manifest(b);
  CHECK(ma["result"] == mb["result"]);
}

TEST_CASE("strict mode maps verdicts to exit 4") {
  Json c = cosine_sweep;
  c["experiment"] = "corrector";
  CHECK(run(c, scratch("strict_pass"), true) == exit_ok);
  // H1 over 1/8..1/64 sits below the window (cutoff strip)
  const fs::path out = scratch("strict_fail");
  CHECK(run(cosine_sweep, out, true) == exit_verdict);
  const Json m = manifest(out);
  CHECK(m["status"] == "verdict-failure");
  CHECK(m["reason"]["kind"] == "verdict");
  CHECK(fs::exists(out / "study.csv"));
  CHECK(run(cosine_sweep, scratch("lenient"), false) == exit_ok);
}

TEST_CASE("solve and eig commands") {
  const fs::path out = scratch("solve");
  const Json s = {{"command", "solve"}, {"family", "scalar-1d-cos"}, {"domain", "interval"},
                  {"eps", 0.0625},      {"boundary", "neumann"}};
  REQUIRE(run(s, out) == exit_ok);
  const GridData u = read_grid_file((out / "u_eps.hglb").string());
  CHECK(u.name == "u_eps");
  CHECK(u.dims == std::vector<std::uint32_t>{129});
  CHECK(manifest(out)["result"]["L2_u_eps_minus_u0"].get<double>() > 0.0);

  const fs::path e = scratch("eig");
  REQUIRE(run({{"command", "eig"}, {"family", "scalar-1d-cos"}, {"domain", "interval"}, {"eps", 0.1}}, e) ==
          exit_ok);
  const auto lam = manifest(e)["result"]["lambda_0"].get<std::vector<double>>();
  REQUIRE(lam.size() == 3);
  CHECK(lam[0] == doctest::Approx(std::sqrt(3.0) * kPi * kPi).epsilon(1e-2));
}

TEST_CASE("report collects run verdicts") {
  Json c = cosine_sweep;
  c["experiment"] = "corrector";
  const fs::path r1 = scratch("rep_1");
  REQUIRE(run(c, r1) == exit_ok);
  const fs::path out = scratch("rep");
  REQUIRE(run({{"command", "report"}, {"runs", {r1.string()}}}, out) == exit_ok);
  const Json rep = Json::parse(slurp(out / "report.json"));
  CHECK(rep["verdict"] == "pass");
  CHECK(slurp(out / "report.csv").find("homlab_run_rep_1/deviation") != std::string::npos);
  CHECK(run({{"command", "report"}, {"runs", {(out / "nowhere").string()}}}, out) == exit_validation);
}

TEST_CASE("csv_field quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\r\nlines") == "\"two\r\nlines\"");
}
