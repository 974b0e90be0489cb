#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fkai/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const double PI = std::acos(-1.0);

fs::path case_dir(const std::string& name)
{
  fs::path d = fs::path(FKAI_TEST_DIR) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Runs the binary with --config dir/config.json --out dir and returns its exit status.
int run(const std::string& verb, const fs::path& dir, const std::string& extra = "")
{
  std::string cmd = std::string("\"") + FKAI_BINARY + "\" " + verb + " --config \"" + (dir / "config.json").string() +
                    "\" --out \"" + dir.string() + "\" " + extra + " > \"" + (dir / (verb + ".log")).string() +
                    "\" 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

json cos_config(double lambda, double rho, int N = 64)
{
  return {{"potential", {{"family", "trig-sum"}, {"terms", {{{"amplitude", 1.0}, {"frequency", 1.0}}}}}},
          {"interaction", {{"kind", "generating-nn"}, {"coupling", "quadratic"}}},
          {"certification", {{"lower", -10.0}, {"upper", 10.0}}},
          {"solver", {{"lambda", lambda}, {"rho", rho}, {"half_width", N}, {"tol", 1e-10}}},
          {"seed", 7}};
}

fs::path with_config(const std::string& name, const json& config)
{
  fs::path d = case_dir(name);
  std::ofstream(d / "config.json") << config.dump(2);
  return d;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p)
{
  std::ifstream in(p);
  return fkai::io::read_csv(in);
}

void check_manifest(const fs::path& d, int code)
{
  json m = read_json(d / "manifest.json");
  CHECK(m["exit_code"] == code);
  CHECK(m["passed"] == (code == 0));
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  for (const auto& a : m["artifacts"]) CHECK(fs::exists(d / a.get<std::string>()));
}

} // namespace

TEST_CASE("certify")
{
  auto d = with_config("certify_cos", cos_config(20, 0));
  REQUIRE(run("certify", d) == 0);
  json c = read_json(d / "certificate.json");
  CHECK(c["r"].get<double>() == doctest::Approx(PI / 4).epsilon(1e-12));
  CHECK(c["m"].get<double>() == doctest::Approx(0.7071).epsilon(1e-4));
  check_manifest(d, 0);

  json sin4 = cos_config(20, 0);
  sin4["potential"]["terms"] = {{{"amplitude", 0.375}, {"frequency", 0.0}},
                                {{"amplitude", -0.5}, {"frequency", 2.0}},
                                {{"amplitude", 0.125}, {"frequency", 4.0}}};
  auto s = with_config("certify_sin4", sin4);
  REQUIRE(run("certify", s) == 0);
  json sc = read_json(s / "certificate.json");
  CHECK(sc["provenance"]["rejected_degenerate"].get<int>() > 0);
  for (const auto& z : sc["zeros"]) {
    double k = (z[0].get<double>() - PI / 2) / PI;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
  }

  json flat = cos_config(20, 0);
  flat["potential"]["terms"] = {{{"amplitude", 1.0}, {"frequency", 0.0}}};
  auto f = with_config("certify_flat", flat);
  CHECK(run("certify", f) == 2);
  check_manifest(f, 2);
}

TEST_CASE("usage and parse errors exit 1")
{
  json missing = cos_config(20, 0);
  missing.erase("potential");
  CHECK(run("certify", with_config("missing_potential", missing)) == 1);

  json unknown = cos_config(20, 0);
  unknown["solver"]["lamda"] = 3;
  CHECK(run("solve", with_config("unknown_key", unknown)) == 1);

  auto bad = case_dir("bad_json");
  std::ofstream(bad / "config.json") << "{\"potential\": ";
  CHECK(run("certify", bad) == 1);

  auto none = case_dir("no_config_file");
  CHECK(run("certify", none) == 1);

  std::string cmd = std::string("\"") + FKAI_BINARY + "\" solve > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
}

TEST_CASE("solve")
{
  auto z = with_config("solve_zero", cos_config(20, 0, 16));
  REQUIRE(run("solve", z) == 0);
  for (const auto& row : read_rows(z / "solution.csv")) {
    if (row[0] == "site") continue;
    CHECK(std::stod(row[1]) == 0.0);
  }
  check_manifest(z, 0);

  auto one = with_config("solve_rho1", cos_config(20, 1, 64));
  REQUIRE(run("solve", one) == 0);
  json rep = read_json(one / "report.json");
  CHECK(rep["report"]["residual"].get<double>() <= 1e-10);
  CHECK(rep["checks"]["anchor_containment"] == true);
  CHECK(rep["config"]["solver"]["half_width"] == 64);
  CHECK(read_rows(one / "trace.csv").size() == rep["report"]["iterations"].get<std::size_t>() + 1);
  CHECK(read_rows(one / "solution.csv").size() == 130);

  auto weak = with_config("solve_lambda1", cos_config(1, 1, 16));
  CHECK(run("solve", weak) == 4);
  json wr = read_json(weak / "report.json");
  CHECK(wr["status"] == "domain-error");
  CHECK(wr.contains("site"));
  check_manifest(weak, 4);

  json few = cos_config(20, 1, 16);
  few["solver"]["max_iter"] = 2;
  auto stuck = with_config("solve_max_iter", few);
  CHECK(run("solve", stuck) == 3);
  CHECK(read_json(stuck / "report.json")["step_distances"].size() == 2);
}

TEST_CASE("solve with a stored certificate")
{
  auto d = with_config("stored_cert", cos_config(20, 1, 16));
  REQUIRE(run("certify", d) == 0);
  json c = cos_config(20, 1, 16);
  c["certification"] = {{"certificate", "certificate.json"}};
  std::ofstream(d / "config.json") << c.dump(2);
  CHECK(run("solve", d) == 0);
}

TEST_CASE("reports are deterministic")
{
  auto d = with_config("determinism", cos_config(20, 1, 32));
  REQUIRE(run("solve", d) == 0);
  std::string first = slurp(d / "report.json"), manifest = slurp(d / "manifest.json");
  REQUIRE(run("solve", d) == 0);
  CHECK(slurp(d / "report.json") == first);
  CHECK(slurp(d / "manifest.json") == manifest);
  REQUIRE(run("hyperbolicity", d) == 0);
  std::string hyp = slurp(d / "hyperbolicity.json");
  REQUIRE(run("hyperbolicity", d) == 0);
  CHECK(slurp(d / "hyperbolicity.json") == hyp);
}

TEST_CASE("hyperbolicity")
{
  auto d = with_config("hyp_rho1", cos_config(20, 1, 32));
  REQUIRE(run("solve", d) == 0);
  REQUIRE(run("hyperbolicity", d) == 0);
  json h = read_json(d / "hyperbolicity.json");
  CHECK(h["mu"].get<double>() == doctest::Approx(9.899).epsilon(1e-4));
  CHECK(h["passed"] == true);
  CHECK(h["failing_sites"].empty());
  CHECK(read_rows(d / "orbit.csv").size() == 66);
  check_manifest(d, 0);

  // A synthetic u = 0 at lambda = 0.1, far below the threshold.
  auto w = with_config("hyp_weak", cos_config(0.1, 0, 8));
  {
    std::ofstream sol(w / "solution.csv");
    sol << "site,component_0\n";
    for (int i = -8; i <= 8; ++i) sol << i << ",0\n";
  }
  CHECK(run("hyperbolicity", w) == 5);
  json hw = read_json(w / "hyperbolicity.json");
  CHECK(hw["failing_sites"].size() == 17);
  CHECK(hw["orbit_deviation"].get<double>() == 0);
  for (const auto& row : read_rows(w / "orbit.csv"))
    if (row[0] != "i") CHECK(row.back() == "fail");

  auto exact = with_config("hyp_pi", cos_config(20, PI, 8));
  REQUIRE(run("solve", exact) == 0);
  REQUIRE(run("hyperbolicity", exact) == 0);
  CHECK(read_json(exact / "hyperbolicity.json")["orbit_deviation"].get<double>() <= 1e-13);

  CHECK(run("hyperbolicity", with_config("hyp_missing", cos_config(20, 1, 8))) == 1);
}

TEST_CASE("sweep")
{
  json c = cos_config(20, 1, 64);
  c["solver"].erase("lambda");
  c["solver"].erase("rho");
  c["solver"]["lambdas"] = {20, 60, 200, 600, 2000};
  c["solver"]["rhos"] = {1.0};
  auto d = with_config("sweep_scaling", c);
  REQUIRE(run("sweep", d, "--workers 3") == 0);
  auto rows = read_rows(d / "sweep.csv");
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"lambda", "rho_0", "status", "exit_code", "iterations",
                                            "distance_to_anchor", "residual", "contraction_factor",
                                            "hyperbolic_pass"});
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    CHECK(rows[k][2] == "ok");
    CHECK(rows[k][8] == "true");
    double x = std::log(std::stod(rows[k][0])), y = std::log(std::stod(rows[k][5]));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  double slope = (5 * sxy - sx * sy) / (5 * sxx - sx * sx);
  CHECK(std::abs(slope + 1) <= 0.05);

  // Worker count does not change the output.
  std::string parallel = slurp(d / "sweep.csv");
  REQUIRE(run("sweep", d, "--workers 1") == 0);
  CHECK(slurp(d / "sweep.csv") == parallel);

  // One row matches the corresponding solve.
  json single = cos_config(20, 1, 64);
  single["solver"].erase("lambda");
  single["solver"].erase("rho");
  single["solver"]["lambdas"] = {20};
  single["solver"]["rhos"] = {1.0};
  auto s = with_config("sweep_single", single);
  REQUIRE(run("sweep", s) == 0);
  auto one = read_rows(s / "sweep.csv");
  auto solo = with_config("sweep_single_solve", cos_config(20, 1, 64));
  REQUIRE(run("solve", solo) == 0);
  json rep = read_json(solo / "report.json")["report"];
  CHECK(std::stod(one[1][5]) == rep["distance_to_anchor"].get<double>());
  CHECK(std::stod(one[1][6]) == rep["residual"].get<double>());
  CHECK(std::stoi(one[1][4]) == rep["iterations"].get<int>());

  json mixed = c;
  mixed["solver"]["lambdas"] = {1, 20, 60};
  auto m = with_config("sweep_mixed", mixed);
  CHECK(run("sweep", m, "--workers 2") == 4);
  auto mr = read_rows(m / "sweep.csv");
  REQUIRE(mr.size() == 4);
  CHECK(mr[1][2] == "domain-error");
  CHECK(mr[1][3] == "4");
  CHECK(mr[2][2] == "ok");
  CHECK(mr[3][2] == "ok");

  json empty = c;
  empty["solver"]["lambdas"] = json::array();
  CHECK(run("sweep", with_config("sweep_empty", empty)) == 1);
}
