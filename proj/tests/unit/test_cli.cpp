#include "cli.hpp"
#include "survcbps/sim.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace survcbps;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "survcbps");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("survcbps_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path generated_csv(const fs::path& dir) {
  SimConfig c;
  c.n = 300;
  c.p = 8;
  c.beta_nonzero = 3;
  const fs::path path = dir / "data.csv";
  write_csv(generate_dataset(c, 2024).data, path);
  return path;
}

}  // namespace

TEST_CASE("fit on a generated CSV") {
  const fs::path dir = scratch("fit");
  const fs::path csv = generated_csv(dir);
  const Outcome a = run({"fit", "--data", csv.string()});
  REQUIRE(a.code == 0);
  const auto doc = nlohmann::json::parse(a.out);
  CHECK(doc.at("schema_version") == 1);
  for (const char* key : {"ate", "se", "ci_low", "ci_high", "median1", "median0"}) CHECK(doc.at("result").contains(key));
  CHECK(doc.at("active_covariates").size() <= 8);
  CHECK(doc.at("diagnostics").at("converged") == true);

  const Outcome b = run({"fit", "--data", csv.string()});
  CHECK(a.out == b.out);

  const fs::path out = dir / "result.json";
  CHECK(run({"fit", "--data", csv.string(), "--tau", "0.05", "--out", out.string()}).code == 0);
  CHECK(nlohmann::json::parse(slurp(out)).at("diagnostics").at("tau") == 0.05);

  const Outcome ipw = run({"fit", "--data", csv.string(), "--method", "naive_ipw", "--bootstrap", "30"});
  CHECK(ipw.code == 0);
  CHECK(ipw.out == run({"fit", "--data", csv.string(), "--method", "naive_ipw", "--bootstrap", "30"}).out);
}

TEST_CASE("fit exit codes") {
  const fs::path dir = scratch("codes");
  const Outcome missing = run({"fit"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--data") != std::string::npos);

  CHECK(run({"fit", "--data", (dir / "absent.csv").string()}).code == 2);

  std::ofstream(dir / "bad.csv") << "y,delta,d,x1\n1,1,1,0\n2,1,2,0\n";
  const Outcome bad = run({"fit", "--data", (dir / "bad.csv").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("row 2") != std::string::npos);

  std::ofstream(dir / "degenerate.csv") << "y,delta,d,x1\n1,1,1,0\n2,0,0,1\n3,0,0,2\n";
  CHECK(run({"fit", "--data", (dir / "degenerate.csv").string()}).code == 4);

  CHECK(run({"fit", "--data", (dir / "bad.csv").string(), "--method", "tmle"}).code == 2);
  CHECK(run({"fit", "--data", (dir / "bad.csv").string(), "--seed", "abc"}).code == 2);
  CHECK(run({"bogus"}).code == 2);
}

TEST_CASE("fit reports convergence failures with diagnostics") {
  const fs::path dir = scratch("nonconv");
  // Treatment perfectly separated by x1 with more moments than the data can satisfy.
  std::ofstream f(dir / "sep.csv");
  f << "y,delta,d,x1\n";
  for (int i = 0; i < 6; ++i) f << 1 + i << ",1," << (i < 3 ? 1 : 0) << ',' << (i < 3 ? 1 : -1) << "\n";
  f.close();
  const Outcome r = run({"fit", "--data", (dir / "sep.csv").string(), "--tau", "0.01"});
  CHECK((r.code == 3 || r.code == 4));
  if (r.code == 3) CHECK(nlohmann::json::parse(r.out).contains("error"));
}

TEST_CASE("simulate writes reports and is deterministic across worker counts") {
  const fs::path dir = scratch("simulate");
  std::ofstream(dir / "study.conf") << "n = 100\np = 5\nbeta_nonzero = 2\nreplications = 2\n"
                                       "estimators = proposed, naive_ipw\nbootstrap = 20\n";
  const Outcome one = run({"simulate", "--config", (dir / "study.conf").string(), "--workers", "1", "--out-dir",
                           (dir / "w1").string()});
  REQUIRE(one.code == 0);
  const Outcome eight = run({"simulate", "--config", (dir / "study.conf").string(), "--workers", "8", "--out-dir",
                             (dir / "w8").string()});
  REQUIRE(eight.code == 0);
  CHECK(slurp(dir / "w1" / "report.csv") == slurp(dir / "w8" / "report.csv"));
  CHECK(fs::exists(dir / "w1" / "report.json"));
  CHECK(one.out.find("Proposed Method") != std::string::npos);

  const Outcome report = run({"report", "--in", (dir / "w1" / "report.json").string()});
  CHECK(report.code == 0);
  CHECK(report.out == one.out);

  const Outcome inline_flags = run({"simulate", "--n", "100", "--p", "5", "--beta-nonzero", "2", "--replications",
                                    "2", "--estimators", "naive_ipw", "--bootstrap", "20", "--out-dir",
                                    (dir / "inline").string()});
  CHECK(inline_flags.code == 0);
}

TEST_CASE("simulate and report error codes") {
  const fs::path dir = scratch("sim_errors");
  std::ofstream(dir / "bad.conf") << "n = 100\nunknown_key = 1\n";
  CHECK(run({"simulate", "--config", (dir / "bad.conf").string(), "--out-dir", dir.string()}).code == 2);
  CHECK(run({"simulate", "--config", (dir / "missing.conf").string()}).code == 2);

  std::ofstream(dir / "v9.json") << R"({"schema_version": 9, "replications": [1], "rows": []})";
  const Outcome v9 = run({"report", "--in", (dir / "v9.json").string()});
  CHECK(v9.code == 2);
  CHECK(v9.err.find("9") != std::string::npos);
  std::ofstream(dir / "empty.json") << R"({"schema_version": 1, "replications": [], "rows": []})";
  CHECK(run({"report", "--in", (dir / "empty.json").string()}).code == 2);
  std::ofstream(dir / "junk.json") << "{not json";
  CHECK(run({"report", "--in", (dir / "junk.json").string()}).code == 2);
}

TEST_CASE("the installed binary maps exit codes") {
  const std::string bin = SURVCBPS_CLI_PATH;
  CHECK(WEXITSTATUS(std::system((bin + " fit > /dev/null 2>&1").c_str())) == 2);
  CHECK(WEXITSTATUS(std::system((bin + " --help > /dev/null 2>&1").c_str())) == 0);
}

TEST_CASE("shipped benchmark configuration parses") {
  const SimConfig c = load_sim_config(fs::path(SURVCBPS_SOURCE_DIR) / "configs" / "benchmark.conf");
  CHECK(c.n == 300);
  CHECK(c.p == 20);
  CHECK(c.replications == 100);
}
