#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "netsync/cli.hpp"
#include "netsync/generators.hpp"
#include "netsync/io.hpp"

using namespace netsync;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "netsync");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path dir() {
  const fs::path d = fs::temp_directory_path() / "netsync_cli_tests";
  fs::create_directories(d);
  return d;
}

std::string write(const std::string& name, const std::string& text) {
  const auto p = dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTriangle = R"({"vertices":["v1","v2","v3"],"edges":[
  {"id":"e1","source":"v1","target":"v2"},
  {"id":"e2","source":"v2","target":"v3"},
  {"id":"e3","source":"v1","target":"v3"}]})";

bool has_line(const std::string& text, const std::string& line) {
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) {
    if (l == line) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("analyze") {
  const auto tri = write("tri.json", kTriangle);
  auto r = run({"analyze", tri});
  CHECK(r.code == cli::kOk);
  CHECK(has_line(r.out, "spanning_trees: 3"));
  CHECK(has_line(r.out, "betti_number: 1"));
  CHECK(has_line(r.out, "connected: true"));
  CHECK(has_line(r.out, "bipartite_hazard: false"));

  const auto k4 = (dir() / "k4.json").string();
  io::write_graph(k4, generators::complete(4));
  r = run({"analyze", k4});
  CHECK(has_line(r.out, "spanning_trees: 16"));

  const auto split = write("split.json", R"({"vertices":["a","b","c","d"],"edges":[
    {"id":"e1","source":"a","target":"b"},{"id":"e2","source":"c","target":"d"}]})");
  r = run({"analyze", split});
  CHECK(r.code == cli::kOk);
  CHECK(has_line(r.out, "connected: false"));
  CHECK(has_line(r.out, "components: 2"));
  CHECK(has_line(r.out, "spanning_trees: 0"));

  CHECK(run({"analyze", (dir() / "nope.json").string()}).code == cli::kInputError);
  CHECK(run({"analyze", write("garbage.json", "[1,")}).code == cli::kInputError);
}

TEST_CASE("estimate on the reals") {
  const auto tri = write("tri.json", kTriangle);
  const auto meas = write("tri_meas.json",
                          R"({"space":"real","edges":{"e1":1,"e2":1,"e3":1},
                              "noise":{"variant":"iid","variance":1}})");
  const auto out = (dir() / "est.json").string();
  auto r = run({"estimate", tri, meas, "--method", "direct", "--out", out});
  REQUIRE(r.code == cli::kOk);
  const auto j = io::read_json(out);
  CHECK(j["vertices"]["v1"].get<double>() == 0.0);
  CHECK(j["vertices"]["v2"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(j["vertices"]["v3"].get<double>() == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(has_line(r.out, "v2: 0.666666666667"));

  r = run({"estimate", tri, meas, "--method", "jacobi", "--tol", "1e-12", "--out", out});
  REQUIRE(r.code == cli::kOk);
  const auto jj = io::read_json(out);
  CHECK(jj["vertices"]["v3"].get<double>() == doctest::Approx(4.0 / 3.0).epsilon(1e-8));

  r = run({"estimate", tri, meas, "--gauge", "mean_zero", "--out", out});
  REQUIRE(r.code == cli::kOk);
  const auto jm = io::read_json(out);
  CHECK(jm["vertices"]["v1"].get<double>() == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));

  // Without --out the JSON goes to stdout.
  r = run({"estimate", tri, meas});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("\"vertices\"") != std::string::npos);
}

TEST_CASE("estimate on the circle") {
  const auto tri = write("tri.json", kTriangle);
  const auto meas = write("tri_circle.json",
                          R"({"space":"circle","edges":{"e1":0.5,"e2":0.25,"e3":0.75},
                              "noise":{"variant":"von_mises","kappa":2}})");
  const auto out = (dir() / "est_circle.json").string();
  for (std::string method : {"eigen", "hybrid"}) {
    const auto r = run({"estimate", tri, meas, "--method", method, "--out", out});
    REQUIRE(r.code == cli::kOk);
    const auto j = io::read_json(out);
    CHECK(j["vertices"]["v2"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(j["vertices"]["v3"].get<double>() == doctest::Approx(0.75).epsilon(1e-9));
  }
}

TEST_CASE("exit codes") {
  const auto tri = write("tri.json", kTriangle);
  const auto meas = write("tri_meas.json",
                          R"({"space":"real","edges":{"e1":1,"e2":1,"e3":1},
                              "noise":{"variant":"iid","variance":1}})");
  CHECK(run({}).code == cli::kInputError);
  CHECK(run({"frobnicate"}).code == cli::kInputError);
  CHECK(run({"estimate", tri, meas, "--method", "eigen"}).code == cli::kInputError);
  CHECK(run({"estimate", tri, meas, "--ref", "v9"}).code == cli::kInputError);
  CHECK(run({"estimate", tri, meas, "--variance", "-1"}).code == cli::kInputError);
  const auto diag = write("tri_diag.json",
                          R"({"space":"real","edges":{"e1":1,"e2":1,"e3":1},
                              "noise":{"variant":"diagonal","variances":[1,2,3]}})");
  CHECK(run({"estimate", tri, diag, "--method", "jacobi"}).code == cli::kInputError);
  const auto split = write("split.json", R"({"vertices":["a","b","c","d"],"edges":[
    {"id":"e1","source":"a","target":"b"},{"id":"e2","source":"c","target":"d"}]})");
  const auto smeas = write("split_meas.json", R"({"space":"real","edges":{"e1":1,"e2":1}})");
  CHECK(run({"estimate", split, smeas}).code == cli::kInputError);

  // Iteration cap reached: numerical failure, file still written.
  const auto out = (dir() / "capped.json").string();
  fs::remove(out);
  CHECK(run({"estimate", tri, meas, "--method", "jacobi", "--tol", "1e-14", "--max-iter", "2",
             "--out", out})
            .code == cli::kNumericalError);
  CHECK(fs::exists(out));
}

TEST_CASE("design") {
  const auto path = (dir() / "path5.json").string();
  io::write_graph(path, generators::path(5));
  const auto r = run({"design", path});
  REQUIRE(r.code == cli::kOk);
  std::istringstream in(r.out);
  std::string header;
  std::string first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "rank,source,target,spanning_trees,det_fisher,tied");
  CHECK(first.rfind("1,v1,v5,5,", 0) == 0);
}

TEST_CASE("simulate") {
  const auto cfg = write("sim.json", R"({
    "graph": {"generator": "ring", "n": 5},
    "space": "circle",
    "sweep": [1, 4],
    "estimators": ["global_Q", "local_Q", "hybrid_ML"],
    "trials": 5,
    "beta": "auto",
    "seed": 11
  })");
  const auto a = dir() / "sim_a";
  const auto b = dir() / "sim_b";
  auto r = run({"simulate", cfg, "--out", a.string()});
  REQUIRE(r.code == cli::kOk);
  r = run({"simulate", cfg, "--out", b.string(), "--threads", "3"});
  REQUIRE(r.code == cli::kOk);
  for (const char* f : {"trials.csv", "summary.csv", "reference.csv"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  std::istringstream rows(slurp(a / "trials.csv"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(rows, line)) ++count;
  CHECK(count == 1 + 2 * 5 * 3);

  // Seed precedence: --seed over the environment over the file.
  ::setenv(cli::kSeedVariable, "99", 1);
  run({"simulate", cfg, "--out", b.string()});
  const auto env_run = slurp(b / "trials.csv");
  run({"simulate", cfg, "--out", b.string(), "--seed", "11"});
  const auto flag_run = slurp(b / "trials.csv");
  ::unsetenv(cli::kSeedVariable);
  CHECK(env_run != slurp(a / "trials.csv"));
  CHECK(flag_run == slurp(a / "trials.csv"));
  ::setenv(cli::kSeedVariable, "not-a-number", 1);
  CHECK(run({"simulate", cfg, "--out", b.string()}).code == cli::kInputError);
  ::unsetenv(cli::kSeedVariable);
}
