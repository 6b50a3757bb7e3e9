#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "graphbss/config.hpp"
#include "graphbss/csv.hpp"
#include "graphbss/experiments.hpp"
#include "graphbss/parallel.hpp"

using namespace graphbss;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "graphbss_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(GRAPHBSS_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

TEST_CASE("config files parse into typed values") {
  const Config cfg = Config::parse_string(
      "# comment\n"
      "fig2.n = 250   # trailing comment\n"
      "name = community\n"
      "flag1 = yes\n"
      "flag2 = off\n"
      "big = 18446744073709551615\n"
      "ids = c1, c2,c4\n"
      "mixed = 0.1, 0.3:0.5:0.1\n");
  CHECK(cfg.get_int("fig2.n") == 250);
  CHECK(cfg.get_string("name") == "community");
  CHECK(cfg.get_bool("flag1", false));
  CHECK_FALSE(cfg.get_bool("flag2", true));
  CHECK(cfg.get_u64("big") == 18446744073709551615ULL);
  CHECK(cfg.get_string_list("ids") == std::vector<std::string>{"c1", "c2", "c4"});
  const std::vector<double> mixed = cfg.get_double_list("mixed");
  REQUIRE(mixed.size() == 4);
  CHECK(mixed[0] == 0.1);
  CHECK(mixed[1] == 0.3);
  CHECK(mixed[3] == 0.5);
  CHECK(cfg.get_int("absent", 7) == 7);
  CHECK(cfg.get_string("absent", "d") == "d");
  CHECK_FALSE(cfg.has("absent"));
}

TEST_CASE("config ranges land on exact grid values") {
  const Config cfg = Config::parse_string("grid = 0.01:0.4:0.01\n");
  const std::vector<double> grid = cfg.get_double_list("grid");
  REQUIRE(grid.size() == 40);
  // the sweep coordinate must compare equal to the plain literal, so rows
  // written from a range can be selected with string matching downstream
  CHECK(grid[9] == 0.1);
  CHECK(grid[39] == 0.4);
  CHECK(CsvWriter::format(grid[9]) == "0.1");
  CHECK(CsvWriter::format(grid[19]) == "0.2");
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS(Config::parse_string("novalue\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("bad key = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("a = \n"), ConfigError);
  const Config cfg = Config::parse_string("n = abc\nlist = 1,,2\nbool = maybe\n");
  CHECK_THROWS_AS(cfg.get_int("n"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("n"), ConfigError);
  CHECK_THROWS_AS(cfg.get_string_list("list"), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("bool", false), ConfigError);
  CHECK_THROWS_AS(cfg.get_string("missing"), ConfigError);
  CHECK_THROWS_AS(cfg.check_known({"n", "list"}), ConfigError);
  CHECK_NOTHROW(cfg.check_known({"n", "list", "bool"}));
}

TEST_CASE("csv cells are escaped per rfc 4180") {
  std::ostringstream out;
  CsvWriter writer(out, {"a", "b"});
  writer.row({"plain", "with,comma"});
  writer.row({"say \"hi\"", "line\nbreak"});
  CHECK(out.str() ==
        "a,b\r\n"
        "plain,\"with,comma\"\r\n"
        "\"say \"\"hi\"\"\",\"line\nbreak\"\r\n");
  CHECK_THROWS_AS(writer.row({"only one"}), ParameterError);
}

TEST_CASE("csv numbers use shortest round-trip form") {
  CHECK(CsvWriter::format(0.1) == "0.1");
  CHECK(CsvWriter::format(-3.0) == "-3");
  CHECK(CsvWriter::format(1.0 / 3.0) == "0.3333333333333333");
  CHECK(CsvWriter::format(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(CsvWriter::format(static_cast<std::uint64_t>(1) << 63) == "9223372036854775808");
  const double v = 0.30000000000000004;
  CHECK(std::stod(CsvWriter::format(v)) == v);
}

TEST_CASE("parallel map output is independent of the worker count") {
  auto square = [](int i) { return static_cast<long>(i) * i; };
  const std::vector<long> base = parallel_map<long>(101, 1, square);
  for (int threads : {2, 4, 16})
    CHECK(parallel_map<long>(101, threads, square) == base);
  CHECK(parallel_map<long>(0, 4, square).empty());
  CHECK_THROWS_AS(parallel_map<long>(4, 0, square), ParameterError);
}

TEST_CASE("parallel map propagates worker exceptions") {
  auto fail_at_37 = [](int i) -> int {
    if (i == 37) throw NumericalError("worker failure");
    return i;
  };
  CHECK_THROWS_AS(parallel_map<int>(64, 4, fail_at_37), NumericalError);
  CHECK_THROWS_AS(parallel_map<int>(64, 1, fail_at_37), NumericalError);
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
  const fs::path dir = test_dir() / "badcalls";
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";

  CHECK(run_cli("fig1 --out " + (dir / "o").string(), log) == 2);  // no seed anywhere
  CHECK(run_cli("--help", log) == 0);
  CHECK(run_cli("", log) == 2);  // a subcommand is required
  CHECK(run_cli("fig1 --seed 1 --reps 0 --out " + (dir / "o").string(), log) == 2);

  write_file(dir / "typo.conf", "fig1.nn = 5\n");
  CHECK(run_cli("fig1 --config " + (dir / "typo.conf").string() + " --seed 1 --out " +
                    (dir / "o").string(),
                log) == 2);

  write_file(dir / "wrongexp.conf", "experiment = fig2\n");
  CHECK(run_cli("fig1 --config " + (dir / "wrongexp.conf").string() + " --seed 1 --out " +
                    (dir / "o").string(),
                log) == 2);

  write_file(dir / "badest.conf",
             "separate.data = /nonexistent.csv\nseparate.estimator = grade\n");
  CHECK(run_cli("separate --config " + (dir / "badest.conf").string() + " --seed 1 --out " +
                    (dir / "o").string(),
                log) == 2);
}

TEST_CASE("cli reports numerical failure with exit code 3") {
  const fs::path dir = test_dir() / "numfail";
  fs::create_directories(dir);
  // two identical rows: the sample covariance is singular, whitening must fail
  std::string csv;
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < 50; ++j) csv += (j ? "," : "") + std::to_string(0.25 * j + 1);
    csv += "\n";
  }
  write_file(dir / "x.csv", csv);
  write_file(dir / "sep.conf",
             "separate.data = " + (dir / "x.csv").string() + "\nseparate.estimator = jade\n");
  CHECK(run_cli("separate --config " + (dir / "sep.conf").string() + " --seed 1 --out " +
                    dir.string(),
                (dir / "log.txt")) == 3);
}

TEST_CASE("gen-graph writes the drawn edge list") {
  const fs::path dir = test_dir() / "gen";
  fs::create_directories(dir);
  write_file(dir / "g.conf", "graph.kind = er\ngraph.n = 4\ngraph.eps = 1.0\n");
  REQUIRE(run_cli("gen-graph --config " + (dir / "g.conf").string() + " --seed 1 --out " +
                      dir.string(),
                  (dir / "log.txt")) == 0);
  // eps = 1 makes every edge certain: the complete graph on four nodes
  CHECK(slurp(dir / "graph.edges") ==
        "# nodes: 4\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n");
}

TEST_CASE("experiment output is byte-identical across reruns and worker counts") {
  const fs::path dir = test_dir() / "determinism";
  fs::create_directories(dir);
  write_file(dir / "f3.conf",
             "fig3.n = 40\nfig3.models = m3\nfig3.estimators = grade,jade\n");
  const std::string base = "fig3 --config " + (dir / "f3.conf").string() + " --seed 99 --reps 3";
  REQUIRE(run_cli(base + " --threads 1 --out " + (dir / "a").string(), dir / "log.txt") == 0);
  REQUIRE(run_cli(base + " --threads 1 --out " + (dir / "b").string(), dir / "log.txt") == 0);
  REQUIRE(run_cli(base + " --threads 4 --out " + (dir / "c").string(), dir / "log.txt") == 0);
  const std::string a = slurp(dir / "a" / "fig3.csv");
  CHECK(a == slurp(dir / "b" / "fig3.csv"));
  CHECK(a == slurp(dir / "c" / "fig3.csv"));
}

TEST_CASE("result rows carry the full run context") {
  const fs::path dir = test_dir() / "schema";
  fs::create_directories(dir);
  write_file(dir / "f1.conf", "fig1.n = 40\nfig1.models = 2\nseed = 31\n");
  REQUIRE(run_cli("fig1 --config " + (dir / "f1.conf").string() + " --reps 2 --out " +
                      dir.string(),
                  (dir / "log.txt")) == 0);
  std::istringstream in(slurp(dir / "fig1.csv"));
  std::string line;
  REQUIRE(std::getline(in, line));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  CHECK(line ==
        "experiment,scenario,seed,estimator,hyperparameters,n,p,reps,quantity,theta2,"
        "graph_policy,value,se,status,failed");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    REQUIRE(cells.size() == 15);
    CHECK(cells[0] == "fig1");
    CHECK(cells[1] == "model2");
    CHECK(cells[2] == "31");
    CHECK(cells[5] == "40");
    CHECK(cells[6] == "4");
    CHECK(cells[7] == "2");
    CHECK(cells[10] == "fresh_per_rep");
    CHECK(cells[13] == "ok");
    ++rows;
  }
  CHECK(rows == 3);  // one row per graph-set size
}

TEST_CASE("the bound sweep marks non-identifiable points instead of failing") {
  const fs::path dir = test_dir() / "sentinel";
  fs::create_directories(dir);
  write_file(dir / "f2.conf",
             "fig2.n = 30\nfig2.combos = c4\nfig2.theta2 = 0.1\n"
             "fig2.ml_theta = 0:0.4:0.1\nfig2.ml_phi = -1.5:1.5:0.25\n");
  REQUIRE(run_cli("fig2 --config " + (dir / "f2.conf").string() + " --seed 17 --reps 2 --out " +
                      dir.string(),
                  (dir / "log.txt")) == 0);
  std::istringstream in(slurp(dir / "fig2.csv"));
  std::string line;
  std::getline(in, line);
  int sentinel_rows = 0;
  int estimator_rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    REQUIRE(cells.size() == 15);
    if (cells[3] == "crb") {
      // both graphs are one community realization and theta2 equals theta1,
      // so the bound must refuse the point rather than return a number
      CHECK(cells[13] == "non_identifiable");
      CHECK(cells[11] == "inf");
      CHECK(cells[10] == "fixed_pair");
      ++sentinel_rows;
    } else {
      CHECK(cells[13] == "ok");
      ++estimator_rows;
    }
  }
  CHECK(sentinel_rows == 2);   // total and offdiag
  CHECK(estimator_rows == 6);  // three estimators, two quantities
}

TEST_CASE("separate reproduces an in-process estimate") {
  const fs::path dir = test_dir() / "separate";
  fs::create_directories(dir);
  write_file(dir / "g.conf", "graph.kind = er\ngraph.n = 100\ngraph.eps = 0.08\n");
  REQUIRE(run_cli("gen-graph --config " + (dir / "g.conf").string() + " --seed 33 --out " +
                      dir.string(),
                  (dir / "log.txt")) == 0);

  const auto graph = std::make_shared<const AdjacencyMatrix>(
      AdjacencyMatrix::load_edge_list((dir / "graph.edges").string()));
  RandomStream data_stream(606);
  Matrix x(3, 100);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = data_stream.gaussian();
  std::string csv;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      csv += (j ? "," : "") + CsvWriter::format(x(i, j));
    csv += "\n";
  }
  write_file(dir / "x.csv", csv);

  write_file(dir / "sep.conf", "separate.data = " + (dir / "x.csv").string() +
                                   "\nseparate.estimator = grade\nseparate.graphs = " +
                                   (dir / "graph.edges").string() + "\n");
  REQUIRE(run_cli("separate --config " + (dir / "sep.conf").string() + " --seed 2 --out " +
                      dir.string(),
                  (dir / "log.txt")) == 0);

  GraphSet gs;
  gs.entries.push_back({graph, 1});
  const SeparationResult expected = grade(x, gs);

  std::istringstream in(slurp(dir / "gamma.csv"));
  std::string line;
  REQUIRE(std::getline(in, line));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  CHECK(line == "c0,c1,c2");
  for (Eigen::Index i = 0; i < 3; ++i) {
    REQUIRE(std::getline(in, line));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> cells = split_csv_line(line);
    REQUIRE(cells.size() == 3);
    for (Eigen::Index j = 0; j < 3; ++j)
      CHECK_THAT(std::stod(cells[static_cast<std::size_t>(j)]),
                 Catch::Matchers::WithinAbs(expected.gamma(i, j), 1e-12));
  }

  // the same command again must give the same bytes
  const std::string first = slurp(dir / "gamma.csv");
  REQUIRE(run_cli("separate --config " + (dir / "sep.conf").string() + " --seed 2 --out " +
                      dir.string(),
                  (dir / "log.txt")) == 0);
  CHECK(first == slurp(dir / "gamma.csv"));
}
