#include <catch2/catch_amalgamated.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "graphbss/graph_generators.hpp"

using namespace graphbss;

namespace {

// Oracle: k-step walk counts by exact 64-bit integer matrix multiplication.
std::vector<std::vector<std::int64_t>> integer_power(const Matrix& w, int k) {
  const int n = static_cast<int>(w.rows());
  std::vector<std::vector<std::int64_t>> a(n, std::vector<std::int64_t>(n, 0));
  std::vector<std::vector<std::int64_t>> base(n, std::vector<std::int64_t>(n, 0));
  for (int i = 0; i < n; ++i) {
    a[i][i] = 1;
    for (int j = 0; j < n; ++j) base[i][j] = static_cast<std::int64_t>(w(i, j));
  }
  for (int step = 0; step < k; ++step) {
    std::vector<std::vector<std::int64_t>> next(n, std::vector<std::int64_t>(n, 0));
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) {
        if (a[i][l] == 0) continue;
        for (int j = 0; j < n; ++j) next[i][j] += a[i][l] * base[l][j];
      }
    a = std::move(next);
  }
  return a;
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("adjacency validation rejects malformed matrices") {
  Matrix ok = Matrix::Zero(3, 3);
  ok(0, 1) = ok(1, 0) = 1.0;
  REQUIRE_NOTHROW(AdjacencyMatrix(ok));

  Matrix rect = Matrix::Zero(2, 3);
  REQUIRE_THROWS_AS(AdjacencyMatrix(rect), ParameterError);

  Matrix selfloop = ok;
  selfloop(2, 2) = 1.0;
  REQUIRE_THROWS_AS(AdjacencyMatrix(selfloop), ParameterError);

  Matrix weighted = ok;
  weighted(0, 2) = weighted(2, 0) = 0.5;
  REQUIRE_THROWS_AS(AdjacencyMatrix(weighted), ParameterError);

  Matrix asym = ok;
  asym(0, 2) = 1.0;
  REQUIRE_THROWS_AS(AdjacencyMatrix(asym), ParameterError);
}

TEST_CASE("power matches exact integer walk counts") {
  RandomStream rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    RandomStream gr = rng.child(trial);
    AdjacencyMatrix w = erdos_renyi(17, 0.3, gr);
    for (int k = 1; k <= 4; ++k) {
      const Matrix& wk = w.power(k);
      auto oracle = integer_power(w.matrix(), k);
      for (int i = 0; i < w.n(); ++i)
        for (int j = 0; j < w.n(); ++j)
          REQUIRE(wk(i, j) == static_cast<double>(oracle[i][j]));
    }
  }
}

TEST_CASE("power caching is stable and k=0 is rejected") {
  RandomStream rng(7);
  AdjacencyMatrix w = erdos_renyi(12, 0.4, rng);
  const Matrix& first = w.power(3);
  Matrix copy = first;
  const Matrix& again = w.power(3);
  REQUIRE(&first == &again);
  REQUIRE(first == copy);
  // Growing the cache must not invalidate earlier references.
  w.power(6);
  REQUIRE(first == copy);
  REQUIRE_THROWS_AS(w.power(0), ParameterError);
  REQUIRE_THROWS_AS(w.power(-2), ParameterError);
}

TEST_CASE("erdos_renyi edge count matches the binomial mean") {
  const int n = 60;
  const double eps = 0.1;
  const int seeds = 200;
  const double pairs = n * (n - 1) / 2.0;
  RandomStream master(11);
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng = master.child(s);
    total += static_cast<double>(erdos_renyi(n, eps, rng).edge_count());
  }
  const double mean = total / seeds;
  const double expect = pairs * eps;
  const double sd_of_mean = std::sqrt(pairs * eps * (1.0 - eps) / seeds);
  REQUIRE(std::abs(mean - expect) <= 3.0 * sd_of_mean);
}

TEST_CASE("erdos_renyi degenerate probabilities") {
  RandomStream rng(3);
  REQUIRE(erdos_renyi(20, 0.0, rng).edge_count() == 0);
  REQUIRE(erdos_renyi(20, 1.0, rng).edge_count() == 190);
  REQUIRE_THROWS_AS(erdos_renyi(20, -0.1, rng), ParameterError);
  REQUIRE_THROWS_AS(erdos_renyi(20, 1.1, rng), ParameterError);
  REQUIRE_THROWS_AS(erdos_renyi(0, 0.5, rng), ParameterError);
}

TEST_CASE("sbm_two_block densities match block probabilities") {
  const int n = 80;
  const double p_in = 0.2, p_out = 0.02;
  const int seeds = 200;
  const int half = n / 2;
  const double in_pairs = 2.0 * (half * (half - 1) / 2.0);
  const double out_pairs = static_cast<double>(half) * half;
  RandomStream master(13);
  double in_total = 0.0, out_total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng = master.child(s);
    AdjacencyMatrix g = sbm_two_block(n, p_in, p_out, rng);
    const Matrix& w = g.matrix();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        if ((i < half) == (j < half))
          in_total += w(i, j);
        else
          out_total += w(i, j);
      }
  }
  const double in_mean = in_total / seeds;
  const double out_mean = out_total / seeds;
  const double in_sd = std::sqrt(in_pairs * p_in * (1.0 - p_in) / seeds);
  const double out_sd = std::sqrt(out_pairs * p_out * (1.0 - p_out) / seeds);
  REQUIRE(std::abs(in_mean - in_pairs * p_in) <= 3.0 * in_sd);
  REQUIRE(std::abs(out_mean - out_pairs * p_out) <= 3.0 * out_sd);
  REQUIRE_THROWS_AS(sbm_two_block(81, p_in, p_out, master), ParameterError);
}

TEST_CASE("geometric graph mean degree matches a Monte Carlo area oracle") {
  const int n = 100;
  const double radius = 0.16;
  // Oracle: edge probability for two independent uniform points on the unit
  // square, estimated from 200000 pairs on a dedicated stream.
  RandomStream oracle_rng(999);
  const int pairs = 200000;
  int hits = 0;
  for (int t = 0; t < pairs; ++t) {
    const double dx = oracle_rng.uniform01() - oracle_rng.uniform01();
    const double dy = oracle_rng.uniform01() - oracle_rng.uniform01();
    if (dx * dx + dy * dy < radius * radius) ++hits;
  }
  const double p_edge = static_cast<double>(hits) / pairs;
  const double expect_degree = (n - 1) * p_edge;

  RandomStream master(17);
  const int seeds = 100;
  double degree_total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng = master.child(s);
    AdjacencyMatrix g = geometric_graph(n, radius, rng);
    degree_total += 2.0 * static_cast<double>(g.edge_count()) / n;
  }
  const double mean_degree = degree_total / seeds;
  REQUIRE(std::abs(mean_degree - expect_degree) <= 0.10 * expect_degree);
}

TEST_CASE("geometric graph extremes") {
  RandomStream rng(5);
  // Any two points in the unit square are closer than 1.5.
  AdjacencyMatrix full = geometric_graph(30, 1.5, rng);
  REQUIRE(full.edge_count() == 30 * 29 / 2);
  RandomStream rng2(6);
  AdjacencyMatrix empty = geometric_graph(30, 1e-9, rng2);
  REQUIRE(empty.edge_count() == 0);
  REQUIRE_THROWS_AS(geometric_graph(30, 0.0, rng), ParameterError);
}

TEST_CASE("graph_error expected edge count") {
  RandomStream base_rng(23);
  AdjacencyMatrix w0 = erdos_renyi(60, 0.2, base_rng);
  const double m0 = static_cast<double>(w0.edge_count());
  const double pairs = 60 * 59 / 2.0;
  const double eps1 = 0.3, eps2 = 0.05;
  const double expect = m0 * (1.0 - eps1) + (pairs - m0) * eps2;
  const double var = m0 * eps1 * (1.0 - eps1) + (pairs - m0) * eps2 * (1.0 - eps2);

  RandomStream master(29);
  const int seeds = 200;
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng = master.child(s);
    total += static_cast<double>(graph_error(w0, eps1, eps2, rng).edge_count());
  }
  const double mean = total / seeds;
  REQUIRE(std::abs(mean - expect) <= 3.0 * std::sqrt(var / seeds));
}

TEST_CASE("graph_error keeps the diagonal zero and stays 0/1") {
  RandomStream rng(31);
  AdjacencyMatrix w0 = erdos_renyi(40, 0.3, rng);
  for (int t = 0; t < 20; ++t) {
    RandomStream er = rng.child(t);
    AdjacencyMatrix w = graph_error(w0, 0.5, 0.5, er);
    // Construction re-validates symmetry, zero diagonal and 0/1 entries.
    REQUIRE(w.n() == 40);
  }
  RandomStream rng2(32);
  // eps1 = 1, eps2 = 1 complements the graph exactly.
  AdjacencyMatrix w1 = graph_error(w0, 1.0, 1.0, rng2);
  REQUIRE(w1.edge_count() == 40 * 39 / 2 - w0.edge_count());
  REQUIRE_THROWS_AS(graph_error(w0, -0.01, 0.5, rng2), ParameterError);
}

TEST_CASE("generators are deterministic in the stream key") {
  RandomStream a(123), b(123), c(124);
  AdjacencyMatrix ga = erdos_renyi(50, 0.1, a);
  AdjacencyMatrix gb = erdos_renyi(50, 0.1, b);
  AdjacencyMatrix gc = erdos_renyi(50, 0.1, c);
  REQUIRE(ga.same_as(gb));
  REQUIRE_FALSE(ga.same_as(gc));

  RandomStream g1(55), g2(55);
  REQUIRE(geometric_graph(40, 0.2, g1).same_as(geometric_graph(40, 0.2, g2)));
  RandomStream s1(66), s2(66);
  REQUIRE(sbm_two_block(40, 0.3, 0.02, s1).same_as(sbm_two_block(40, 0.3, 0.02, s2)));
}

TEST_CASE("child streams are independent of sibling consumption") {
  RandomStream parent(404);
  RandomStream c0 = parent.child(0);
  // Drain a sibling heavily; child(1) must be unaffected.
  RandomStream drained = parent.child(0);
  for (int i = 0; i < 1000; ++i) drained.gaussian();
  RandomStream c1a = parent.child(1);
  RandomStream c1b = parent.child(1);
  REQUIRE(c1a.bits() == c1b.bits());
  REQUIRE(c0.key() != c1a.key());
}

TEST_CASE("edge list round trip is bit exact, isolated vertices included") {
  Matrix w = Matrix::Zero(6, 6);
  w(0, 2) = w(2, 0) = 1.0;
  w(1, 4) = w(4, 1) = 1.0;
  // Node 5 is isolated and must survive the round trip.
  AdjacencyMatrix g(w);
  auto path = temp_path("graphbss_roundtrip.edges");
  g.save_edge_list(path.string());
  AdjacencyMatrix loaded = AdjacencyMatrix::load_edge_list(path.string());
  REQUIRE(loaded.n() == 6);
  REQUIRE(loaded.same_as(g));
  std::filesystem::remove(path);

  RandomStream rng(77);
  AdjacencyMatrix big = erdos_renyi(73, 0.07, rng);
  auto path2 = temp_path("graphbss_roundtrip2.edges");
  big.save_edge_list(path2.string());
  REQUIRE(AdjacencyMatrix::load_edge_list(path2.string()).same_as(big));
  std::filesystem::remove(path2);
}

TEST_CASE("edge list parser rejects malformed input") {
  auto path = temp_path("graphbss_bad.edges");
  auto write_file = [&](const char* text) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs(text, f);
    std::fclose(f);
  };

  write_file("# nodes: 4\n0 1\n2 x\n");
  REQUIRE_THROWS_AS(AdjacencyMatrix::load_edge_list(path.string()), ParameterError);
  write_file("# nodes: 4\n0 0\n");
  REQUIRE_THROWS_AS(AdjacencyMatrix::load_edge_list(path.string()), ParameterError);
  write_file("# nodes: 3\n0 5\n");
  REQUIRE_THROWS_AS(AdjacencyMatrix::load_edge_list(path.string()), ParameterError);
  write_file("# nodes: 4\n-1 2\n");
  REQUIRE_THROWS_AS(AdjacencyMatrix::load_edge_list(path.string()), ParameterError);
  // Headerless files infer the node count from the largest index.
  write_file("0 1\n1 3\n");
  REQUIRE(AdjacencyMatrix::load_edge_list(path.string()).n() == 4);
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(AdjacencyMatrix::load_edge_list(path.string()), ParameterError);
}

TEST_CASE("sampler moments are sane") {
  RandomStream rng(808);
  const int n = 200000;
  double su = 0, su2 = 0, sg = 0, sg2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    su += u;
    su2 += u * u;
    const double g = rng.gaussian();
    sg += g;
    sg2 += g * g;
  }
  REQUIRE(std::abs(su / n - 0.5) < 0.005);
  REQUIRE(std::abs(su2 / n - 1.0 / 3.0) < 0.005);
  REQUIRE(std::abs(sg / n) < 0.01);
  REQUIRE(std::abs(sg2 / n - 1.0) < 0.02);
}
