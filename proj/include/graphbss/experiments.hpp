#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graphbss/config.hpp"
#include "graphbss/crb.hpp"
#include "graphbss/csv.hpp"
#include "graphbss/graph_generators.hpp"
#include "graphbss/metrics.hpp"
#include "graphbss/ml.hpp"
#include "graphbss/parallel.hpp"
#include "graphbss/scenario.hpp"
#include "graphbss/separators.hpp"

namespace graphbss {

/** Execution knobs shared by every experiment; config values fill the gaps. */
struct RunOptions {
  std::uint64_t seed = 1;
  long reps = 0;  // 0: use the experiment default (or the config's `reps`)
  int threads = 1;
  bool timing = false;  // adds a wall_ms column; off by default so bytes are reproducible
};

namespace detail {

// Stream-tree namespaces: every (experiment, scenario ordinal) pair gets its
// own child of the master stream, and repetitions are children of that, so
// thread scheduling can never reorder draws.
inline constexpr std::uint64_t kFig1Base = 10000;
inline constexpr std::uint64_t kFig2Base = 20000;
inline constexpr std::uint64_t kFig3Base = 30000;

inline std::shared_ptr<const AdjacencyMatrix> own(AdjacencyMatrix&& w) {
  return std::make_shared<const AdjacencyMatrix>(std::move(w));
}

inline const std::set<std::string> kCommonKeys = {"experiment", "seed",   "reps",
                                                  "threads",    "timing", "out"};

inline std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kCommonKeys.begin(), kCommonKeys.end());
  return keys;
}

inline long resolve_reps(const Config& cfg, const RunOptions& opt, long fallback) {
  const long reps = opt.reps > 0 ? opt.reps : cfg.get_int("reps", fallback);
  if (reps < 1) throw ConfigError("reps must be at least 1");
  return reps;
}

/** Shared result-table emitter; every experiment writes the same columns. */
class ResultTable {
 public:
  ResultTable(std::ostream& out, bool timing)
      : timing_(timing), writer_(out, header(timing)) {}

  struct Row {
    std::string experiment;
    std::string scenario;
    std::uint64_t seed = 0;
    std::string estimator;
    std::string hyperparameters;
    int n = 0;
    int p = 0;
    long reps = 0;
    std::string quantity;
    std::string theta2;       // sweep coordinate; empty when the experiment has none
    std::string graph_policy; // fresh_per_rep | fixed_pair
    double value = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
    bool has_se = true;
    std::string status = "ok";
    long failed = -1;  // negative: leave the cell empty
    double wall_ms = std::numeric_limits<double>::quiet_NaN();
  };

  void add(const Row& r) {
    std::vector<std::string> cells = {
        r.experiment,
        r.scenario,
        CsvWriter::format(r.seed),
        r.estimator,
        r.hyperparameters,
        CsvWriter::format(r.n),
        CsvWriter::format(r.p),
        CsvWriter::format(r.reps),
        r.quantity,
        r.theta2,
        r.graph_policy,
        CsvWriter::format(r.value),
        r.has_se ? CsvWriter::format(r.se) : std::string(),
        r.status,
        r.failed >= 0 ? CsvWriter::format(r.failed) : std::string()};
    if (timing_)
      cells.push_back(std::isnan(r.wall_ms) ? std::string() : CsvWriter::format(r.wall_ms));
    writer_.row(cells);
  }

 private:
  static std::vector<std::string> header(bool timing) {
    std::vector<std::string> h = {"experiment", "scenario", "seed",    "estimator",
                                  "hyperparameters", "n",   "p",       "reps",
                                  "quantity",   "theta2",   "graph_policy", "value",
                                  "se",         "status",   "failed"};
    if (timing) h.push_back("wall_ms");
    return h;
  }

  bool timing_;
  CsvWriter writer_;
};

inline double elapsed_ms(const std::chrono::steady_clock::time_point& from) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - from)
      .count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Several adjacency matrices for one reference graph ("fig1"): P=4 Gaussian
// sources on a reference graph and three perturbations of it, separated by
// graph decorrelation with growing graph sets.
// ---------------------------------------------------------------------------

inline void run_fig1(const Config& cfg, const RunOptions& opt, std::ostream& out) {
  cfg.check_known(detail::with_common({"fig1.n", "fig1.eps", "fig1.models"}));
  const int n = static_cast<int>(cfg.get_int("fig1.n", 500));
  const double eps = cfg.get_double("fig1.eps", 0.05);
  const long reps = detail::resolve_reps(cfg, opt, 200);
  std::vector<long> models = {1, 2, 3, 4};
  if (cfg.has("fig1.models")) models = cfg.get_int_list("fig1.models");
  for (long m : models)
    if (m < 1 || m > 4) throw ConfigError("fig1.models entries must lie in 1..4");

  constexpr int kSources = 4;
  const std::array<double, kSources> theta = {0.32, 0.16, 0.08, 0.04};
  // deletion/insertion probability pairs, ordered by increasing distortion
  const std::array<std::pair<double, double>, 4> error_levels = {
      std::make_pair(0.19, 0.01), std::make_pair(0.38, 0.02), std::make_pair(0.57, 0.03),
      std::make_pair(0.76, 0.04)};
  constexpr int kExtraGraphs = 12;
  const std::array<const char*, 3> estimator_names = {"gamma1", "gamma2", "gamma3"};
  const std::array<const char*, 3> hyper = {"lambda=1;k=1;graphs=1", "lambda=1;k=1;graphs=4",
                                            "lambda=1;k=1;graphs=16"};

  struct RepOut {
    std::array<double, 3> value{};
    std::array<bool, 3> converged{};
    std::array<bool, 3> errored{};
    std::array<double, 3> wall{};
  };

  detail::ResultTable table(out, opt.timing);
  const RandomStream root(opt.seed);
  const Matrix identity = Matrix::Identity(kSources, kSources);

  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const long model = models[mi];
    const auto [e1, e2] = error_levels[static_cast<std::size_t>(model - 1)];
    const RandomStream scenario_stream =
        root.child(detail::kFig1Base + static_cast<std::uint64_t>(model - 1));

    const auto results = parallel_map<RepOut>(
        static_cast<int>(reps), opt.threads, [&](int rep) {
          const RandomStream rs = scenario_stream.child(static_cast<std::uint64_t>(rep));
          std::vector<std::shared_ptr<const AdjacencyMatrix>> graphs;
          graphs.reserve(kSources + kExtraGraphs);
          {
            RandomStream g0 = rs.child(channel::graphs + 0);
            graphs.push_back(detail::own(erdos_renyi(n, eps, g0)));
          }
          for (int g = 1; g < kSources; ++g) {
            RandomStream gs = rs.child(channel::graphs + static_cast<std::uint64_t>(g));
            graphs.push_back(detail::own(graph_error(*graphs[0], e1, e2, gs)));
          }
          for (int g = 0; g < kExtraGraphs; ++g) {
            RandomStream gs =
                rs.child(channel::graphs + static_cast<std::uint64_t>(kSources + g));
            graphs.push_back(detail::own(erdos_renyi(n, eps, gs)));
          }

          Scenario scenario;
          scenario.p = kSources;
          scenario.n = n;
          scenario.omega = identity;
          for (int p = 0; p < kSources; ++p)
            scenario.sources.push_back(
                {graphs[static_cast<std::size_t>(p)], Vector::Constant(1, theta[p]),
                 std::nullopt, InnovationLaw::gaussian()});
          const MixResult data = mix(scenario, rs);

          const std::array<int, 3> set_sizes = {1, kSources, kSources + kExtraGraphs};
          RepOut o;
          for (std::size_t e = 0; e < set_sizes.size(); ++e) {
            GraphSet gs;
            for (int g = 0; g < set_sizes[e]; ++g)
              gs.entries.push_back({graphs[static_cast<std::size_t>(g)], 1});
            const auto t0 = std::chrono::steady_clock::now();
            try {
              const SeparationResult res = grade(data.x, gs);
              const double md = md_index(res.gamma, identity);
              o.value[e] = n * (kSources - 1) * md * md;
              o.converged[e] = res.converged;
            } catch (const NumericalError&) {
              o.errored[e] = true;
            }
            o.wall[e] = detail::elapsed_ms(t0);
          }
          return o;
        });

    for (std::size_t e = 0; e < estimator_names.size(); ++e) {
      std::vector<double> values;
      long failed = 0;
      double wall = 0.0;
      for (const RepOut& r : results) {
        if (r.errored[e]) {
          ++failed;
        } else {
          values.push_back(r.value[e]);
          if (!r.converged[e]) ++failed;
        }
        wall += r.wall[e];
      }
      const MeanSe ms = mean_se(values);
      detail::ResultTable::Row row;
      row.experiment = "fig1";
      row.scenario = "model" + std::to_string(model);
      row.seed = opt.seed;
      row.estimator = estimator_names[e];
      row.hyperparameters = hyper[e];
      row.n = n;
      row.p = kSources;
      row.reps = reps;
      row.quantity = "scaled_md2";
      row.graph_policy = "fresh_per_rep";
      row.value = ms.mean;
      row.se = ms.se;
      row.failed = failed;
      row.wall_ms = wall / static_cast<double>(reps);
      table.add(row);
    }
  }
}

// ---------------------------------------------------------------------------
// Bound-versus-estimator sweep ("fig2"): two Gaussian sources on graph pairs
// drawn from community / geometric / sparse random models, the second filter
// parameter swept over a grid. Emits the identity-mixing bound on a fixed
// representative graph pair plus Monte Carlo entry variances for graph
// decorrelation and the two grid-likelihood variants.
// ---------------------------------------------------------------------------

namespace detail {

enum class GraphKind { community, geometric, er };

inline AdjacencyMatrix draw_graph(GraphKind kind, int n, RandomStream& rng) {
  switch (kind) {
    case GraphKind::community: return sbm_two_block(n, 0.13, 0.01, rng);
    case GraphKind::geometric: return geometric_graph(n, 0.16, rng);
    case GraphKind::er: return erdos_renyi(n, 0.07, rng);
  }
  throw ParameterError("unreachable graph kind");
}

struct Fig2Combo {
  const char* id;
  GraphKind first;
  GraphKind second;
  bool shared;  // both sources on one realization
};

inline const std::array<Fig2Combo, 4> kFig2Combos = {
    Fig2Combo{"c1", GraphKind::community, GraphKind::geometric, false},
    Fig2Combo{"c2", GraphKind::community, GraphKind::er, false},
    Fig2Combo{"c3", GraphKind::geometric, GraphKind::er, false},
    Fig2Combo{"c4", GraphKind::community, GraphKind::community, true}};

/**
 * Grid-likelihood estimate with the initial rotation taken from a
 * decorrelation result. The initializer's row order carries no meaning, so
 * both row assignments are fitted and the better joint likelihood wins;
 * rotations explore one orientation class and the row swap covers the other.
 */
inline MlTwoSourcesResult ml_best_pairing(const Matrix& x, const AdjacencyMatrix& w1,
                                          const AdjacencyMatrix& w2,
                                          const std::vector<double>& theta_grid,
                                          const std::vector<double>& phi_grid, const Matrix& init,
                                          MlOptions opts) {
  opts.init_gamma = init;
  const MlTwoSourcesResult direct = ml_two_sources(x, w1, w2, theta_grid, phi_grid, opts);
  Matrix swapped(2, 2);
  swapped.row(0) = init.row(1);
  swapped.row(1) = init.row(0);
  opts.init_gamma = swapped;
  const MlTwoSourcesResult crossed = ml_two_sources(x, w1, w2, theta_grid, phi_grid, opts);
  return crossed.loglik > direct.loglik ? crossed : direct;
}

}  // namespace detail

inline void run_fig2(const Config& cfg, const RunOptions& opt, std::ostream& out) {
  cfg.check_known(detail::with_common(
      {"fig2.n", "fig2.theta1", "fig2.theta2", "fig2.combos", "fig2.ml_theta", "fig2.ml_phi"}));
  const int n = static_cast<int>(cfg.get_int("fig2.n", 250));
  const double theta1 = cfg.get_double("fig2.theta1", 0.1);
  const std::vector<double> theta2 =
      cfg.has("fig2.theta2") ? cfg.get_double_list("fig2.theta2") : make_grid(0.01, 0.4, 0.01);
  const long reps = detail::resolve_reps(cfg, opt, 500);
  const std::vector<double> ml_theta =
      cfg.has("fig2.ml_theta") ? cfg.get_double_list("fig2.ml_theta") : make_grid(0.0, 0.60, 0.005);
  const std::vector<double> ml_phi =
      cfg.has("fig2.ml_phi") ? cfg.get_double_list("fig2.ml_phi")
                             : make_grid(-0.5 * M_PI, 0.5 * M_PI, M_PI / 720.0);

  std::vector<std::string> combo_ids = {"c1", "c2", "c3", "c4"};
  if (cfg.has("fig2.combos")) combo_ids = cfg.get_string_list("fig2.combos");
  std::vector<detail::Fig2Combo> combos;
  for (const std::string& id : combo_ids) {
    bool found = false;
    for (const auto& c : detail::kFig2Combos)
      if (id == c.id) {
        combos.push_back(c);
        found = true;
      }
    if (!found) throw ConfigError("unknown fig2 combo '" + id + "'");
  }

  const int grid_size = static_cast<int>(theta2.size());
  constexpr int kEstimators = 3;  // grade, ml, ml_oracle
  const std::array<const char*, kEstimators> estimator_names = {"grade", "ml", "ml_oracle"};
  const std::string ml_steps =
      ";theta_step=" +
      CsvWriter::format(ml_theta.size() > 1 ? ml_theta[1] - ml_theta[0] : 0.0) + ";phi_step=" +
      CsvWriter::format(ml_phi.size() > 1 ? ml_phi[1] - ml_phi[0] : 0.0);
  const std::array<std::string, kEstimators> hyper = {"lambda=1;k=1", "init=grade" + ml_steps,
                                                      "init=oracle" + ml_steps};

  struct Cell {
    Matrix aligned;
    bool converged = false;
    bool errored = false;
    double wall = 0.0;
  };
  struct RepOut {
    std::vector<std::array<Cell, kEstimators>> grid;
  };

  detail::ResultTable table(out, opt.timing);
  const RandomStream root(opt.seed);
  const Matrix identity = Matrix::Identity(2, 2);

  for (std::size_t ci = 0; ci < combos.size(); ++ci) {
    const detail::Fig2Combo& combo = combos[ci];
    std::uint64_t combo_ordinal = 0;
    for (std::size_t k = 0; k < detail::kFig2Combos.size(); ++k)
      if (std::string(detail::kFig2Combos[k].id) == combo.id) combo_ordinal = k;

    // The bound is evaluated on one representative pair per combination,
    // drawn from a dedicated stream so it is independent of the Monte Carlo
    // repetitions and of the repetition count.
    {
      RandomStream crb_stream = root.child(channel::crb_graphs + combo_ordinal);
      RandomStream g1s = crb_stream.child(0);
      RandomStream g2s = crb_stream.child(1);
      const auto g1 = detail::own(detail::draw_graph(combo.first, n, g1s));
      const auto g2 =
          combo.shared ? g1 : detail::own(detail::draw_graph(combo.second, n, g2s));
      const auto model1 = std::make_shared<Gma1NormalizedModel>(g1);
      const auto model2 = std::make_shared<Gma1NormalizedModel>(g2);

      for (int t = 0; t < grid_size; ++t) {
        detail::ResultTable::Row row;
        row.experiment = "fig2";
        row.scenario = combo.id;
        row.seed = opt.seed;
        row.estimator = "crb";
        row.hyperparameters = "model=gma1_normalized";
        row.n = n;
        row.p = 2;
        row.reps = reps;
        row.theta2 = CsvWriter::format(theta2[static_cast<std::size_t>(t)]);
        row.graph_policy = "fixed_pair";
        row.has_se = false;

        double total = std::numeric_limits<double>::infinity();
        double offdiag = std::numeric_limits<double>::infinity();
        std::string status = "ok";
        try {
          const std::vector<SourceModel> models = {
              {model1, Vector::Constant(1, theta1)},
              {model2, Vector::Constant(1, theta2[static_cast<std::size_t>(t)])}};
          const Matrix bound = crb_omega(identity, models);
          total = n * bound.trace();
          offdiag = n * (bound(1, 1) + bound(2, 2));
        } catch (const NonIdentifiableError&) {
          status = "non_identifiable";
        }
        row.quantity = "total";
        row.value = total;
        row.status = status;
        table.add(row);
        row.quantity = "offdiag";
        row.value = offdiag;
        table.add(row);
      }
    }

    const RandomStream scenario_stream = root.child(detail::kFig2Base + combo_ordinal);
    const auto results = parallel_map<RepOut>(
        static_cast<int>(reps), opt.threads, [&](int rep) {
          const RandomStream rs = scenario_stream.child(static_cast<std::uint64_t>(rep));
          RandomStream g1s = rs.child(channel::graphs + 0);
          RandomStream g2s = rs.child(channel::graphs + 1);
          const auto g1 = detail::own(detail::draw_graph(combo.first, n, g1s));
          const auto g2 =
              combo.shared ? g1 : detail::own(detail::draw_graph(combo.second, n, g2s));
          const auto lik1 = std::make_shared<Gma1Likelihood>(*g1);
          const auto lik2 = combo.shared ? lik1 : std::make_shared<Gma1Likelihood>(*g2);

          GraphSet gs;
          gs.entries.push_back({g1, 1});
          gs.entries.push_back({g2, 1});

          MlOptions ml_opts;
          ml_opts.lik1 = lik1;
          ml_opts.lik2 = lik2;

          RepOut o;
          o.grid.resize(static_cast<std::size_t>(grid_size));
          for (int t = 0; t < grid_size; ++t) {
            Scenario scenario;
            scenario.p = 2;
            scenario.n = n;
            scenario.omega = identity;
            scenario.sources.push_back(
                {g1, Vector::Constant(1, theta1), std::nullopt, InnovationLaw::gaussian()});
            scenario.sources.push_back({g2,
                                        Vector::Constant(1, theta2[static_cast<std::size_t>(t)]),
                                        std::nullopt, InnovationLaw::gaussian()});
            // The same repetition stream feeds every grid point, so the grid
            // sweep reuses one set of innovations (paired comparisons).
            const MixResult data = mix(scenario, rs);
            auto& cells = o.grid[static_cast<std::size_t>(t)];

            auto t0 = std::chrono::steady_clock::now();
            Matrix init_gamma;
            try {
              const SeparationResult res = grade(data.x, gs);
              cells[0].aligned = align_mixing(res.gamma.inverse(), identity);
              cells[0].converged = res.converged;
              init_gamma = res.gamma;
            } catch (const NumericalError&) {
              cells[0].errored = true;
            }
            cells[0].wall = detail::elapsed_ms(t0);

            t0 = std::chrono::steady_clock::now();
            try {
              if (cells[0].errored) throw NumericalError("no decorrelation initializer");
              const MlTwoSourcesResult res = detail::ml_best_pairing(
                  data.x, *g1, *g2, ml_theta, ml_phi, init_gamma, ml_opts);
              cells[1].aligned = align_mixing(res.gamma.inverse(), identity);
              cells[1].converged = res.init_converged;
            } catch (const NumericalError&) {
              cells[1].errored = true;
            }
            cells[1].wall = detail::elapsed_ms(t0);

            t0 = std::chrono::steady_clock::now();
            try {
              MlOptions oracle_opts = ml_opts;
              oracle_opts.init_gamma = identity;  // true unmixing for omega = I
              const MlTwoSourcesResult res =
                  ml_two_sources(data.x, *g1, *g2, ml_theta, ml_phi, oracle_opts);
              cells[2].aligned = align_mixing(res.gamma.inverse(), identity);
              cells[2].converged = true;
            } catch (const NumericalError&) {
              cells[2].errored = true;
            }
            cells[2].wall = detail::elapsed_ms(t0);
          }
          return o;
        });

    for (int t = 0; t < grid_size; ++t) {
      for (int e = 0; e < kEstimators; ++e) {
        std::vector<Matrix> aligned;
        long failed = 0;
        double wall = 0.0;
        for (const RepOut& r : results) {
          const Cell& c = r.grid[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
          if (c.errored) {
            ++failed;
          } else {
            aligned.push_back(c.aligned);
            if (!c.converged) ++failed;
          }
          wall += c.wall;
        }
        const VarianceAggregate agg = scaled_entry_variance(aligned, n);

        detail::ResultTable::Row row;
        row.experiment = "fig2";
        row.scenario = combo.id;
        row.seed = opt.seed;
        row.estimator = estimator_names[static_cast<std::size_t>(e)];
        row.hyperparameters = hyper[static_cast<std::size_t>(e)];
        row.n = n;
        row.p = 2;
        row.reps = reps;
        row.theta2 = CsvWriter::format(theta2[static_cast<std::size_t>(t)]);
        row.graph_policy = "fresh_per_rep";
        row.failed = failed;
        row.wall_ms = wall / static_cast<double>(reps);
        row.quantity = "total";
        row.value = agg.total;
        row.se = agg.total_se;
        table.add(row);
        row.quantity = "offdiag";
        row.value = agg.offdiag;
        row.se = agg.offdiag_se;
        table.add(row);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Estimator comparison across source laws and sizes ("fig3"): four sources
// per model, plain and graph-aware separation side by side.
// ---------------------------------------------------------------------------

namespace detail {

struct Fig3Model {
  const char* id;
  bool shared_graph;
  std::array<double, 4> theta;
  std::array<const char*, 4> innovations;
};

inline const std::array<Fig3Model, 4> kFig3Models = {
    Fig3Model{"m1", true, {0.02, 0.04, 0.06, 0.08},
              {"student_t:5", "student_t:10", "student_t:15", "gaussian"}},
    Fig3Model{"m2", true, {0.05, 0.06, 0.07, 0.08},
              {"student_t:5", "uniform", "exponential", "gaussian"}},
    Fig3Model{"m3", false, {0.05, 0.05, 0.05, 0.05},
              {"student_t:15", "student_t:15", "student_t:15", "student_t:15"}},
    Fig3Model{"m4", true, {0.04, 0.04, 0.08, 0.08},
              {"student_t:15", "gaussian", "uniform", "gaussian"}}};

}  // namespace detail

inline void run_fig3(const Config& cfg, const RunOptions& opt, std::ostream& out) {
  cfg.check_known(detail::with_common({"fig3.n", "fig3.eps", "fig3.models", "fig3.estimators",
                                       "fig3.lambda_jade", "fig3.lambda_fastica"}));
  std::vector<long> sizes = {250, 500, 1000};
  if (cfg.has("fig3.n")) sizes = cfg.get_int_list("fig3.n");
  const double eps = cfg.get_double("fig3.eps", 0.05);
  const long reps = detail::resolve_reps(cfg, opt, 200);
  const double lambda_jade = cfg.get_double("fig3.lambda_jade", 0.8);
  const double lambda_fastica = cfg.get_double("fig3.lambda_fastica", 0.001);

  std::vector<std::string> model_ids = {"m1", "m2", "m3", "m4"};
  if (cfg.has("fig3.models")) model_ids = cfg.get_string_list("fig3.models");
  std::vector<detail::Fig3Model> models;
  for (const std::string& id : model_ids) {
    bool found = false;
    for (const auto& m : detail::kFig3Models)
      if (id == m.id) {
        models.push_back(m);
        found = true;
      }
    if (!found) throw ConfigError("unknown fig3 model '" + id + "'");
  }

  std::vector<std::string> estimators = {"fastica_sq", "jade", "grade", "graph_jade",
                                         "graph_fastica"};
  if (cfg.has("fig3.estimators")) estimators = cfg.get_string_list("fig3.estimators");
  const std::set<std::string> known_estimators = {"fastica_sq", "jade", "grade", "graph_jade",
                                                  "graph_fastica"};
  for (const std::string& e : estimators)
    if (!known_estimators.count(e)) throw ConfigError("unknown fig3 estimator '" + e + "'");
  const int n_estimators = static_cast<int>(estimators.size());

  struct Cell {
    double value = 0.0;
    bool converged = false;
    bool errored = false;
    double wall = 0.0;
  };
  struct RepOut {
    std::vector<Cell> cells;
  };

  constexpr int kSources = 4;
  detail::ResultTable table(out, opt.timing);
  const RandomStream root(opt.seed);
  const Matrix identity = Matrix::Identity(kSources, kSources);

  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const detail::Fig3Model& model = models[mi];
    std::uint64_t model_ordinal = 0;
    for (std::size_t k = 0; k < detail::kFig3Models.size(); ++k)
      if (std::string(detail::kFig3Models[k].id) == model.id) model_ordinal = k;

    for (std::size_t ni = 0; ni < sizes.size(); ++ni) {
      const int n = static_cast<int>(sizes[ni]);
      const RandomStream scenario_stream =
          root.child(detail::kFig3Base + model_ordinal * 16 + ni);

      const auto results = parallel_map<RepOut>(
          static_cast<int>(reps), opt.threads, [&](int rep) {
            const RandomStream rs = scenario_stream.child(static_cast<std::uint64_t>(rep));
            std::vector<std::shared_ptr<const AdjacencyMatrix>> graphs;
            const int n_graphs = model.shared_graph ? 1 : kSources;
            for (int g = 0; g < n_graphs; ++g) {
              RandomStream gstream = rs.child(channel::graphs + static_cast<std::uint64_t>(g));
              graphs.push_back(detail::own(erdos_renyi(n, eps, gstream)));
            }

            Scenario scenario;
            scenario.p = kSources;
            scenario.n = n;
            scenario.omega = identity;
            for (int p = 0; p < kSources; ++p)
              scenario.sources.push_back(
                  {graphs[model.shared_graph ? 0 : static_cast<std::size_t>(p)],
                   Vector::Constant(1, model.theta[static_cast<std::size_t>(p)]), std::nullopt,
                   InnovationLaw::parse(model.innovations[static_cast<std::size_t>(p)])});
            const MixResult data = mix(scenario, rs);

            GraphSet gs;
            for (const auto& g : graphs) gs.entries.push_back({g, 1});

            RepOut o;
            o.cells.resize(static_cast<std::size_t>(n_estimators));
            for (int e = 0; e < n_estimators; ++e) {
              Cell& cell = o.cells[static_cast<std::size_t>(e)];
              const std::string& name = estimators[static_cast<std::size_t>(e)];
              const auto t0 = std::chrono::steady_clock::now();
              try {
                SeparationResult res;
                if (name == "fastica_sq") {
                  FastIcaOptions fo;
                  fo.restarts = rs.child(channel::restarts + static_cast<std::uint64_t>(e));
                  res = fastica_sq(data.x, fo);
                } else if (name == "jade") {
                  res = jade(data.x);
                } else if (name == "grade") {
                  res = grade(data.x, gs);
                } else if (name == "graph_jade") {
                  res = graph_jade(data.x, gs, lambda_jade);
                } else {
                  FastIcaOptions fo;
                  fo.restarts = rs.child(channel::restarts + static_cast<std::uint64_t>(e));
                  res = graph_fastica(data.x, gs, lambda_fastica, fo);
                }
                const double md = md_index(res.gamma, identity);
                cell.value = n * (kSources - 1) * md * md;
                cell.converged = res.converged;
              } catch (const NumericalError&) {
                cell.errored = true;
              }
              cell.wall = detail::elapsed_ms(t0);
            }
            return o;
          });

      for (int e = 0; e < n_estimators; ++e) {
        std::vector<double> values;
        long failed = 0;
        double wall = 0.0;
        for (const RepOut& r : results) {
          const Cell& c = r.cells[static_cast<std::size_t>(e)];
          if (c.errored) {
            ++failed;
          } else {
            values.push_back(c.value);
            if (!c.converged) ++failed;
          }
          wall += c.wall;
        }
        const MeanSe ms = mean_se(values);
        const std::string& name = estimators[static_cast<std::size_t>(e)];

        detail::ResultTable::Row row;
        row.experiment = "fig3";
        row.scenario = model.id;
        row.seed = opt.seed;
        row.estimator = name;
        if (name == "graph_jade")
          row.hyperparameters = "lambda=" + CsvWriter::format(lambda_jade) + ";k=1";
        else if (name == "graph_fastica")
          row.hyperparameters = "lambda=" + CsvWriter::format(lambda_fastica) + ";k=1";
        else if (name == "grade")
          row.hyperparameters = "lambda=1;k=1";
        else if (name == "fastica_sq")
          row.hyperparameters = "nonlinearity=tanh";
        row.n = n;
        row.p = kSources;
        row.reps = reps;
        row.quantity = "scaled_md2";
        row.graph_policy = "fresh_per_rep";
        row.value = ms.mean;
        row.se = ms.se;
        row.failed = failed;
        row.wall_ms = wall / static_cast<double>(reps);
        table.add(row);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Standalone bound sweep, graph generation and one-shot separation.
// ---------------------------------------------------------------------------

namespace detail {

/** `community`, `geometric`, `er`, or an edge-list path (anything with a slash
 *  or dot). Returns the drawn or loaded graph. */
inline AdjacencyMatrix realize_graph_spec(const std::string& spec, int n, RandomStream& rng) {
  if (spec == "community") return sbm_two_block(n, 0.13, 0.01, rng);
  if (spec == "geometric") return geometric_graph(n, 0.16, rng);
  if (spec == "er") return erdos_renyi(n, 0.07, rng);
  if (spec.find('/') != std::string::npos || spec.find('.') != std::string::npos)
    return AdjacencyMatrix::load_edge_list(spec);
  throw ConfigError("unknown graph spec '" + spec + "'");
}

}  // namespace detail

inline void run_crb_sweep(const Config& cfg, const RunOptions& opt, std::ostream& out) {
  cfg.check_known(detail::with_common(
      {"crb.n", "crb.graph1", "crb.graph2", "crb.shared", "crb.theta1", "crb.theta2"}));
  const int n = static_cast<int>(cfg.get_int("crb.n", 250));
  const std::string spec1 = cfg.get_string("crb.graph1", "community");
  const std::string spec2 = cfg.get_string("crb.graph2", "er");
  const bool shared = cfg.get_bool("crb.shared", false);
  const double theta1 = cfg.get_double("crb.theta1", 0.1);
  const std::vector<double> theta2 =
      cfg.has("crb.theta2") ? cfg.get_double_list("crb.theta2") : make_grid(0.01, 0.4, 0.01);

  const RandomStream root(opt.seed);
  RandomStream g1s = root.child(channel::crb_graphs + 0);
  RandomStream g2s = root.child(channel::crb_graphs + 1);
  const auto g1 = detail::own(detail::realize_graph_spec(spec1, n, g1s));
  const auto g2 = shared ? g1 : detail::own(detail::realize_graph_spec(spec2, n, g2s));
  if (g1->n() != g2->n()) throw ConfigError("crb graphs must have matching node counts");
  const auto model1 = std::make_shared<Gma1NormalizedModel>(g1);
  const auto model2 = std::make_shared<Gma1NormalizedModel>(g2);
  const int n_nodes = g1->n();

  detail::ResultTable table(out, opt.timing);
  for (double t2 : theta2) {
    detail::ResultTable::Row row;
    row.experiment = "crb_sweep";
    row.scenario = spec1 + "+" + (shared ? "shared" : spec2);
    row.seed = opt.seed;
    row.estimator = "crb";
    row.hyperparameters = "model=gma1_normalized;theta1=" + CsvWriter::format(theta1);
    row.n = n_nodes;
    row.p = 2;
    row.reps = 0;
    row.theta2 = CsvWriter::format(t2);
    row.graph_policy = "fixed_pair";
    row.has_se = false;

    double total = std::numeric_limits<double>::infinity();
    double offdiag = std::numeric_limits<double>::infinity();
    std::string status = "ok";
    try {
      const std::vector<SourceModel> models = {{model1, Vector::Constant(1, theta1)},
                                               {model2, Vector::Constant(1, t2)}};
      const Matrix bound = crb_omega(Matrix::Identity(2, 2), models);
      total = n_nodes * bound.trace();
      offdiag = n_nodes * (bound(1, 1) + bound(2, 2));
    } catch (const NonIdentifiableError&) {
      status = "non_identifiable";
    }
    row.quantity = "total";
    row.value = total;
    row.status = status;
    table.add(row);
    row.quantity = "offdiag";
    row.value = offdiag;
    table.add(row);
  }
}

/** Draws one graph from config keys and writes it as an edge list. */
inline void run_gen_graph(const Config& cfg, const RunOptions& opt, const std::string& out_path) {
  cfg.check_known(detail::with_common(
      {"graph.kind", "graph.n", "graph.eps", "graph.p_in", "graph.p_out", "graph.radius"}));
  const std::string kind = cfg.get_string("graph.kind");
  const int n = static_cast<int>(cfg.get_int("graph.n"));
  RandomStream rng = RandomStream(opt.seed).child(channel::graphs);
  AdjacencyMatrix w = [&]() {
    if (kind == "er") return erdos_renyi(n, cfg.get_double("graph.eps"), rng);
    if (kind == "community")
      return sbm_two_block(n, cfg.get_double("graph.p_in"), cfg.get_double("graph.p_out"), rng);
    if (kind == "geometric") return geometric_graph(n, cfg.get_double("graph.radius"), rng);
    throw ConfigError("graph.kind must be er, community or geometric");
  }();
  w.save_edge_list(out_path);
}

namespace detail {

/** Plain numeric CSV, no header: rows are components, columns are samples. */
inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw ConfigError("");
      } catch (const std::exception&) {
        throw ConfigError("bad number '" + cell + "' at " + path + ":" + std::to_string(lineno));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("ragged row at " + path + ":" + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("data file is empty: " + path);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace detail

/** Runs one estimator on a data file and writes the unmixing estimate. */
inline void run_separate(const Config& cfg, const RunOptions& opt, std::ostream& out) {
  cfg.check_known(detail::with_common({"separate.data", "separate.estimator", "separate.graphs",
                                       "separate.lambda", "separate.k"}));
  const Matrix x = detail::read_matrix_csv(cfg.get_string("separate.data"));
  const std::string name = cfg.get_string("separate.estimator");
  const int k = static_cast<int>(cfg.get_int("separate.k", 1));

  GraphSet gs;
  if (cfg.has("separate.graphs")) {
    for (const std::string& path : cfg.get_string_list("separate.graphs"))
      gs.entries.push_back({detail::own(AdjacencyMatrix::load_edge_list(path)), k});
  }
  const bool needs_graphs = name == "grade" || name == "graph_jade" || name == "graph_fastica";
  if (needs_graphs && gs.entries.empty())
    throw ConfigError("estimator '" + name + "' needs separate.graphs");

  const RandomStream root(opt.seed);
  SeparationResult res;
  if (name == "grade") {
    res = grade(x, gs);
  } else if (name == "jade") {
    res = jade(x);
  } else if (name == "graph_jade") {
    res = graph_jade(x, gs, cfg.get_double("separate.lambda", 0.8));
  } else if (name == "graph_fastica") {
    FastIcaOptions fo;
    fo.restarts = root.child(channel::restarts);
    res = graph_fastica(x, gs, cfg.get_double("separate.lambda", 0.001), fo);
  } else if (name == "fastica_sq") {
    FastIcaOptions fo;
    fo.restarts = root.child(channel::restarts);
    res = fastica_sq(x, fo);
  } else {
    throw ConfigError("unknown estimator '" + name + "'");
  }

  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < res.gamma.cols(); ++j)
    header.push_back("c" + std::to_string(j));
  CsvWriter writer(out, header);
  for (Eigen::Index i = 0; i < res.gamma.rows(); ++i) {
    std::vector<std::string> cells;
    for (Eigen::Index j = 0; j < res.gamma.cols(); ++j)
      cells.push_back(CsvWriter::format(res.gamma(i, j)));
    writer.row(cells);
  }
}

}  // namespace graphbss
