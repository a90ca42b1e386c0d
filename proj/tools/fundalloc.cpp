#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fundalloc/csv.hpp"
#include "fundalloc/domain.hpp"
#include "fundalloc/errors.hpp"
#include "fundalloc/exact.hpp"
#include "fundalloc/heuristic.hpp"
#include "fundalloc/loss.hpp"
#include "fundalloc/net.hpp"
#include "fundalloc/rng.hpp"
#include "fundalloc/synth.hpp"
#include "fundalloc/train.hpp"

namespace {

using namespace fundalloc;

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct SimulateArgs {
  std::size_t n = 0;
  std::size_t m = 0;
  int k = 1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::size_t customer_dim = 8;
  std::size_t fund_dim = 4;
  int risk_levels = 3;
  std::string scheme = "proportional";
  double q = 0.9;
  bool truth = false;
};

int run_simulate(const SimulateArgs& args) {
  GeneratorConfig config = GeneratorConfig::defaults(args.n, args.m, args.k, args.seed,
                                                     args.customer_dim, args.fund_dim);
  config.risk_levels = args.risk_levels;
  config.q = args.q;
  config.scheme =
      args.scheme == "witness" ? DemandScheme::Witness : DemandScheme::Proportional;

  const auto [instance, truth] = generate_instance(config);
  const std::vector<LabeledSample> samples = generate_training_data(config);

  const std::string dir = args.out_dir + "/";
  csv::write_customers(dir + "customers.csv", instance.customers);
  csv::write_funds(dir + "funds.csv", instance.funds);
  csv::write_revenue(dir + "revenue.csv", instance.revenue, instance.customers, instance.funds);
  csv::write_training(dir + "training.csv", samples);
  if (args.truth) csv::write_truth(dir + "truth.csv", truth, instance.customers, instance.funds);

  std::cout << "simulate: wrote " << (args.truth ? 5 : 4) << " files to " << args.out_dir
            << " (" << args.n << " customers, " << args.m << " funds, K=" << args.k << ", "
            << samples.size() << " training samples)\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string model_out = "model.json";
  TrainConfig config;
};

int run_train(const TrainArgs& args) {
  const std::vector<LabeledSample> samples = csv::read_training(args.data);
  std::vector<double> history;
  const MlpModel model = train(samples, args.config, &history);
  model.save(args.model_out);

  double best = history.empty() ? 0.0 : history.front();
  for (double v : history) best = std::min(best, v);
  std::cout << "train: " << samples.size() << " samples, loss " << loss_kind_name(args.config.loss)
            << ", " << args.config.epochs << " epochs, best validation loss " << best << ", model "
            << args.model_out << "\n";
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string customers;
  std::string funds;
  std::string out = "revenue.csv";
  bool unshifted = false;
};

int run_predict(const PredictArgs& args) {
  const MlpModel model = MlpModel::load(args.model);
  const std::vector<Customer> customers = csv::read_customers(args.customers);
  const std::vector<Fund> funds = csv::read_funds(args.funds);

  RevenueMatrix matrix;
  if (args.unshifted) {
    // Report scale: the log-shift is inverted, E = P_c * (exp(mu + sigma^2/2) - 1).
    // Allocation should consume the default shifted output; both orderings agree
    // only approximately, so the shifted form stays the pipeline currency.
    matrix = RevenueMatrix(customers.size(), funds.size());
    for (std::size_t u = 0; u < customers.size(); ++u) {
      for (std::size_t f = 0; f < funds.size(); ++f) {
        const PredictionTriple t = model.forward(customers[u].features, funds[f].features);
        matrix.set(u, f, t.p_c * (std::exp(t.mu + 0.5 * t.sigma * t.sigma) - 1.0));
      }
    }
    matrix = apply_risk_mask(matrix, customers, funds);
  } else {
    matrix = predict_matrix(model, customers, funds);
  }
  csv::write_revenue(args.out, matrix, customers, funds);
  std::cout << "predict: wrote " << customers.size() << "x" << funds.size() << " matrix to "
            << args.out << (args.unshifted ? " (unshifted report scale)" : "") << "\n";
  return 0;
}

struct AllocateArgs {
  std::string customers;
  std::string funds;
  std::string revenue;
  int k = 1;
  std::string solver = "ha-eq8";
  bool lazy = false;
  std::string priority;
  std::string out = "allocation.csv";
  std::string stats_out = "stats.json";
};

std::vector<std::size_t> parse_priority(const std::string& text, const std::vector<Fund>& funds) {
  if (text.empty()) return {};
  std::vector<std::size_t> priority;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token =
        comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
    bool found = false;
    for (std::size_t f = 0; f < funds.size(); ++f) {
      if (std::to_string(funds[f].id) == token) {
        priority.push_back(f);
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::InvalidConfig, "--priority references unknown fund id '" + token + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return priority;
}

int run_allocate(const AllocateArgs& args) {
  const AllocationInstance instance =
      csv::read_instance(args.customers, args.funds, args.revenue, args.k);

  const ValidationReport report = validate_instance(instance);
  if (!report.feasible_necessary) {
    std::string detail;
    for (const Violation& v : report.violations) {
      if (!detail.empty()) detail += "; ";
      detail += v.code + " " + v.message;
    }
    throw Error(ErrorCode::Infeasible, detail);
  }

  AllocationResult result;
  SolverStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  if (args.solver == "ha-eq8" || args.solver == "ha-top3") {
    HaOptions options;
    options.variant = args.solver == "ha-top3" ? ScoreVariant::Top3 : ScoreVariant::Eq8;
    options.lazy = args.lazy;
    std::tie(result, stats) = allocate_ha(instance, options);
  } else if (args.solver == "manual") {
    std::tie(result, stats) = allocate_manual(instance, parse_priority(args.priority, instance.funds));
  } else if (args.solver == "exact-bf") {
    result = allocate_exact_bruteforce(instance);
    stats.objective = result.objective;
    stats.wall_ms = elapsed_ms(t0);
  } else if (args.solver == "exact-flow") {
    result = allocate_exact_flow(instance);
    stats.objective = result.objective;
    stats.wall_ms = elapsed_ms(t0);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown solver '" + args.solver + "'");
  }

  if (!is_feasible(result.assignment, instance)) {
    throw Error(ErrorCode::Infeasible,
                "solver '" + args.solver + "' produced an infeasible assignment; refusing to write output");
  }

  csv::write_allocation(args.out, result.assignment, instance.customers, instance.funds);

  nlohmann::json stats_json;
  stats_json["schema"] = 1;
  stats_json["solver"] = args.solver;
  stats_json["objective"] = result.objective;
  stats_json["wall_ms"] = stats.wall_ms;
  stats_json["rounds"] = stats.rounds;
  stats_json["gap"] = nullptr;
  std::ofstream stats_out(args.stats_out);
  if (!stats_out) throw Error(ErrorCode::IoError, "cannot open " + args.stats_out + " for writing");
  stats_out << stats_json.dump(2) << '\n';

  std::cout << "allocate: objective " << result.objective << " (solver " << args.solver << ", "
            << stats.rounds << " rounds, " << stats.wall_ms << " ms), wrote " << args.out << "\n";
  return 0;
}

struct BenchmarkArgs {
  std::vector<std::size_t> scales;
  std::size_t m = 8;
  int k = 1;
  std::uint64_t seed = 42;
  std::vector<std::string> solvers{"ha", "manual", "exact-flow"};
  std::string format = "csv";
  std::string out = "-";
};

struct BenchmarkRow {
  std::size_t scale;
  std::string solver;
  double objective;
  std::optional<double> gap;
  double wall_ms;
  long rounds;
};

int run_benchmark(const BenchmarkArgs& args) {
  if (args.scales.empty()) throw Error(ErrorCode::InvalidConfig, "--scales must be nonempty");
  for (std::size_t i = 1; i < args.scales.size(); ++i) {
    if (args.scales[i] <= args.scales[i - 1]) {
      throw Error(ErrorCode::InvalidConfig, "--scales must be strictly increasing");
    }
  }

  std::vector<BenchmarkRow> rows;
  for (std::size_t si = 0; si < args.scales.size(); ++si) {
    const std::size_t n = args.scales[si];
    GeneratorConfig config =
        GeneratorConfig::defaults(n, args.m, args.k, derive_seed(args.seed, si));
    config.risk_levels = 1;
    const auto [instance, truth] = generate_instance(config);
    (void)truth;

    std::optional<double> exact_objective;
    std::vector<BenchmarkRow> scale_rows;
    for (const std::string& solver : args.solvers) {
      BenchmarkRow row{n, solver, 0.0, std::nullopt, 0.0, 0};
      const auto t0 = std::chrono::steady_clock::now();
      if (solver == "ha") {
        const auto [result, stats] = allocate_ha(instance);
        row.objective = result.objective;
        row.wall_ms = stats.wall_ms;
        row.rounds = stats.rounds;
      } else if (solver == "manual") {
        const auto [result, stats] = allocate_manual(instance);
        row.objective = result.objective;
        row.wall_ms = stats.wall_ms;
      } else if (solver == "exact-flow") {
        const AllocationResult result = allocate_exact_flow(instance);
        row.objective = result.objective;
        row.wall_ms = elapsed_ms(t0);
        exact_objective = result.objective;
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown benchmark solver '" + solver + "'");
      }
      scale_rows.push_back(row);
    }
    for (BenchmarkRow& row : scale_rows) {
      if (exact_objective && *exact_objective > 0.0) {
        row.gap = 1.0 - row.objective / *exact_objective;
      }
      rows.push_back(row);
    }
    std::cout << "benchmark: scale " << n << " done (" << args.solvers.size() << " solvers)\n";
  }

  std::ostringstream body;
  if (args.format == "json") {
    nlohmann::json j;
    j["schema"] = 1;
    j["rows"] = nlohmann::json::array();
    for (const BenchmarkRow& row : rows) {
      nlohmann::json r;
      r["scale"] = row.scale;
      r["solver"] = row.solver;
      r["objective"] = row.objective;
      if (row.gap) {
        r["gap"] = *row.gap;
      } else {
        r["gap"] = nullptr;
      }
      r["wall_ms"] = row.wall_ms;
      r["rounds"] = row.rounds;
      j["rows"].push_back(r);
    }
    body << j.dump(2) << '\n';
  } else {
    body << "scale,solver,objective,gap,wall_ms,rounds\n";
    char buf[64];
    for (const BenchmarkRow& row : rows) {
      body << row.scale << ',' << row.solver << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", row.objective);
      body << buf << ',';
      if (row.gap) {
        std::snprintf(buf, sizeof(buf), "%.6g", *row.gap);
        body << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.3f", row.wall_ms);
      body << ',' << buf << ',' << row.rounds << '\n';
    }
  }

  if (args.out == "-") {
    std::cout << body.str();
  } else {
    std::ofstream out(args.out);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + args.out + " for writing");
    out << body.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predict-then-optimize fund allocation pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from an INI config file (command-line overrides)");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic instance and training data");
  simulate->add_option("--n", sim.n, "Number of customers")->required();
  simulate->add_option("--m", sim.m, "Number of funds")->required();
  simulate->add_option("--k", sim.k, "Impressions per customer");
  simulate->add_option("--seed", sim.seed, "Generator seed");
  simulate->add_option("--out", sim.out_dir, "Output directory");
  simulate->add_option("--customer-dim", sim.customer_dim, "Customer feature dimension");
  simulate->add_option("--fund-dim", sim.fund_dim, "Fund feature dimension");
  simulate->add_option("--risk-levels", sim.risk_levels, "Number of risk levels L");
  simulate->add_option("--scheme", sim.scheme, "Demand scheme")
      ->check(CLI::IsMember({"proportional", "witness"}));
  simulate->add_option("--q", sim.q, "Observed-conversion probability given intent");
  simulate->add_flag("--truth", sim.truth, "Also write truth.csv with ground-truth parameters");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the revenue predictor");
  train_cmd->add_option("--data", tr.data, "Training CSV")->required();
  train_cmd->add_option("--model-out", tr.model_out, "Model output path");
  train_cmd
      ->add_option_function<std::string>(
          "--loss",
          [&](const std::string& name) {
            if (name == "esj") {
              tr.config.loss = LossKind::Esj;
            } else if (name == "ziln") {
              tr.config.loss = LossKind::Ziln;
            } else {
              tr.config.loss = LossKind::Mse;
            }
          },
          "Loss function")
      ->check(CLI::IsMember({"esj", "ziln", "mse"}));
  train_cmd->add_option("--epsilon", tr.config.epsilon, "Counterfactual revenue");
  train_cmd->add_option("--seed", tr.config.seed, "Training seed");
  train_cmd->add_option("--epochs", tr.config.epochs, "Training epochs");
  train_cmd->add_option("--lr", tr.config.learning_rate, "Learning rate");
  train_cmd->add_option("--batch-size", tr.config.batch_size, "Minibatch size");
  train_cmd->add_option("--sigma-floor", tr.config.sigma_floor, "Lower bound for sigma");

  PredictArgs pr;
  CLI::App* predict = app.add_subcommand("predict", "Emit the expected-revenue matrix");
  predict->add_option("--model", pr.model, "Model file")->required();
  predict->add_option("--customers", pr.customers, "customers.csv")->required();
  predict->add_option("--funds", pr.funds, "funds.csv")->required();
  predict->add_option("--out", pr.out, "Output revenue CSV");
  predict->add_flag("--unshifted", pr.unshifted,
                    "Invert the log-shift for reporting (allocation uses the default scale)");

  AllocateArgs al;
  CLI::App* allocate = app.add_subcommand("allocate", "Solve the allocation problem");
  allocate->add_option("--customers", al.customers, "customers.csv")->required();
  allocate->add_option("--funds", al.funds, "funds.csv")->required();
  allocate->add_option("--revenue", al.revenue, "revenue.csv")->required();
  allocate->add_option("--k", al.k, "Impressions per customer");
  allocate->add_option("--solver", al.solver, "Solver")
      ->check(CLI::IsMember({"ha-eq8", "ha-top3", "manual", "exact-bf", "exact-flow"}));
  allocate->add_flag("--lazy", al.lazy, "Lazy rescoring after fund exhaustion (ha solvers)");
  allocate->add_option("--priority", al.priority,
                       "Comma-separated fund ids for the manual solver");
  allocate->add_option("--out", al.out, "Output allocation CSV");
  allocate->add_option("--stats", al.stats_out, "Output stats JSON");

  BenchmarkArgs bm;
  CLI::App* benchmark = app.add_subcommand("benchmark", "Compare solvers across scales");
  benchmark->add_option("--scales", bm.scales, "Customer counts, strictly increasing")
      ->required()
      ->delimiter(',');
  benchmark->add_option("--m", bm.m, "Number of funds");
  benchmark->add_option("--k", bm.k, "Impressions per customer");
  benchmark->add_option("--seed", bm.seed, "Instance seed");
  benchmark->add_option("--solvers", bm.solvers, "Solvers to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"ha", "manual", "exact-flow"}));
  benchmark->add_option("--format", bm.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}));
  benchmark->add_option("--out", bm.out, "Report path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "INVALID_CONFIG: " << e.what() << '\n';
    return 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (train_cmd->parsed()) return run_train(tr);
    if (predict->parsed()) return run_predict(pr);
    if (allocate->parsed()) return run_allocate(al);
    if (benchmark->parsed()) return run_benchmark(bm);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return error_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "IO_ERROR: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
