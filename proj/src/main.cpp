#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "sparsefolio/data_io.hpp"
#include "sparsefolio/frontier.hpp"
#include "sparsefolio/pspgd.hpp"

namespace {

using namespace sparsefolio;

struct Options {
  std::string dataset;
  std::string covariance_path;
  std::string returns_path;
  std::string output;
  std::string format = "csv";
  bool no_timing = false;
  long alpha = 1;
  std::optional<double> rho;
  double epsilon_tilde = 0.5;
  std::string rho_select = "rho-min";
  int grid = 50;
  int count = 50;
  std::uint64_t seed = 42;
  int jobs = 1;
  double tol1 = 1e-6;
  double tol2 = 1e-8;
  int max_outer = 100;
  std::optional<double> tau0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MarketDataset load_dataset(const Options& o) {
  if (!o.covariance_path.empty() || !o.returns_path.empty()) {
    if (o.covariance_path.empty() || o.returns_path.empty())
      throw std::runtime_error("--covariance and --returns must be given together");
    return parse_csv_covariance(read_file(o.covariance_path),
                                read_file(o.returns_path), o.covariance_path);
  }
  if (o.dataset.empty())
    throw std::runtime_error("no dataset given (use --dataset or --covariance/--returns)");
  if (o.dataset == "simple") return embedded_simple_case();
  return parse_orlibrary(read_file(o.dataset), o.dataset);
}

PenaltyConfig<double> penalty_config(const Options& o) {
  PenaltyConfig<double> cfg;
  cfg.tol1 = o.tol1;
  cfg.tol2 = o.tol2;
  cfg.max_outer_iterations = o.max_outer;
  cfg.tau_initial_override = o.tau0;
  return cfg;
}

RhoSelectMode select_mode(const Options& o) {
  return o.rho_select == "candidate" ? RhoSelectMode::candidate_magnitude
                                     : RhoSelectMode::rho_min_magnitude;
}

// Data goes to stdout or --output; everything else stays on stderr.
void emit(const Options& o, const std::string& payload) {
  if (o.output.empty()) {
    std::cout << payload;
    std::cout.flush();
    return;
  }
  std::ofstream out(o.output, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + o.output);
  out << payload;
}

std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int run_solve(const Options& o) {
  const auto ds = load_dataset(o);
  auto problem = make_problem(ds, o.alpha, 0.0);
  const auto cfg = penalty_config(o);

  double rho;
  if (o.rho) {
    rho = *o.rho;
  } else {
    const auto interval = compute_rho_interval(problem, cfg);
    if (!interval.min_report.converged || !interval.max_report.converged) {
      std::cerr << "error: return-interval solve did not converge\n";
      return 2;
    }
    rho = select_rho(interval, problem.v, o.epsilon_tilde, select_mode(o));
  }
  problem.rho = rho;

  const auto report = pspgd_solve(problem, cfg);
  std::ostringstream out;
  write_report({make_report_row(report, o.alpha, rho, !o.no_timing)},
               o.format == "json" ? ReportFormat::json : ReportFormat::csv, out);
  emit(o, out.str());
  if (!report.converged)
    std::cerr << "warning: solver stopped without convergence (" << report.status
              << ")\n";
  return report.converged ? 0 : 2;
}

int run_bounds(const Options& o) {
  const auto ds = load_dataset(o);
  auto problem = make_problem(ds, o.alpha, 0.0);
  const auto cfg = penalty_config(o);
  const auto interval = compute_rho_interval(problem, cfg);
  const double selected =
      select_rho(interval, problem.v, o.epsilon_tilde, select_mode(o));

  std::ostringstream out;
  if (o.format == "json") {
    nlohmann::ordered_json obj;
    obj["rho_min"] = interval.rho_min;
    obj["rho_max"] = interval.rho_max;
    obj["rho_selected"] = selected;
    out << obj.dump(2) << "\n";
  } else {
    out << "rho_min,rho_max,rho_selected\n"
        << sig6(interval.rho_min) << ',' << sig6(interval.rho_max) << ','
        << sig6(selected) << "\n";
  }
  emit(o, out.str());
  return interval.min_report.converged && interval.max_report.converged ? 0 : 2;
}

int run_frontier(const Options& o) {
  const auto ds = load_dataset(o);
  const auto problem = make_problem(ds, o.alpha, 0.0);
  const auto curve = sweep_frontier(problem, o.alpha, o.grid, penalty_config(o), o.jobs);

  std::ostringstream out;
  if (o.format == "json") {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : curve.samples) {
      nlohmann::ordered_json obj;
      obj["rho"] = s.rho;
      obj["return"] = s.expected_return;
      obj["risk"] = s.risk;
      obj["card"] = s.cardinality;
      obj["converged"] = s.converged;
      arr.push_back(std::move(obj));
    }
    out << arr.dump(2) << "\n";
  } else {
    out << "rho,return,risk,card,converged\n";
    for (const auto& s : curve.samples)
      out << sig6(s.rho) << ',' << sig6(s.expected_return) << ',' << sig6(s.risk) << ','
          << s.cardinality << ',' << (s.converged ? 1 : 0) << "\n";
  }
  emit(o, out.str());

  int converged = 0;
  for (const auto& s : curve.samples) converged += s.converged ? 1 : 0;
  return 10 * converged >= 9 * int(curve.samples.size()) ? 0 : 2;
}

int run_cloud(const Options& o) {
  const auto ds = load_dataset(o);
  const auto problem = make_problem(ds, o.alpha, 0.0);
  const auto points = sample_feasible_cloud(problem, o.alpha, o.count, o.seed);

  std::ostringstream out;
  if (o.format == "json") {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& [risk, ret] : points) {
      nlohmann::ordered_json obj;
      obj["risk"] = risk;
      obj["return"] = ret;
      arr.push_back(std::move(obj));
    }
    out << arr.dump(2) << "\n";
  } else {
    out << "risk,return\n";
    for (const auto& [risk, ret] : points)
      out << sig6(risk) << ',' << sig6(ret) << "\n";
  }
  emit(o, out.str());
  return 0;
}

int run_validate(const Options& o) {
  const auto ds = load_dataset(o);
  const bool psd = is_positive_semidefinite(ds.covariance);
  const double v_min = ds.mean_returns.minCoeff();
  const double v_max = ds.mean_returns.maxCoeff();

  std::ostringstream out;
  if (o.format == "json") {
    nlohmann::ordered_json obj;
    obj["n"] = ds.n;
    obj["psd"] = psd;
    obj["v_min"] = v_min;
    obj["v_max"] = v_max;
    out << obj.dump(2) << "\n";
  } else {
    out << "n,psd,v_min,v_max\n"
        << ds.n << ',' << (psd ? "true" : "false") << ',' << sig6(v_min) << ','
        << sig6(v_max) << "\n";
  }
  emit(o, out.str());
  if (!psd) std::cerr << "error: covariance is not positive semidefinite\n";
  return psd ? 0 : 1;
}

void add_dataset_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "dataset path, or 'simple' for the embedded case");
  cmd->add_option("--covariance", o.covariance_path, "covariance CSV (with --returns)");
  cmd->add_option("--returns", o.returns_path, "mean-returns file (with --covariance)");
  cmd->add_option("--output", o.output, "write data output to a file instead of stdout");
  cmd->add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

void add_solver_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--tol1", o.tol1, "subproblem projected-gradient tolerance")
      ->capture_default_str();
  cmd->add_option("--tol2", o.tol2, "Hadamard/objective stabilization tolerance")
      ->capture_default_str();
  cmd->add_option("--max-outer", o.max_outer, "penalty iteration cap")
      ->capture_default_str();
  cmd->add_option("--tau0", o.tau0, "override the initial penalty parameter");
}

void add_rho_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--epsilon-tilde", o.epsilon_tilde,
                  "interval fraction for automatic return-target selection")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)))
      ->capture_default_str();
  cmd->add_option("--rho-select", o.rho_select,
                  "negative-candidate fallback magnitude: rho-min or candidate")
      ->check(CLI::IsMember({"rho-min", "candidate"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardinality-constrained mean-variance portfolio solver"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "solve one instance");
  add_dataset_options(solve, o);
  add_solver_options(solve, o);
  add_rho_options(solve, o);
  solve->add_option("--alpha", o.alpha, "cardinality bound")->required()->check(CLI::PositiveNumber);
  solve->add_option("--rho", o.rho, "return target (overrides automatic selection)");
  solve->add_flag("--no-timing", o.no_timing, "zero the time column for reproducible output");

  auto* bounds = app.add_subcommand("bounds", "feasible-return interval and selected target");
  add_dataset_options(bounds, o);
  add_solver_options(bounds, o);
  add_rho_options(bounds, o);
  bounds->add_option("--alpha", o.alpha, "cardinality bound")->required()->check(CLI::PositiveNumber);

  auto* frontier = app.add_subcommand("frontier", "efficient-frontier sweep over the return interval");
  add_dataset_options(frontier, o);
  add_solver_options(frontier, o);
  frontier->add_option("--alpha", o.alpha, "cardinality bound")->required()->check(CLI::PositiveNumber);
  frontier->add_option("--grid", o.grid, "number of return-target grid points")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  frontier->add_option("--jobs", o.jobs, "solve grid points concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* cloud = app.add_subcommand("cloud", "seeded feasible (risk, return) samples");
  add_dataset_options(cloud, o);
  cloud->add_option("--alpha", o.alpha, "cardinality bound")->required()->check(CLI::PositiveNumber);
  cloud->add_option("--count", o.count, "number of samples")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cloud->add_option("--seed", o.seed, "random seed")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "parse a dataset and report its health");
  add_dataset_options(validate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return run_solve(o);
    if (bounds->parsed()) return run_bounds(o);
    if (frontier->parsed()) return run_frontier(o);
    if (cloud->parsed()) return run_cloud(o);
    if (validate->parsed()) return run_validate(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
