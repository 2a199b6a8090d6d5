#include "convexreg/complexity.hpp"
#include "convexreg/functions.hpp"
#include "convexreg/geometry.hpp"
#include "convexreg/kernels.hpp"
#include "convexreg/lse.hpp"
#include "convexreg/risk.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace convexreg;

namespace {

constexpr int kValidationError = 1;
constexpr int kNotConverged = 2;

struct Options {
  int threads = 0;
  bool strict = false;
  bool deterministic = false;
  std::string output_dir;
};

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw PreconditionError(path + ": " + e.what());
  }
}

fs::path output_path(const Options& opt, const std::string& configured, const std::string& fallback) {
  fs::path p = configured.empty() ? fs::path(fallback) : fs::path(configured);
  if (!opt.output_dir.empty() && p.is_relative()) p = fs::path(opt.output_dir) / p;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + p.string());
  out << body;
}

// "k=27" "d=3" -> {k: 27, d: 3}
std::map<std::string, double> key_values(const std::vector<std::string>& tokens) {
  std::map<std::string, double> out;
  for (const auto& t : tokens) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw PreconditionError("expected key=value, got \"" + t + "\"");
    try {
      out[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
    } catch (const std::exception&) {
      throw PreconditionError("value of \"" + t.substr(0, eq) + "\" is not a number");
    }
  }
  return out;
}

double need(const std::map<std::string, double>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw PreconditionError("missing " + key + "=...");
  return it->second;
}

int run_fit(const Options& opt, const std::string& problem_path, const std::string& solver_path,
            const std::string& out) {
  const RegressionProblem problem = RegressionProblem::from_json(load_json(problem_path));
  const SolverConfig config = solver_path.empty() ? SolverConfig{} : SolverConfig::from_json(load_json(solver_path));
  const LSEFit f = fit(problem, config);
  const std::string body = f.to_json().dump(2) + "\n";
  if (out.empty() && opt.output_dir.empty()) {
    std::cout << body;
  } else {
    write_file(output_path(opt, out, "fit.json"), body);
  }
  return opt.strict && !f.diagnostics.converged ? kNotConverged : 0;
}

int run_construct(const Options& opt, const std::vector<std::string>& f_tilde, bool interior,
                  const std::vector<std::string>& bump, const std::string& domain_path, const std::string& out) {
  nlohmann::json result;
  auto domain_for = [&](int d) {
    return domain_path.empty() ? SlabPolytope::unit_cube(d) : SlabPolytope::from_json(load_json(domain_path));
  };
  if (!f_tilde.empty()) {
    const auto kv = key_values(f_tilde);
    const int k = static_cast<int>(need(kv, "k"));
    const int d = static_cast<int>(need(kv, "d"));
    const SlabPolytope poly = domain_for(d);
    require(poly.dim() == d, "domain dimension does not match d");
    const TangentEnvelope env = interior ? build_f_tilde_interior(poly, k) : build_f_tilde(poly, k);
    result = env.function.to_json();
    result["eta"] = env.eta;
    nlohmann::json anchors = nlohmann::json::array();
    for (Eigen::Index r = 0; r < env.anchors.rows(); ++r) {
      anchors.push_back(std::vector<double>(env.anchors.row(r).data(), env.anchors.row(r).data() + d));
    }
    result["anchors"] = anchors;
    if (env.coverage) result["coverage"] = *env.coverage;
  } else if (!bump.empty()) {
    const auto kv = key_values(bump);
    const int d = static_cast<int>(need(kv, "d"));
    const double delta = need(kv, "delta");
    const int count = kv.count("codewords") ? static_cast<int>(kv.at("codewords")) : 4;
    const auto seed = static_cast<std::uint64_t>(kv.count("seed") ? kv.at("seed") : 0.0);
    const SlabPolytope poly = domain_for(d);
    const BumpPacking p = BumpPacking::build(poly, delta, count, seed);
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : p.codewords()) words.push_back(std::vector<int>(w.begin(), w.end()));
    result = {{"dim", d},
              {"delta", delta},
              {"n", p.grid().n()},
              {"coefficient", p.coefficient()},
              {"separation_bound", p.separation_bound()},
              {"codewords", words}};
  } else {
    throw PreconditionError("construct needs --f-tilde or --bump");
  }
  const std::string body = result.dump(2) + "\n";
  if (out.empty() && opt.output_dir.empty()) {
    std::cout << body;
  } else {
    write_file(output_path(opt, out, "construct.json"), body);
  }
  return 0;
}

int run_experiment_cmd(const Options& opt, const std::string& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::from_json(load_json(config_path));
  const RiskCurve curve = run_experiment(cfg, &std::cerr);
  std::ostringstream csv;
  curve.write_csv(csv);
  const fs::path p = output_path(opt, cfg.output_path, fs::path(config_path).stem().string() + ".csv");
  write_file(p, csv.str());
  int failures = 0;
  for (const auto& r : curve.rows) failures += r.failures;
  return opt.strict && failures > 0 ? kNotConverged : 0;
}

// {"dim", "domain"?, "n", "sigma", "center": truth, "t_grid"?, "mc_reps"?,
//  "seed"?, "refine"?, "output_path"?}
int run_complexity(const Options& opt, const std::string& config_path) {
  const nlohmann::json j = load_json(config_path);
  auto get = [&](const char* k) {
    if (!j.contains(k)) throw PreconditionError(std::string("config is missing field \"") + k + "\"");
    return j.at(k);
  };
  ExperimentConfig cfg;
  cfg.dim = get("dim").get<int>();
  cfg.domain = j.contains("domain") ? SlabPolytope::from_json(j.at("domain")) : SlabPolytope::unit_cube(cfg.dim);
  const int target = get("n").get<int>();
  cfg.n_list = {target};
  cfg.sigma = get("sigma").get<double>();
  cfg.truth = TruthSpec::from_json(get("center"), cfg.dim);
  double delta = 0.0;
  const PointMatrix x = build_design(cfg, target, 0, &delta);
  const Vector f = make_truth(cfg.truth, cfg.domain, static_cast<int>(x.rows()), delta)(x);
  const int reps = j.value("mc_reps", 64);
  const auto seed = j.value("seed", std::uint64_t{0});
  const std::vector<double> grid =
      j.contains("t_grid") ? j.at("t_grid").get<std::vector<double>>()
                           : default_t_grid(static_cast<int>(x.rows()), cfg.dim, cfg.sigma, f.maxCoeff() - f.minCoeff());
  LocateOptions lo;
  lo.refine_points = j.value("refine", 0);
  if (j.contains("variant")) lo.variant = Variant::from_json(j.at("variant"));
  const ComplexityEstimate e = locate_t_star(x, f, cfg.sigma, grid, reps, seed, lo);
  std::ostringstream csv;
  e.write_csv(csv);
  const fs::path p = output_path(opt, j.value("output_path", std::string()),
                                 fs::path(config_path).stem().string() + ".csv");
  write_file(p, csv.str());
  std::cerr << "t_star=" << e.t_star << " flat=[" << e.flat_lower << ", " << e.flat_upper << "]";
  if (e.upper_bracket) std::cerr << " upper_bracket=" << *e.upper_bracket;
  if (e.beyond_grid) std::cerr << " t_star beyond grid";
  std::cerr << '\n';
  int failures = 0;
  for (const auto& h : e.H) failures += h.failures;
  return opt.strict && failures > 0 ? kNotConverged : 0;
}

// {"curves": [{"csv", "label", "dim", "regime"}], "output_path"?}
int run_rates(const Options& opt, const std::string& config_path) {
  const nlohmann::json j = load_json(config_path);
  require(j.contains("curves") && j.at("curves").is_array(), "config field \"curves\" must be an array");
  std::vector<RiskCurve> curves;
  std::vector<RegimeDescriptor> regimes;
  const fs::path base = fs::path(config_path).parent_path();
  for (const auto& c : j.at("curves")) {
    fs::path csv = c.at("csv").get<std::string>();
    if (csv.is_relative() && !fs::exists(csv)) {
      const fs::path produced = fs::path(opt.output_dir) / csv;
      csv = !opt.output_dir.empty() && fs::exists(produced) ? produced : base / csv;
    }
    std::ifstream in(csv);
    if (!in) throw PreconditionError("cannot open " + csv.string());
    curves.push_back(RiskCurve::read_csv(in));
    regimes.push_back({c.value("label", csv.stem().string()), c.at("dim").get<int>(),
                       regime_from_string(c.value("regime", std::string("worst_case")))});
  }
  const RateTable table = rate_report(curves, regimes);
  std::ostringstream csv;
  table.write_csv(csv);
  write_file(output_path(opt, j.value("output_path", std::string()), "rates.csv"), csv.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex least-squares regression: fits, constructions, risk and complexity experiments"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--threads", opt.threads, "Cap on worker threads (env CONVEXREG_THREADS)");
  app.add_flag("--strict", opt.strict, "Exit 2 when any solve fails to converge");
  app.add_flag("--deterministic", opt.deterministic, "Single worker thread");
  app.add_option("--output-dir", opt.output_dir, "Directory for relative output paths");

  std::string problem_path, solver_path, fit_out;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one regression problem from JSON");
  fit_cmd->add_option("problem", problem_path, "Problem JSON {X, Y, variant}")->required();
  fit_cmd->add_option("--solver", solver_path, "Solver settings JSON");
  fit_cmd->add_option("-o,--output", fit_out, "Fit JSON path (default stdout)");

  std::vector<std::string> f_tilde, bump;
  bool interior = false;
  std::string domain_path, construct_out;
  auto* construct_cmd = app.add_subcommand("construct", "Build f~_k or a bump packing");
  construct_cmd->add_option("--f-tilde", f_tilde, "k=<pieces> d=<dim>")->expected(2, 2);
  construct_cmd->add_flag("--interior", interior, "Anchors from cubes inside the domain only");
  construct_cmd->add_option("--bump", bump, "d=<dim> delta=<step> [codewords=<m>] [seed=<s>]")->expected(2, 4);
  construct_cmd->add_option("--domain", domain_path, "Slab polytope JSON (default unit cube)");
  construct_cmd->add_option("-o,--output", construct_out, "Output JSON path (default stdout)");

  std::string experiment_path;
  auto* experiment_cmd = app.add_subcommand("experiment", "Replicated risk simulation");
  experiment_cmd->add_option("config", experiment_path, "Experiment config JSON")->required();

  std::string complexity_path;
  auto* complexity_cmd = app.add_subcommand("complexity", "Localized complexity scan");
  complexity_cmd->add_option("config", complexity_path, "Complexity config JSON")->required();

  std::string rates_path;
  auto* rates_cmd = app.add_subcommand("rates", "Fitted vs theoretical rate exponents");
  rates_cmd->add_option("config", rates_path, "Rates config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kValidationError;
  }

  if (opt.threads <= 0) {
    if (const char* env = std::getenv("CONVEXREG_THREADS")) opt.threads = std::atoi(env);
  }
  if (opt.deterministic) opt.threads = 1;
  if (opt.threads > 0) kernels::set_thread_count(opt.threads);

  try {
    if (*fit_cmd) return run_fit(opt, problem_path, solver_path, fit_out);
    if (*construct_cmd) return run_construct(opt, f_tilde, interior, bump, domain_path, construct_out);
    if (*experiment_cmd) return run_experiment_cmd(opt, experiment_path);
    if (*complexity_cmd) return run_complexity(opt, complexity_path);
    if (*rates_cmd) return run_rates(opt, rates_path);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const BudgetExhausted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  }
  return 0;
}
