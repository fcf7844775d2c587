// Command-line driver: solve, compare variants, validate oracles and replay
// the x^2 + eps x^3 counterexample.
//
// Exit codes: 0 converged / all checks passed, 1 validation failure,
// 2 max-iterations, 3 line-search-stalled, 4 not-positive-definite,
// 5 domain-error, 64 usage or input error.

#include "gradnewton/gradnewton.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace gn = gradnewton;

namespace {

constexpr int kExitValidationFailed = 1;
constexpr int kExitUsage = 64;

int exit_code(gn::Status s) {
  switch (s) {
    case gn::Status::converged: return 0;
    case gn::Status::max_iterations: return 2;
    case gn::Status::line_search_stalled: return 3;
    case gn::Status::not_positive_definite: return 4;
    case gn::Status::domain_error: return 5;
  }
  return kExitUsage;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// GRADNEWTON_LOG: 0/quiet, 1/info (default), 2/debug.
int log_level() {
  const char* env = std::getenv("GRADNEWTON_LOG");
  if (env == nullptr) return 1;
  const std::string v = env;
  if (v == "0" || v == "quiet" || v == "off") return 0;
  if (v == "2" || v == "debug") return 2;
  return 1;
}

struct Options {
  std::string problem;
  std::string mesh;
  std::string curvature = "uniform";
  std::string x0;
  double alpha = 0.1;
  double epsilon = 1e-10;
  int max_iter = 200;
  std::string variant = "energy-free";
  bool no_first_condition = false;
  std::uint64_t seed = 1;
  std::string trace_out;
  std::string summary_out;
  std::string csv_out;
  std::string variants;
  double eps = 0.1;
};

struct Problem {
  std::string label;
  std::unique_ptr<gn::ObjectiveOracle> oracle;
  gn::Point start;
  std::function<gn::Point(std::mt19937_64&)> sample_start;
  std::shared_ptr<const gn::TriangleMesh> mesh;  // set for conformal problems
  gn::Vector targets;
};

gn::Vector parse_curvature(const std::string& spec, const gn::TriangleMesh& mesh, std::uint64_t seed) {
  if (spec == "uniform") return gn::uniform_targets(mesh);
  if (spec.rfind("perturbed", 0) == 0) {
    double magnitude = 0.2;
    if (spec.size() > 9) {
      if (spec[9] != ':') throw UsageError("curvature preset must be 'perturbed' or 'perturbed:<magnitude>'");
      magnitude = std::stod(spec.substr(10));
    }
    return gn::perturbed_targets(mesh, seed, magnitude);
  }
  return gn::load_targets(spec, mesh.num_vertices);
}

gn::Point parse_point(const std::string& text, gn::Index n) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("--x0: '" + cell + "' is not a number");
    }
  }
  if (values.size() == 1) return gn::Point::Constant(n, values[0]);
  if (static_cast<gn::Index>(values.size()) != n) {
    throw UsageError("--x0 has " + std::to_string(values.size()) + " entries, problem dimension is " +
                     std::to_string(n));
  }
  return Eigen::Map<const gn::Vector>(values.data(), n);
}

Problem make_problem(const Options& o) {
  Problem p;
  if (!o.mesh.empty() && !o.problem.empty()) throw UsageError("use either --problem or --mesh, not both");
  if (!o.mesh.empty()) {
    auto mesh = std::make_shared<const gn::TriangleMesh>(gn::load_mesh(o.mesh));
    p.targets = parse_curvature(o.curvature, *mesh, o.seed);
    p.oracle = std::make_unique<gn::ConformalOracle>(mesh, p.targets);
    p.label = o.mesh;
    p.start = gn::Point::Zero(mesh->num_vertices);
    const gn::Index n = mesh->num_vertices;
    p.sample_start = [n](std::mt19937_64& rng) {
      std::uniform_real_distribution<double> dist(-0.1, 0.1);
      gn::Point u(n);
      for (gn::Index i = 0; i < n; ++i) u(i) = dist(rng);
      return u;
    };
    p.mesh = mesh;
  } else {
    const std::string name = o.problem.empty() ? "quadratic-diag" : o.problem;
    auto fx = gn::make_fixture(name, o.seed);
    if (!fx) {
      std::string known;
      for (const auto& n : gn::fixture_names()) known += " " + n;
      throw UsageError("unknown problem '" + name + "'; known:" + known + " (cubic-<eps> for any eps > 0)");
    }
    p.label = name;
    p.oracle = fx->make();
    p.start = fx->default_start;
    p.sample_start = fx->sample_start;
    if (auto* c = dynamic_cast<gn::ConformalOracle*>(p.oracle.get())) {
      p.mesh = std::make_shared<const gn::TriangleMesh>(c->mesh());
      p.targets = c->targets();
    }
  }
  if (!o.x0.empty()) p.start = parse_point(o.x0, p.oracle->dimension());
  return p;
}

gn::SolverConfig make_config(const Options& o) {
  gn::SolverConfig cfg;
  cfg.alpha = o.alpha;
  cfg.epsilon = o.epsilon;
  cfg.max_iterations = o.max_iter;
  cfg.use_first_condition = !o.no_first_condition;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

gn::Variant parse_variant_or_throw(const std::string& s) {
  auto v = gn::parse_variant(s);
  if (!v) throw UsageError("unknown variant '" + s + "' (energy-free, energy-free-no-first-cond, armijo)");
  return *v;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

struct Analysis {
  std::optional<gn::BoundEstimates> bounds;
  std::optional<gn::ConvergenceReport> report;
  std::string note;
};

// Post-hoc diagnostics. Runs after the solve's counters were captured, so
// energy evaluations here never show up in the solve's counts.
Analysis analyze(gn::ObjectiveOracle& oracle, gn::SolveResult& result, const gn::SolverConfig& cfg) {
  Analysis a;
  try {
    a.bounds = gn::estimate_bounds(oracle, result);
    const gn::DescentAudit audit = gn::audit_descent(oracle, result);
    gn::ClassifyOptions opt;
    opt.gradient_noise = gn::estimate_gradient_noise(oracle, result);
    a.report = gn::classify_convergence(result, *a.bounds, cfg, &audit, opt);
  } catch (const std::exception& e) {
    a.note = e.what();
  }
  return a;
}

void log_result(const std::string& label, gn::Variant v, const gn::SolveResult& r) {
  const int level = log_level();
  if (level >= 2) {
    for (const auto& rec : r.trace) {
      std::cerr << "[debug] k=" << rec.k << " |g|=" << rec.grad_norm << " lambda^2=" << rec.newton_decrement_sq
                << " t=" << rec.step << " (" << gn::to_string(rec.exit_condition) << ")\n";
    }
  }
  if (level >= 1) {
    std::cerr << "[info] " << label << " " << gn::to_string(v) << ": " << gn::to_string(r.status) << " after "
              << r.trace.size() << " iterations, |g| = " << r.final_grad_norm << "\n";
  }
}

int cmd_solve(const Options& o) {
  Problem p = make_problem(o);
  const gn::SolverConfig base = make_config(o);
  gn::Variant variant = parse_variant_or_throw(o.variant);
  if (o.no_first_condition && variant == gn::Variant::energy_free) variant = gn::Variant::energy_free_no_first_condition;
  if (variant == gn::Variant::armijo && !p.oracle->has_energy()) {
    throw UsageError("variant 'armijo' needs an objective with energy; '" + p.label + "' has none");
  }
  const gn::SolverConfig cfg = gn::config_for(base, variant);

  gn::SolveResult result = gn::run_variant(*p.oracle, p.start, cfg, variant);
  log_result(p.label, variant, result);
  const Analysis a = analyze(*p.oracle, result, cfg);

  std::ostringstream csv;
  gn::write_trace_csv(csv, result.trace);
  if (!o.trace_out.empty()) write_text(o.trace_out, csv.str());

  nlohmann::json summary = gn::summary_json(result);
  summary["problem"] = p.label;
  summary["variant"] = std::string(gn::to_string(variant));
  if (a.bounds && a.report) {
    summary["bounds"] = gn::to_json(*a.bounds);
    summary["report"] = gn::to_json(*a.report, *a.bounds);
  } else if (!a.note.empty()) {
    summary["diagnostics_error"] = a.note;
  }
  if (p.mesh) {
    const auto gb = gn::check_gauss_bonnet(*p.mesh, p.targets);
    summary["gauss_bonnet"] = {{"defect", gb.defect}, {"feasible", gb.feasible}};
  }
  if (!o.summary_out.empty()) {
    write_text(o.summary_out, summary.dump(2) + "\n");
  } else {
    std::cout << summary.dump(2) << "\n";
  }
  return exit_code(result.status);
}

std::string rate_text(const Analysis& a) {
  if (!a.report) return "n/a";
  std::ostringstream os;
  if (a.report->exponent) {
    os << "p=" << std::setprecision(3) << *a.report->exponent;
  } else if (!a.report->k0 && a.report->linear_rate) {
    os << "linear " << std::setprecision(3) << *a.report->linear_rate;
  } else {
    os << "insufficient data";
  }
  return os.str();
}

int cmd_compare(const Options& o) {
  std::vector<gn::Variant> variants;
  if (o.variants.empty()) {
    variants = {gn::Variant::energy_free, gn::Variant::energy_free_no_first_condition, gn::Variant::armijo};
  } else {
    std::stringstream ss(o.variants);
    std::string cell;
    while (std::getline(ss, cell, ',')) variants.push_back(parse_variant_or_throw(cell));
  }
  const gn::SolverConfig base = make_config(o);

  struct Row {
    gn::Variant variant;
    gn::SolveResult result;
    Analysis analysis;
  };
  std::vector<Row> rows;
  for (gn::Variant v : variants) {
    Problem p = make_problem(o);  // fresh oracle per variant, fresh counters
    if (v == gn::Variant::armijo && !p.oracle->has_energy()) {
      if (o.variants.empty()) continue;
      throw UsageError("variant 'armijo' needs an objective with energy");
    }
    const gn::SolverConfig cfg = gn::config_for(base, v);
    gn::SolveResult r = gn::run_variant(*p.oracle, p.start, cfg, v);
    log_result(p.label, v, r);
    Analysis a = analyze(*p.oracle, r, cfg);
    rows.push_back({v, std::move(r), std::move(a)});
  }

  std::ostringstream csv;
  csv << "variant,status,iterations,energy_evals,gradient_evals,hessian_evals,final_grad_norm,distance_to_first,rate\n";
  std::cout << std::left << std::setw(27) << "variant" << std::setw(22) << "status" << std::right << std::setw(6)
            << "iters" << std::setw(8) << "energy" << std::setw(8) << "grad" << std::setw(8) << "hess"
            << std::setw(14) << "final |g|" << std::setw(14) << "dist(first)"
            << "  rate\n";
  int worst = 0;
  for (const auto& row : rows) {
    const auto& r = row.result;
    const double dist = (r.final_point - rows.front().result.final_point).norm();
    const std::string rate = rate_text(row.analysis);
    csv << gn::to_string(row.variant) << ',' << gn::to_string(r.status) << ',' << r.trace.size() << ','
        << r.counters.energy_evals << ',' << r.counters.gradient_evals << ',' << r.counters.hessian_evals << ','
        << gn::detail::format_double(r.final_grad_norm) << ',' << gn::detail::format_double(dist) << ',' << rate
        << '\n';
    std::cout << std::left << std::setw(27) << gn::to_string(row.variant) << std::setw(22) << gn::to_string(r.status)
              << std::right << std::setw(6) << r.trace.size() << std::setw(8) << r.counters.energy_evals
              << std::setw(8) << r.counters.gradient_evals << std::setw(8) << r.counters.hessian_evals
              << std::setw(14) << std::setprecision(3) << r.final_grad_norm << std::setw(14) << dist << "  " << rate
              << "\n";
    worst = std::max(worst, exit_code(r.status));
  }
  if (!o.csv_out.empty()) write_text(o.csv_out, csv.str());
  return worst;
}

int cmd_validate(const Options& o) {
  Problem p = make_problem(o);
  gn::ObjectiveOracle& oracle = *p.oracle;
  const gn::ConstraintSpec constraint = oracle.default_constraint();
  std::vector<gn::Point> points{p.start};
  std::mt19937_64 rng(o.seed);
  for (int i = 0; i < 4; ++i) points.push_back(p.sample_start(rng));

  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    all_ok = all_ok && ok;
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
  };
  auto fmt = [](double x) {
    std::ostringstream os;
    os << std::setprecision(3) << x;
    return os.str();
  };

  if (p.mesh) {
    const auto gb = gn::check_gauss_bonnet(*p.mesh, p.targets);
    report("gauss-bonnet", gb.feasible, "defect " + fmt(gb.defect) + " (chi = " +
                                            std::to_string(p.mesh->euler_characteristic) + ")");
  }
  try {
    double grad_err = 0.0, hess_err = 0.0, sym_err = 0.0, null_err = 0.0, min_eig = 1e300;
    for (const auto& u : points) {
      if (oracle.has_energy()) grad_err = std::max(grad_err, gn::check_gradient_fd(oracle, u).max_rel_error);
      hess_err = std::max(hess_err, gn::check_hessian_fd(oracle, u).max_rel_error);
      const gn::HessianMat h = oracle.hessian(u);
      sym_err = std::max(sym_err, (h - h.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, h.cwiseAbs().maxCoeff()));
      if (p.mesh) null_err = std::max(null_err, (h * gn::Vector::Ones(h.rows())).cwiseAbs().maxCoeff());
      min_eig = std::min(min_eig, gn::eigen_bounds(h, constraint).min);
    }
    if (oracle.has_energy()) report("gradient-fd", grad_err <= 1e-5, "max rel. error " + fmt(grad_err) + " (tol 1e-5)");
    report("hessian-fd", hess_err <= 1e-4, "max rel. error " + fmt(hess_err) + " (tol 1e-4)");
    report("symmetry", sym_err <= 1e-12, "max rel. asymmetry " + fmt(sym_err));
    if (p.mesh) report("nullspace", null_err <= 1e-10, "max |H 1| " + fmt(null_err));
    report("positive-definite", min_eig > 0.0, "min reduced eigenvalue " + fmt(min_eig));
  } catch (const gn::SolveError& e) {
    report("evaluation", false, e.what());
  }
  return all_ok ? 0 : kExitValidationFailed;
}

int cmd_demo_counterexample(const Options& o) {
  if (!(o.eps > 0.0)) throw UsageError("--eps must be positive");
  const double x0 = o.x0.empty() ? -0.5 : parse_point(o.x0, 1)(0);
  if (x0 > 0.0) {
    std::cerr << "warning: x0 > 0; the rejected full step only appears when approaching the minimum from below\n";
  }
  gn::SolverConfig cfg;
  cfg.alpha = o.alpha;
  cfg.epsilon = o.epsilon;
  cfg.max_iterations = o.max_iter;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  gn::CubicCounterexample with_first(o.eps), sign_only(o.eps);
  const gn::Point start = gn::Point::Constant(1, x0);
  const gn::SolveResult a = gn::run_variant(with_first, start, cfg, gn::Variant::energy_free);
  const gn::SolveResult b = gn::run_variant(sign_only, start, cfg, gn::Variant::energy_free_no_first_condition);

  // Onset of the all-full-step tail under the first condition.
  std::size_t onset = a.trace.size();
  while (onset > 0 && a.trace[onset - 1].step == 1.0) --onset;

  std::cout << "f(x) = x^2 + " << o.eps << " x^3, x0 = " << x0 << ", alpha = " << o.alpha << "\n\n";
  std::cout << std::setw(4) << "k" << " | " << std::setw(24) << "first condition: x_k" << std::setw(7) << "t"
            << std::setw(11) << "ratio" << " | " << std::setw(24) << "sign only: x_k" << std::setw(7) << "t"
            << std::setw(11) << "ratio" << "\n";
  const std::size_t rows = std::max(a.iterates.size(), b.iterates.size());
  auto cell = [](const gn::SolveResult& r, std::size_t k, std::ostream& os) {
    if (k >= r.iterates.size()) {
      os << std::setw(24) << "" << std::setw(7) << "" << std::setw(11) << "";
      return;
    }
    os << std::setw(24) << std::setprecision(15) << r.iterates[k](0);
    if (k < r.trace.size()) {
      os << std::setw(7) << std::setprecision(3) << r.trace[k].step;
      const double ratio = std::abs(r.iterates[k + 1](0)) / std::abs(r.iterates[k](0));
      os << std::setw(11) << std::setprecision(4) << ratio;
    } else {
      os << std::setw(7) << "-" << std::setw(11) << "-";
    }
  };
  for (std::size_t k = 0; k < rows; ++k) {
    std::cout << std::setw(4) << k << " | ";
    cell(a, k, std::cout);
    std::cout << " | ";
    cell(b, k, std::cout);
    if (k == onset && onset < a.trace.size()) std::cout << "   <- full steps from here (first condition)";
    std::cout << "\n";
  }
  std::cout << "\nfirst condition: " << gn::to_string(a.status) << " in " << a.trace.size() << " iterations\n";
  std::cout << "sign only:       " << gn::to_string(b.status) << " in " << b.trace.size() << " iterations\n";
  if (!b.trace.empty() && b.trace.front().halvings > 0) {
    std::cout << "sign-only search rejected the first full step (g~(1) > 0)\n";
  }

  if (!o.trace_out.empty()) {
    std::ostringstream ta, tb;
    gn::write_trace_csv(ta, a.trace);
    gn::write_trace_csv(tb, b.trace);
    write_text(o.trace_out + ".first.csv", ta.str());
    write_text(o.trace_out + ".sign.csv", tb.str());
  }
  return std::max(exit_code(a.status), exit_code(b.status));
}

void add_problem_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--problem", o.problem, "fixture name (quadratic-diag, logsumexp-std, cubic-0.1, conformal-ico, ...)");
  cmd->add_option("--mesh", o.mesh, "OBJ or lenmesh file for a conformal problem");
  cmd->add_option("--curvature", o.curvature, "uniform | perturbed[:magnitude] | file with one target per line");
  cmd->add_option("--x0", o.x0, "starting point: comma-separated values, or one value for all coordinates");
  cmd->add_option("--seed", o.seed, "seed for randomized fixtures and targets");
}

void add_solver_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.alpha, "first-condition constant, in (0, 1/2)");
  cmd->add_option("--epsilon", o.epsilon, "gradient-norm tolerance");
  cmd->add_option("--max-iter", o.max_iter, "iteration limit");
  cmd->add_flag("--no-first-condition", o.no_first_condition, "disable the first line-search condition");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Newton minimization with a gradient-only line search"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "run one solve; write trace CSV and JSON summary");
  add_problem_options(solve, o);
  add_solver_options(solve, o);
  solve->add_option("--variant", o.variant, "energy-free | energy-free-no-first-cond | armijo");
  solve->add_option("--trace-out", o.trace_out, "trace CSV path ('-' for stdout)");
  solve->add_option("--summary-out", o.summary_out, "summary JSON path (default: stdout)");

  auto* compare = app.add_subcommand("compare", "run several variants on one problem");
  add_problem_options(compare, o);
  add_solver_options(compare, o);
  compare->add_option("--variants", o.variants, "comma-separated variants (default: all applicable)");
  compare->add_option("--csv-out", o.csv_out, "comparison CSV path");

  auto* validate = app.add_subcommand("validate", "finite-difference and invariant checks of an oracle");
  add_problem_options(validate, o);

  auto* demo = app.add_subcommand("demo-counterexample", "side-by-side traces on f(x) = x^2 + eps x^3");
  demo->add_option("--eps", o.eps, "cubic coefficient");
  demo->add_option("--x0", o.x0, "start (should be negative)");
  demo->add_option("--alpha", o.alpha, "first-condition constant");
  demo->add_option("--epsilon", o.epsilon, "gradient-norm tolerance");
  demo->add_option("--max-iter", o.max_iter, "iteration limit");
  demo->add_option("--trace-out", o.trace_out, "prefix for <prefix>.first.csv and <prefix>.sign.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*compare) return cmd_compare(o);
    if (*validate) return cmd_validate(o);
    if (*demo) return cmd_demo_counterexample(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gn::MeshFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
