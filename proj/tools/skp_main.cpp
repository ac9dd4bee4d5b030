// Command-line benchmark driver: synthetic matrix generation, single solves
// with trace output, the full experiment protocol, and the spectral report.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "skp/analysis.hpp"
#include "skp/experiment.hpp"
#include "skp/matrix_market.hpp"
#include "skp/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitUnsupported = 3;

struct MethodChoice {
  skp::Method method = skp::Method::kKaczmarz;
  skp::Index block_tau = 2;
};

skp::SketchSet sketches_for(const MethodChoice& mc, skp::Index rows) {
  switch (mc.method) {
    case skp::Method::kKaczmarz: return skp::SketchSet::row_identity();
    case skp::Method::kCoordinateDescent: return skp::SketchSet::column_of_a();
    case skp::Method::kGeneral:
      return skp::SketchSet::contiguous_row_blocks(rows, mc.block_tau);
  }
  return skp::SketchSet::row_identity();
}

MethodChoice parse_method(const std::string& text) {
  if (text == "kaczmarz") return {skp::Method::kKaczmarz, 1};
  if (text == "cd") return {skp::Method::kCoordinateDescent, 1};
  if (text.rfind("block:", 0) == 0) {
    MethodChoice mc{skp::Method::kGeneral, 2};
    try {
      mc.block_tau = std::stoll(text.substr(6));
    } catch (const std::exception&) {
      throw skp::invalid_input("method: bad block size in '" + text + "'");
    }
    if (mc.block_tau < 1) throw skp::invalid_input("method: block size must be >= 1");
    return mc;
  }
  throw skp::invalid_input("method must be kaczmarz, cd, or block:TAU");
}

void write_trace_csv(const std::string& path, const skp::TrialTrace& trace) {
  std::ofstream out(path);
  if (!out) throw skp::parse_error(path + ": cannot open file for writing");
  out << "k,index,err_b_sq,sum_loss,max_loss,step_factor,flops\n";
  char buf[256];
  for (const skp::TraceRow& row : trace.rows) {
    std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%.17g,%.17g,%llu\n",
                  static_cast<long long>(row.k), row.index, row.err_b_sq, row.sum_loss,
                  row.max_loss, row.step_factor,
                  static_cast<unsigned long long>(row.flops));
    out << buf;
  }
}

int cmd_gen(skp::Index rows, skp::Index cols, std::uint64_t seed, const std::string& out) {
  skp::Mat a(skp::generate_gaussian(rows, cols, seed));
  skp::write_matrix_market(out, a);
  std::cout << "wrote " << rows << "x" << cols << " gaussian matrix to " << out << "\n";
  return kExitOk;
}

int cmd_solve(const std::string& matrix, const std::string& method_text,
              const std::string& rule_text, skp::Index iters, std::uint64_t seed,
              const std::string& trace_path) {
  const MethodChoice mc = parse_method(method_text);
  skp::Mat a = skp::load_matrix_market(matrix);
  const skp::InnerProduct inner = skp::inner_for(mc.method);
  auto [x_star, b] = skp::generate_solution(a, inner, seed);
  const skp::LinearSystem sys(a, b, inner, x_star);
  const skp::SketchSet sketches = sketches_for(mc, sys.rows());
  const skp::PrecomputedOperators ops = skp::PrecomputedOperators::precompute(sys, sketches);
  const skp::SamplingRule rule = skp::parse_rule(rule_text);

  skp::StopCriteria stop{.max_iters = iters, .error_tol = 0.0, .refresh_every = 1000};
  skp::RunOptions opts{.record_trace = !trace_path.empty()};
  skp::TrialTrace trace = skp::run(sys, ops, rule, stop, Eigen::VectorXd::Zero(sys.cols()),
                                   skp::RngStream(seed), opts);
  if (!trace_path.empty()) write_trace_csv(trace_path, trace);

  std::cout << "status: "
            << (trace.status == skp::RunStatus::kConverged ? "converged" : "max-iters")
            << "\niterations: " << trace.iterations << "\nmodel flops: " << trace.flops
            << "\nfinal ||x - x*||_B^2: " << trace.final_err_b_sq << "\n";
  if (!trace_path.empty()) std::cout << "trace: " << trace_path << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& config_path) {
  const skp::ExperimentSpec spec = skp::load_experiment_config(config_path);
  const skp::ExperimentResult result = skp::run_experiment(spec);
  const auto files = skp::emit_csv(result, spec.outputs, spec.emit_mean);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  return kExitOk;
}

int cmd_analyze(const std::string& matrix, const std::string& method_text,
                const std::string& rule_text, double theta, std::uint64_t seed,
                skp::Index probes, bool as_json) {
  const MethodChoice mc = parse_method(method_text);
  skp::Mat a = skp::load_matrix_market(matrix);
  const skp::InnerProduct inner = skp::inner_for(mc.method);
  auto [x_star, b] = skp::generate_solution(a, inner, seed);
  const skp::LinearSystem sys(a, b, inner, x_star);
  const skp::SketchSet sketches = sketches_for(mc, sys.rows());
  const skp::PrecomputedOperators ops = skp::PrecomputedOperators::precompute(sys, sketches);

  const skp::Index q = ops.q();
  const Eigen::VectorXd uniform =
      Eigen::VectorXd::Constant(q, 1.0 / static_cast<double>(q));
  const skp::SamplingRule rule = skp::parse_rule(rule_text);
  Eigen::VectorXd ref = uniform;
  if (rule.kind == skp::RuleKind::kNormProportional || rule.kind == skp::RuleKind::kCapped)
    ref = ops.norm_proportional_p();
  if (rule.kind == skp::RuleKind::kFixed) ref = rule.p;

  skp::SpectralInputs in;
  in.sigma_u_sq = skp::sigma_p_sq(sys, ops, uniform);
  in.sigma_p_sq = skp::sigma_p_sq(sys, ops, ref);
  skp::RngStream prng(seed, skp::kProbeStream);
  in.sigma_inf_sq_est = skp::estimate_sigma_inf_sq(sys, ops, probes, prng);
  in.gamma = skp::gamma_factor(ref);
  in.theta = rule.kind == skp::RuleKind::kCapped ? rule.theta : theta;
  const auto bounds = skp::rate_bounds(in);
  const bool exact = sys.rows() <= 500 ? skp::check_exactness(sys, ops, ref) : true;

  if (as_json) {
    nlohmann::json j;
    j["matrix"] = matrix;
    j["method"] = method_text;
    j["rule"] = rule_text;
    j["sigma_u_sq"] = in.sigma_u_sq;
    j["sigma_p_sq"] = in.sigma_p_sq;
    j["sigma_inf_sq_estimate"] = in.sigma_inf_sq_est;
    j["gamma"] = in.gamma;
    j["theta"] = in.theta;
    j["exactness"] = exact;
    j["rate_bounds"] = bounds;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  std::cout << "matrix: " << matrix << " (" << sys.rows() << "x" << sys.cols() << ")\n"
            << "method: " << method_text << ", rule: " << rule_text << "\n"
            << "sigma_u^2            = " << in.sigma_u_sq << "\n"
            << "sigma_p^2 (reference) = " << in.sigma_p_sq << "\n"
            << "sigma_inf^2 estimate = " << in.sigma_inf_sq_est << " (probe upper bound)\n"
            << "gamma                = " << in.gamma << "\n"
            << "exactness            = " << (exact ? "pass" : "fail") << "\n"
            << "rate bounds (per-step contraction factor):\n";
  for (const auto& [name, value] : bounds)
    std::cout << "  " << name << ": " << value << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive sketch-and-project solver benchmark"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "write a seeded gaussian matrix in Matrix Market form");
  skp::Index g_rows = 100, g_cols = 10;
  std::uint64_t g_seed = 0;
  std::string g_out;
  gen->add_option("--rows", g_rows, "row count")->required();
  gen->add_option("--cols", g_cols, "column count")->required();
  gen->add_option("--seed", g_seed, "rng seed");
  gen->add_option("--out", g_out, "output path")->required();

  auto* solve = app.add_subcommand("solve", "run one solver trial");
  std::string s_matrix, s_method = "kaczmarz", s_rule = "maxdist", s_trace;
  skp::Index s_iters = 1000;
  std::uint64_t s_seed = 0;
  solve->add_option("--matrix", s_matrix, "Matrix Market file")->required();
  solve->add_option("--method", s_method, "kaczmarz | cd | block:TAU");
  solve->add_option("--rule", s_rule,
                    "uniform | rownorm | fixed:<path> | maxdist | proportional | capped:<theta>");
  solve->add_option("--iters", s_iters, "iteration budget");
  solve->add_option("--seed", s_seed, "rng seed");
  solve->add_option("--trace", s_trace, "trace CSV output path");

  auto* bench = app.add_subcommand("bench", "run the experiment protocol from a config file");
  std::string b_config;
  bench->add_option("--config", b_config, "key-value config file")->required();

  auto* analyze = app.add_subcommand("analyze", "spectral constants and rate bounds");
  std::string a_matrix, a_method = "kaczmarz", a_rule = "maxdist";
  double a_theta = 0.5;
  std::uint64_t a_seed = 1;
  skp::Index a_probes = 64;
  bool a_json = false;
  analyze->add_option("--matrix", a_matrix, "Matrix Market file")->required();
  analyze->add_option("--method", a_method, "kaczmarz | cd | block:TAU");
  analyze->add_option("--rule", a_rule, "reference rule for sigma_p^2 and gamma");
  analyze->add_option("--theta", a_theta, "cap parameter for the capped bounds");
  analyze->add_option("--seed", a_seed, "seed for the solution and probe directions");
  analyze->add_option("--probes", a_probes, "probe directions for the sigma_inf estimate");
  analyze->add_flag("--json", a_json, "emit the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (gen->parsed()) return cmd_gen(g_rows, g_cols, g_seed, g_out);
    if (solve->parsed()) return cmd_solve(s_matrix, s_method, s_rule, s_iters, s_seed, s_trace);
    if (bench->parsed()) return cmd_bench(b_config);
    if (analyze->parsed())
      return cmd_analyze(a_matrix, a_method, a_rule, a_theta, a_seed, a_probes, a_json);
  } catch (const skp::unsupported& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return kExitUnsupported;
  } catch (const skp::invalid_input& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const skp::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitOk;
}
