#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "skp/error.hpp"
#include "skp/matrix_market.hpp"
#include "skp/solver.hpp"

namespace skp {

inline DenseMat generate_gaussian(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw invalid_input("generate_gaussian: dimensions must be >= 1");
  RngStream rng(seed);
  DenseMat a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = rng.next_normal();
  return a;
}

/// x* = A^T w / ||A^T w||_B with w ~ N(0, I_m), so x* lies in the row space
/// of A with unit B-norm; b = A x* is consistent by construction. Degenerate
/// draws (A^T w = 0) are retried up to ten times.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> generate_solution(const Mat& a,
                                                                     const InnerProduct& inner,
                                                                     std::uint64_t seed) {
  RngStream rng(seed, kSolutionStream);
  for (int attempt = 0; attempt < 10; ++attempt) {
    Eigen::VectorXd w(a.rows());
    for (Index i = 0; i < a.rows(); ++i) w[i] = rng.next_normal();
    Eigen::VectorXd y = a.transpose_times(w);
    const double nb = std::sqrt(b_norm_sq(y, inner, &a));
    if (nb > 1e-30) {
      Eigen::VectorXd x_star = y / nb;
      return {x_star, a * x_star};
    }
  }
  throw invalid_input("generate_solution: A^T w vanished on every attempt; A is degenerate");
}

struct GaussianSpec {
  Index rows = 0;
  Index cols = 0;
  std::uint64_t seed = 0;
};

struct ExperimentSpec {
  std::variant<std::string, GaussianSpec> source;
  Method method = Method::kKaczmarz;
  Index block_tau = 2;  // block method only
  std::vector<std::string> rules;
  Index trials = 50;
  Index iterations = 1000;
  std::uint64_t base_seed = 0;
  std::string outputs = ".";
  Index refresh_every = 1000;
  bool emit_mean = false;
  // programmatic switches for callers that need only one half of the protocol
  bool compute_curves = true;
  bool compute_step_factors = true;

  void validate() const {
    if (trials < 1) throw invalid_input("ExperimentSpec: trials must be >= 1");
    if (iterations < 1) throw invalid_input("ExperimentSpec: iterations must be >= 1");
    if (rules.empty()) throw invalid_input("ExperimentSpec: no rules given");
  }
};

/// Rule strings exposed on the CLI: uniform | rownorm | fixed:<path> |
/// maxdist | proportional | capped:<theta>.
inline SamplingRule parse_rule(const std::string& text) {
  if (text == "uniform") return SamplingRule::uniform();
  if (text == "rownorm") return SamplingRule::norm_proportional();
  if (text == "maxdist") return SamplingRule::max_distance();
  if (text == "proportional") return SamplingRule::proportional_to_loss();
  if (text.rfind("capped", 0) == 0) {
    double theta = 0.5;
    if (text.size() > 6) {
      if (text[6] != ':') throw invalid_input("parse_rule: expected capped:<theta>");
      try {
        theta = std::stod(text.substr(7));
      } catch (const std::exception&) {
        throw invalid_input("parse_rule: bad theta in '" + text + "'");
      }
    }
    return SamplingRule::capped(theta);
  }
  if (text.rfind("fixed:", 0) == 0) {
    const std::string path = text.substr(6);
    std::ifstream in(path);
    if (!in) throw invalid_input("parse_rule: cannot open distribution file " + path);
    std::vector<double> vals;
    double v;
    while (in >> v) vals.push_back(v);
    Eigen::VectorXd p = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
    check_simplex(p);
    return SamplingRule::fixed(std::move(p));
  }
  throw invalid_input("parse_rule: unknown rule '" + text + "'");
}

/// Linear-interpolation percentile (the numpy definition) of an unsorted
/// sample; pct in [0, 100].
inline double percentile(std::vector<double> v, double pct) {
  if (v.empty()) throw invalid_input("percentile: empty sample");
  std::sort(v.begin(), v.end());
  const double h = (pct / 100.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct CurvePoint {
  Index k = 0;
  std::uint64_t flops = 0;
  double median_err = 0.0;
  double p025 = 0.0;
  double p975 = 0.0;
  double mean = 0.0;
};

struct RuleResult {
  std::string rule;
  std::vector<CurvePoint> curve;
  double min_step_factor = std::numeric_limits<double>::infinity();
};

struct ExperimentResult {
  std::vector<RuleResult> rules;
  Index trials = 0;
  Index iterations = 0;
};

namespace detail {

inline void parallel_for_trials(Index trials, const std::function<void(Index)>& body) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      static_cast<unsigned>(std::min<Index>(trials, static_cast<Index>(hw)));
  if (workers <= 1) {
    for (Index t = 0; t < trials; ++t) body(t);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const Index t = next.fetch_add(1);
        if (t >= trials || failed.load()) return;
        try {
          body(t);
        } catch (...) {
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load()) throw invalid_input("run_experiment: a trial failed");
}

}  // namespace detail

inline Mat load_source(const ExperimentSpec& spec) {
  if (std::holds_alternative<std::string>(spec.source))
    return load_matrix_market(std::get<std::string>(spec.source));
  const auto& g = std::get<GaussianSpec>(spec.source);
  return Mat(generate_gaussian(g.rows, g.cols, g.seed));
}

inline SketchSet sketch_set_for(const ExperimentSpec& spec, Index m) {
  switch (spec.method) {
    case Method::kKaczmarz: return SketchSet::row_identity();
    case Method::kCoordinateDescent: return SketchSet::column_of_a();
    case Method::kGeneral: return SketchSet::contiguous_row_blocks(m, spec.block_tau);
  }
  return SketchSet::row_identity();
}

inline InnerProduct inner_for(Method method) {
  return method == Method::kCoordinateDescent ? InnerProduct::gram_of_a()
                                              : InnerProduct::identity();
}

/// The full benchmark protocol: one matrix per experiment; error curves use a
/// single shared solution across trials while step-factor statistics use a
/// fresh solution per trial; per-iteration medians and 2.5/97.5 percentiles
/// are taken pointwise across trials, with converged trials padded at their
/// final error. Trials run concurrently; aggregation is a deterministic
/// post-pass, so identical specs give identical results.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Mat a = load_source(spec);
  const InnerProduct inner = inner_for(spec.method);
  auto [x_shared, b_shared] = generate_solution(a, inner, spec.base_seed);
  const LinearSystem sys(a, b_shared, inner, x_shared);
  const SketchSet sketches = sketch_set_for(spec, sys.rows());
  const PrecomputedOperators ops = PrecomputedOperators::precompute(sys, sketches);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(sys.cols());

  ExperimentResult result;
  result.trials = spec.trials;
  result.iterations = spec.iterations;

  StopCriteria stop{.max_iters = spec.iterations,
                    .error_tol = 0.0,
                    .refresh_every = spec.refresh_every};
  RunOptions trace_opts{.record_trace = true};

  for (const std::string& rule_text : spec.rules) {
    const SamplingRule rule = parse_rule(rule_text);
    RuleResult rr;
    rr.rule = rule_text;

    // Pass 1: error curves against the shared solution.
    if (spec.compute_curves) {
      std::vector<std::vector<double>> errs(spec.trials);
      detail::parallel_for_trials(spec.trials, [&](Index t) {
        RngStream rng(spec.base_seed + static_cast<std::uint64_t>(t));
        TrialTrace trace = run(sys, ops, rule, stop, x0, rng, trace_opts);
        std::vector<double> e(static_cast<std::size_t>(spec.iterations) + 1);
        for (Index k = 0; k <= spec.iterations; ++k) {
          const auto idx = static_cast<std::size_t>(k);
          e[idx] = idx < trace.rows.size() ? trace.rows[idx].err_b_sq
                                           : trace.rows.back().err_b_sq;
        }
        errs[static_cast<std::size_t>(t)] = std::move(e);
      });

      const std::uint64_t per_iter =
          flops_per_iteration(flop_model_for(sys, ops), rule.kind);
      rr.curve.resize(static_cast<std::size_t>(spec.iterations) + 1);
      for (Index k = 0; k <= spec.iterations; ++k) {
        std::vector<double> sample(spec.trials);
        double total = 0.0;
        for (Index t = 0; t < spec.trials; ++t) {
          sample[static_cast<std::size_t>(t)] =
              errs[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
          total += sample[static_cast<std::size_t>(t)];
        }
        CurvePoint& pt = rr.curve[static_cast<std::size_t>(k)];
        pt.k = k;
        pt.flops = static_cast<std::uint64_t>(k) * per_iter;
        pt.median_err = percentile(sample, 50.0);
        pt.p025 = percentile(sample, 2.5);
        pt.p975 = percentile(std::move(sample), 97.5);
        pt.mean = total / static_cast<double>(spec.trials);
      }
    }

    // Pass 2: minimal expected step size factor with a fresh solution per
    // trial (the greedy rule is deterministic; fresh solutions restore
    // variation across trials).
    if (spec.compute_step_factors) {
      std::vector<double> mins(spec.trials,
                               std::numeric_limits<double>::infinity());
      detail::parallel_for_trials(spec.trials, [&](Index t) {
        const std::uint64_t trial_seed =
            spec.base_seed + static_cast<std::uint64_t>(spec.trials + t);
        auto [xs, bs] = generate_solution(a, inner, trial_seed);
        const LinearSystem tsys(a, bs, inner, xs);
        const PrecomputedOperators tops = PrecomputedOperators::precompute(tsys, sketches);
        TrialTrace trace =
            run(tsys, tops, rule, stop, x0, RngStream(trial_seed), trace_opts);
        double mn = std::numeric_limits<double>::infinity();
        for (const TraceRow& row : trace.rows)
          if (std::isfinite(row.step_factor) && row.step_factor < mn) mn = row.step_factor;
        mins[static_cast<std::size_t>(t)] = mn;
      });
      for (double mn : mins)
        if (mn < rr.min_step_factor) rr.min_step_factor = mn;
    }

    result.rules.push_back(std::move(rr));
  }
  return result;
}

inline std::string sanitize_rule_name(const std::string& rule) {
  std::string out = rule;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_')
      c = '_';
  return out;
}

/// One `<rule>_curve.csv` per rule plus `step_factors.csv`, numbers written
/// with 17 significant digits so values round-trip exactly.
inline std::vector<std::string> emit_csv(const ExperimentResult& result,
                                         const std::string& dir, bool emit_mean = false) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::vector<std::string> written;
  char buf[512];

  for (const RuleResult& rr : result.rules) {
    const std::string path = (fs::path(dir) / (sanitize_rule_name(rr.rule) + "_curve.csv")).string();
    std::ofstream out(path);
    if (!out) throw parse_error(path + ": cannot open file for writing");
    out << (emit_mean ? "k,flops,median_err,p025,p975,mean\n"
                      : "k,flops,median_err,p025,p975\n");
    for (const CurvePoint& pt : rr.curve) {
      if (emit_mean) {
        std::snprintf(buf, sizeof buf, "%lld,%llu,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(pt.k),
                      static_cast<unsigned long long>(pt.flops), pt.median_err, pt.p025,
                      pt.p975, pt.mean);
      } else {
        std::snprintf(buf, sizeof buf, "%lld,%llu,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(pt.k),
                      static_cast<unsigned long long>(pt.flops), pt.median_err, pt.p025,
                      pt.p975);
      }
      out << buf;
    }
    written.push_back(path);
  }

  const std::string sf_path = (fs::path(dir) / "step_factors.csv").string();
  std::ofstream out(sf_path);
  if (!out) throw parse_error(sf_path + ": cannot open file for writing");
  out << "rule,min_step_factor\n";
  for (const RuleResult& rr : result.rules) {
    std::snprintf(buf, sizeof buf, "%s,%.17g\n", rr.rule.c_str(), rr.min_step_factor);
    out << buf;
  }
  written.push_back(sf_path);
  return written;
}

/// Key-value config mirroring ExperimentSpec: '#' comments, one `key = value`
/// per line. Matrix source is either `matrix_file` or the three
/// `gaussian_rows/gaussian_cols/gaussian_seed` keys.
inline ExperimentSpec parse_experiment_config(std::istream& in,
                                              const std::string& name = "<config>") {
  ExperimentSpec spec;
  GaussianSpec gauss;
  bool have_file = false, have_gauss = false;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw detail::at_line(name, line_no, "expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "matrix_file") {
        spec.source = value;
        have_file = true;
      } else if (key == "gaussian_rows") {
        gauss.rows = std::stoll(value);
        have_gauss = true;
      } else if (key == "gaussian_cols") {
        gauss.cols = std::stoll(value);
        have_gauss = true;
      } else if (key == "gaussian_seed") {
        gauss.seed = std::stoull(value);
        have_gauss = true;
      } else if (key == "method") {
        if (value == "kaczmarz") {
          spec.method = Method::kKaczmarz;
        } else if (value == "cd") {
          spec.method = Method::kCoordinateDescent;
        } else if (value.rfind("block:", 0) == 0) {
          spec.method = Method::kGeneral;
          spec.block_tau = std::stoll(value.substr(6));
        } else {
          throw detail::at_line(name, line_no, "unknown method '" + value + "'");
        }
      } else if (key == "rules") {
        std::istringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          const std::string r = trim(tok);
          if (!r.empty()) spec.rules.push_back(r);
        }
      } else if (key == "trials") {
        spec.trials = std::stoll(value);
      } else if (key == "iterations") {
        spec.iterations = std::stoll(value);
      } else if (key == "base_seed") {
        spec.base_seed = std::stoull(value);
      } else if (key == "outputs") {
        spec.outputs = value;
      } else if (key == "refresh_every") {
        spec.refresh_every = std::stoll(value);
      } else if (key == "emit_mean") {
        spec.emit_mean = value == "true" || value == "1";
      } else {
        throw detail::at_line(name, line_no, "unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw detail::at_line(name, line_no, "bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw detail::at_line(name, line_no, "value out of range for '" + key + "'");
    }
  }
  if (have_file == have_gauss)
    throw parse_error(name + ": give exactly one of matrix_file or gaussian_* keys");
  if (have_gauss) spec.source = gauss;
  spec.validate();
  return spec;
}

inline ExperimentSpec load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(path + ": cannot open file");
  return parse_experiment_config(in, path);
}

}  // namespace skp
