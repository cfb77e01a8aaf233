#include "mppf/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "mppf/bench.hpp"
#include "mppf/dataset.hpp"
#include "mppf/error.hpp"
#include "mppf/filters.hpp"
#include "mppf/mlmc.hpp"
#include "mppf/parallel.hpp"
#include "mppf/score.hpp"
#include "mppf/version.hpp"

namespace mppf {

namespace {

struct RunConfig {
  std::string command;
  std::optional<std::string> model;
  std::optional<double> theta_b, theta_lambda, theta_sigma, x_star, sigma, nu;
  long T = 10;
  int level = 4;
  int l0 = 0;
  long particles = 1000;
  std::vector<double> eps{0.125};
  std::vector<long> M{100};
  int reps = 10;
  std::uint64_t seed = 1;
  std::string data;
  std::string out;
  std::string quadrature = "right";
  int data_level = 10;
  std::string truth_out;
  std::string kind = "pf";
  std::vector<int> levels{2, 3, 4, 5, 6};
  double C = 1.0;
  double pf_constant = 1.0;
  std::optional<long> N0;
  std::optional<int> L_trunc, P_trunc;
  long iterations = 100;
  long window = 10;
  std::vector<double> alpha0;
  double beta = 0.6;
  unsigned threads = 1;
  std::optional<int> ref_level;
  long ref_particles = 1000000;
  int ref_reps = 20;
  std::optional<double> reference;
  std::string phi = "x";
};

std::string fmt_opt(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += format_real(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

/// key=value echo of the full configuration, usable as a --config file.
std::vector<std::pair<std::string, std::string>> echo(const RunConfig& c) {
  return {{"model", c.model.value_or("")},
          {"theta-b", fmt_opt(c.theta_b)},
          {"theta-lambda", fmt_opt(c.theta_lambda)},
          {"theta-sigma", fmt_opt(c.theta_sigma)},
          {"x-star", fmt_opt(c.x_star)},
          {"sigma", fmt_opt(c.sigma)},
          {"nu", fmt_opt(c.nu)},
          {"T", std::to_string(c.T)},
          {"level", std::to_string(c.level)},
          {"l0", std::to_string(c.l0)},
          {"particles", std::to_string(c.particles)},
          {"eps", join(c.eps)},
          {"M", join(c.M)},
          {"reps", std::to_string(c.reps)},
          {"seed", std::to_string(c.seed)},
          {"data", c.data},
          {"quadrature", c.quadrature},
          {"data-level", std::to_string(c.data_level)},
          {"kind", c.kind},
          {"levels", join(c.levels)},
          {"C", format_real(c.C)},
          {"pf-constant", format_real(c.pf_constant)},
          {"N0", c.N0 ? std::to_string(*c.N0) : ""},
          {"L-trunc", c.L_trunc ? std::to_string(*c.L_trunc) : ""},
          {"P-trunc", c.P_trunc ? std::to_string(*c.P_trunc) : ""},
          {"iterations", std::to_string(c.iterations)},
          {"window", std::to_string(c.window)},
          {"alpha0", join(c.alpha0)},
          {"beta", format_real(c.beta)},
          {"ref-level", c.ref_level ? std::to_string(*c.ref_level) : ""},
          {"ref-particles", std::to_string(c.ref_particles)},
          {"ref-reps", std::to_string(c.ref_reps)},
          {"reference", fmt_opt(c.reference)},
          {"phi", c.phi}};
}

void write_header(std::ostream& os, const RunConfig& c) {
  os << "# mppf " << kVersion << '\n';
  os << "# command=" << c.command << '\n';
  os << "# master_seed=" << c.seed << '\n';
  for (const auto& [k, v] : echo(c)) {
    if (!v.empty()) os << "# " << k << '=' << v << '\n';
  }
}

TestFunction parse_phi(const std::string& name) {
  if (name == "x") return identity_function();
  if (name == "x2") return [](double x) { return x * x; };
  throw ConfigError("unknown test function '" + name + "' (use x or x2)");
}

Quadrature quadrature_of(const RunConfig& c) {
  std::string q = c.quadrature;
  std::transform(q.begin(), q.end(), q.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (q == "left") return Quadrature::Left;
  if (q == "right") return Quadrature::Right;
  throw ConfigError("quadrature must be left or right");
}

void apply_overrides(const RunConfig& c, ModelSpec& spec) {
  if (c.theta_b) spec.theta.theta_b = *c.theta_b;
  if (c.theta_lambda) spec.theta.theta_lambda = *c.theta_lambda;
  if (c.theta_sigma) spec.theta.theta_Sigma = *c.theta_sigma;
  if (c.x_star) spec.x_star = *c.x_star;
  if (c.sigma) spec.theta.fixed_params["sigma"] = *c.sigma;
  if (c.nu) spec.theta.fixed_params["nu"] = *c.nu;
  spec.validate();
}

MarkedDataset load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("--data is required for " + c.command);
  return read_dataset(c.data);
}

ModelSpec filter_model(const RunConfig& c, const MarkedDataset& ds) {
  ModelSpec spec = ds.meta.model;
  if (c.model) {
    const ModelId id = parse_model_id(*c.model);
    if (id != spec.model_id) spec = default_model(id);
  }
  apply_overrides(c, spec);
  return spec;
}

Randomization randomization_of(const RunConfig& c, const ModelSpec& spec) {
  const Randomization d = spec.model_id == ModelId::GBM ? default_randomization_gbm()
                                                         : default_randomization();
  return build_randomization(c.l0, c.L_trunc.value_or(d.L_trunc), c.P_trunc.value_or(d.P_trunc),
                             c.N0.value_or(d.N0));
}

void run_generate(const RunConfig& c, std::ostream& os) {
  ModelSpec spec = default_model(parse_model_id(c.model.value_or("OU")));
  apply_overrides(c, spec);
  const GeneratedData gen = generate_dataset(spec, c.T, c.data_level, c.seed);
  write_dataset(gen.dataset, os);
  if (!c.truth_out.empty()) {
    std::ofstream t(c.truth_out);
    if (!t) throw ConfigError("cannot open " + c.truth_out);
    write_truth(gen.truth, t);
  }
}

void run_filter(const RunConfig& c, std::ostream& os, bool coupled) {
  const MarkedDataset ds = load_data(c);
  const ModelSpec spec = filter_model(c, ds);
  FilterConfig fc;
  fc.level = c.level;
  fc.N = c.particles;
  fc.T = c.T;
  fc.quadrature = quadrature_of(c);
  fc.key = SeedKey(c.seed);
  fc.test_functions = {parse_phi(c.phi)};
  const FilterOutput out = coupled ? run_cpf(spec, ds, fc) : run_pf(spec, ds, fc);
  write_header(os, c);
  os << "t,estimate,cost_steps\n";
  for (long t = 1; t <= c.T; ++t) {
    const std::uint64_t cost =
        coupled ? cpf_cost(c.level, c.particles, t) : pf_cost(c.level, c.particles, t);
    os << t << ',' << format_real(out.estimates[t - 1][0]) << ',' << cost << '\n';
  }
}

void run_mlpf_cmd(const RunConfig& c, std::ostream& os) {
  const MarkedDataset ds = load_data(c);
  const ModelSpec spec = filter_model(c, ds);
  if (c.eps.empty()) throw ConfigError("--eps is required");
  const MlAllocation alloc = mlpf_allocate(c.eps.front(), c.l0, c.C);
  MlpfOptions opts;
  opts.quadrature = quadrature_of(c);
  const MlpfResult res =
      run_mlpf(spec, ds, c.T, alloc, {parse_phi(c.phi)}, SeedKey(c.seed), opts);
  write_header(os, c);
  os << "# L=" << alloc.L << '\n';
  os << "# N_levels=" << join(alloc.N_levels) << '\n';
  os << "t,estimate,cost_steps\n";
  for (long t = 1; t <= c.T; ++t) {
    os << t << ',' << format_real(res.estimates[t - 1][0]) << ',' << mlpf_cost(alloc, t) << '\n';
  }
}

void run_upf_cmd(const RunConfig& c, std::ostream& os) {
  const MarkedDataset ds = load_data(c);
  const ModelSpec spec = filter_model(c, ds);
  if (c.M.empty()) throw ConfigError("--M is required");
  const Randomization rand = randomization_of(c, spec);
  const UpfResult res = upf_estimate(spec, ds, c.T, rand, parse_phi(c.phi), c.M.front(),
                                     SeedKey(c.seed), quadrature_of(c));
  write_header(os, c);
  os << "replicate,L,p,xi,weighted_value,cost_steps\n";
  for (const UpfReplicate& r : res.replicates) {
    os << r.index << ',' << r.level << ',' << r.p << ',' << format_real(r.xi) << ','
       << format_real(r.weighted_value) << ',' << r.cost_steps << '\n';
  }
  os << "summary,,," << format_real(res.std_error) << ',' << format_real(res.mean) << ','
     << res.total_cost << '\n';
}

void run_score_cmd(const RunConfig& c, std::ostream& os) {
  const MarkedDataset ds = load_data(c);
  const ModelSpec spec = filter_model(c, ds);
  ScoreConfig sc;
  sc.level = c.level;
  sc.N = c.particles;
  sc.T = c.T;
  sc.quadrature = quadrature_of(c);
  sc.key = SeedKey(c.seed);
  const ScoreOutput out = run_score_filter(spec, ds, sc);
  write_header(os, c);
  os << "t,estimate,coordinate,cost_steps\n";
  const auto n = static_cast<std::uint64_t>(c.particles);
  for (long t = 1; t <= c.T; ++t) {
    const std::uint64_t cost = pf_cost(c.level, c.particles, t) +
                               static_cast<std::uint64_t>(t - 1) * n * n;
    for (std::size_t k = 0; k < out.coordinates.size(); ++k) {
      os << t << ',' << format_real(out.estimates[t - 1][k]) << ','
         << to_string(out.coordinates[k]) << ',' << cost << '\n';
    }
  }
}

void run_sga_cmd(const RunConfig& c, std::ostream& os) {
  const MarkedDataset ds = load_data(c);
  const ModelSpec spec = filter_model(c, ds);
  const auto coords = score_coordinates(spec.model_id);
  SgaConfig cfg;
  cfg.alpha0 = c.alpha0.empty() ? std::vector<double>(coords.size(), 0.01) : c.alpha0;
  cfg.beta = c.beta;
  cfg.window_c = c.window;
  cfg.iterations = c.iterations;
  cfg.theta_init = spec.theta;
  const SgaResult res =
      sga_run(spec, ds, c.level, c.particles, cfg, SeedKey(c.seed), quadrature_of(c));
  write_header(os, c);
  os << "# projections=" << res.projections << '\n';
  os << 'm';
  for (std::size_t k = 0; k < coords.size(); ++k) os << ",theta_" << k + 1;
  for (std::size_t k = 0; k < coords.size(); ++k) os << ",score_" << k + 1;
  os << ",alpha_m\n";
  for (const SgaIteration& it : res.iterations) {
    os << it.m;
    for (double v : it.theta) os << ',' << format_real(v);
    for (double v : it.score) os << ',' << format_real(v);
    os << ',' << format_real(it.step_factor) << '\n';
  }
}

void run_bench_cmd(const RunConfig& c, std::ostream& os) {
  const MarkedDataset ds = load_data(c);
  const ModelSpec spec = filter_model(c, ds);
  const TestFunction phi = parse_phi(c.phi);
  const Quadrature quad = quadrature_of(c);
  std::ostringstream body;
  std::vector<std::string> notes;

  auto reference = [&]() {
    ReferenceValue ref;
    if (c.reference) {
      ref.mean = *c.reference;
      return ref;
    }
    ReferenceConfig rc = default_reference_config(ds);
    if (c.ref_level) rc.level = *c.ref_level;
    rc.N = c.ref_particles;
    rc.R = c.ref_reps;
    rc.quadrature = quad;
    rc.key = SeedKey(c.seed).child(0x5EED);
    ref = reference_value(spec, ds, c.T, phi, rc);
    notes.push_back("reference_level=" + std::to_string(rc.level));
    return ref;
  };

  if (c.kind == "coupling_variance" || c.kind == "weak_bias") {
    DecayConfig dc;
    dc.kind = parse_decay_kind(c.kind);
    dc.levels = c.levels;
    dc.N = c.particles;
    dc.R = c.reps;
    dc.T = c.T;
    dc.quadrature = quad;
    dc.key = SeedKey(c.seed);
    dc.phi = phi;
    if (dc.kind == DecayKind::WeakBias) {
      dc.reference = reference();
      notes.push_back("reference=" + format_real(dc.reference->mean));
      notes.push_back("reference_se=" + format_real(dc.reference->std_error));
    }
    const DecayResult res = decay_experiment(spec, ds, dc);
    body << "level,value,mc_error,flagged\n";
    for (const DecayRow& r : res.rows) {
      body << r.level << ',' << format_real(r.value) << ',' << format_real(r.mc_error) << ','
           << (r.flagged ? 1 : 0) << '\n';
    }
    if (res.fit) {
      notes.push_back("fit_slope=" + format_real(res.fit->slope));
      notes.push_back("fit_intercept=" + format_real(res.fit->intercept));
    }
  } else {
    MseConfig mc;
    mc.estimator = parse_estimator(c.kind);
    if (mc.estimator == Estimator::UPF) {
      for (long m : c.M) mc.targets.push_back(static_cast<double>(m));
    } else {
      mc.targets = c.eps;
    }
    mc.reps = c.reps;
    mc.T = c.T;
    mc.l0 = c.l0;
    mc.pf_constant = c.pf_constant;
    mc.ml_constant = c.C;
    mc.randomization = randomization_of(c, spec);
    mc.quadrature = quad;
    mc.key = SeedKey(c.seed);
    mc.phi = phi;
    const ReferenceValue ref = reference();
    notes.push_back("reference=" + format_real(ref.mean));
    notes.push_back("reference_se=" + format_real(ref.std_error));
    const auto rows = mse_cost_experiment(spec, ds, ref.mean, mc);
    body << "target,mse,mean_cost,reps\n";
    for (const MseRow& r : rows) {
      body << format_real(r.target) << ',' << format_real(r.mse) << ','
           << format_real(r.mean_cost) << ',' << r.reps << '\n';
    }
  }
  write_header(os, c);
  for (const auto& n : notes) os << "# " << n << '\n';
  os << body.str();
}

void dispatch(const RunConfig& c, std::ostream& os) {
  if (c.command == "generate") return run_generate(c, os);
  if (c.command == "pf") return run_filter(c, os, false);
  if (c.command == "cpf") return run_filter(c, os, true);
  if (c.command == "mlpf") return run_mlpf_cmd(c, os);
  if (c.command == "upf") return run_upf_cmd(c, os);
  if (c.command == "score") return run_score_cmd(c, os);
  if (c.command == "sga") return run_sga_cmd(c, os);
  if (c.command == "bench") return run_bench_cmd(c, os);
  throw ConfigError("unknown command " + c.command);
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilevel and unbiased particle filters for partially observed diffusions"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);
  RunConfig c;

  app.add_option("--model", c.model, "OU, Langevin, NLDT, GBM or TestConst");
  app.add_option("--theta-b", c.theta_b);
  app.add_option("--theta-lambda", c.theta_lambda);
  app.add_option("--theta-sigma", c.theta_sigma);
  app.add_option("--x-star", c.x_star);
  app.add_option("--sigma", c.sigma, "diffusion scale (OU, GBM)");
  app.add_option("--nu", c.nu, "Langevin degrees of freedom");
  app.add_option("--T", c.T, "horizon in unit times")->capture_default_str();
  app.add_option("--level", c.level)->capture_default_str();
  app.add_option("--l0", c.l0)->capture_default_str();
  app.add_option("--particles", c.particles)->capture_default_str();
  app.add_option("--eps", c.eps, "target epsilon(s)")->delimiter(',')->capture_default_str();
  app.add_option("--M", c.M, "unbiased replicates")->delimiter(',')->capture_default_str();
  app.add_option("--reps", c.reps)->capture_default_str();
  app.add_option("--seed", c.seed)->capture_default_str();
  app.add_option("--data", c.data, "dataset file");
  app.add_option("--out", c.out, "output file (default stdout)");
  app.add_option("--quadrature", c.quadrature, "left or right")->capture_default_str();
  app.add_option("--data-level", c.data_level)->capture_default_str();
  app.add_option("--truth-out", c.truth_out, "generate: write the hidden path here");
  app.add_option("--kind", c.kind, "bench: pf, mlpf, upf, coupling_variance, weak_bias")
      ->capture_default_str();
  app.add_option("--levels", c.levels)->delimiter(',')->capture_default_str();
  app.add_option("--C", c.C, "multilevel allocation constant")->capture_default_str();
  app.add_option("--pf-constant", c.pf_constant, "bench pf: N = constant / eps^2")
      ->capture_default_str();
  app.add_option("--N0", c.N0);
  app.add_option("--L-trunc", c.L_trunc);
  app.add_option("--P-trunc", c.P_trunc);
  app.add_option("--iterations", c.iterations)->capture_default_str();
  app.add_option("--window", c.window, "sga window c")->capture_default_str();
  app.add_option("--alpha0", c.alpha0)->delimiter(',');
  app.add_option("--beta", c.beta)->capture_default_str();
  app.add_option("--threads", c.threads, "worker threads (0 = all cores)")
      ->capture_default_str();
  app.add_option("--ref-level", c.ref_level);
  app.add_option("--ref-particles", c.ref_particles)->capture_default_str();
  app.add_option("--ref-reps", c.ref_reps)->capture_default_str();
  app.add_option("--reference", c.reference, "bench: skip the reference run");
  app.add_option("--phi", c.phi, "test function: x or x2")->capture_default_str();

  const std::map<std::string, std::string> commands{
      {"generate", "simulate a marked dataset"},
      {"pf", "particle filter"},
      {"cpf", "coupled particle filter (level difference)"},
      {"mlpf", "multilevel particle filter"},
      {"upf", "unbiased particle filter"},
      {"score", "online score estimate"},
      {"sga", "stochastic gradient ascent on theta"},
      {"bench", "MSE/cost and decay experiments"}};
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&c, name = name] { c.command = name; });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    set_thread_count(c.threads);
    if (c.out.empty()) {
      dispatch(c, out);
    } else {
      std::ostringstream buffer;
      dispatch(c, buffer);
      std::ofstream f(c.out, std::ios::binary);
      if (!f) throw ConfigError("cannot open output file " + c.out);
      f << buffer.str();
      if (!f) throw ConfigError("failed writing " + c.out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace mppf
