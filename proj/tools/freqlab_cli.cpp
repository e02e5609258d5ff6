// freqlab: experiment runner for the frequency-operator library.
//
// Every subcommand writes {"manifest": ..., "rows": [...]} or
// {"manifest": ..., "report": {...}} as JSON, or a CSV table plus a
// manifest sidecar. Usage errors exit with 2; library errors exit with 1
// and a JSON error object on stderr.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "specs.hpp"

using json = nlohmann::ordered_json;
using namespace freqlab;
using freqlab::cli::UsageError;

namespace {

constexpr int kCsvHeaderVersion = 1;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string format = "json";
  std::string out = "-";
  std::string manifest_path;
  unsigned threads = 0;
  bool omit_timing = false;
};

// A finished run: either a table (rows) or a single report object.
struct Result {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
  std::optional<json> report;
  json config = json::object();
  json summary = json::object();
};

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
    return std::string(buf, res.ptr);
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::uint64_t require_seed(const GlobalOptions& g, const std::string& cmd) {
  if (!g.seed) throw UsageError(cmd + ": --seed is required");
  return *g.seed;
}

unsigned worker_count(const GlobalOptions& g) {
  if (g.threads > 0) return g.threads;
  return std::max(1U, std::thread::hardware_concurrency());
}

json complex_matrix(const Matrix& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array(), c = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      r.push_back(m(i, j).real());
      c.push_back(m(i, j).imag());
    }
    re.push_back(r);
    im.push_back(c);
  }
  return json{{"real", re}, {"imag", im}};
}

std::size_t check_outcome(std::size_t outcome, std::size_t D) {
  if (outcome >= D) throw UsageError("--outcome must be below the state dimension " + std::to_string(D));
  return outcome;
}

// fh-converge ---------------------------------------------------------------

struct FhOptions {
  std::string state = "q=0.5";
  std::string sweep;
  std::size_t outcome = 0;
  std::size_t dense_cap = kDefaultStateCap;
};

Result run_fh(const FhOptions& o) {
  const PureState psi = cli::parse_state(o.state);
  const auto sweep = cli::parse_sweep(o.sweep, "--N");
  const auto obs = Observable::computational(psi.dim()).with_outcome_first(check_outcome(o.outcome, psi.dim()));

  Result r;
  r.columns = {"N", "delta_analytic", "delta_dense"};
  std::vector<double> xs, ys;
  double q = 0.0;
  for (std::size_t N : sweep) {
    const auto fh = fh_residual(psi, obs, N, ResidualMode::analytic);
    q = fh.q;
    json dense = nullptr;
    if (o.dense_cap > 0 && TensorSpace::fits(psi.dim(), N, o.dense_cap)) {
      dense = fh_residual(psi, obs, N, ResidualMode::dense, o.dense_cap).delta;
    }
    r.rows.push_back({N, fh.delta, dense});
    if (fh.delta > 0.0) {
      xs.push_back(static_cast<double>(N));
      ys.push_back(fh.delta);
    }
  }
  r.config = {{"state", o.state}, {"N", sweep}, {"outcome", o.outcome}, {"dense_cap", o.dense_cap}};
  r.summary = {{"q", q}, {"loglog_slope", xs.size() >= 2 ? json(fit_loglog_slope(xs, ys)) : json(nullptr)}};
  return r;
}

// squires -------------------------------------------------------------------

struct SquiresOptions {
  double q = 0.5;
  std::string sweep;
};

Result run_squires(const SquiresOptions& o) {
  if (!(o.q >= 0.0 && o.q <= 1.0)) throw UsageError("--q must lie in [0,1]");
  const auto sweep = cli::parse_sweep(o.sweep, "--N");
  Result r;
  r.columns = {"N", "max_overlap"};
  bool decreasing = true;
  double prev = 2.0;
  for (std::size_t N : sweep) {
    const double m = squires_max_overlap(o.q, N);
    decreasing = decreasing && m < prev;
    prev = m;
    r.rows.push_back({N, m});
  }
  r.config = {{"q", o.q}, {"N", sweep}};
  r.summary = {{"strictly_decreasing", decreasing}};
  return r;
}

// simulate ------------------------------------------------------------------

struct SimulateOptions {
  std::string state;
  std::string prefix;
  std::string g = "power:2";
  std::size_t M = 1000;
  std::size_t L = 100000;
  std::size_t outcome = 0;
  bool trajectories = false;
};

Result run_simulate(const SimulateOptions& o, const GlobalOptions& g) {
  const std::uint64_t seed = require_seed(g, "simulate");
  const PureState tail = cli::parse_state(o.state);
  const GMeasure measure = cli::parse_g(o.g);
  if (o.M < 1 || o.L < 1) throw UsageError("simulate: --M and --L must be positive");
  const VectorSequence seq(tail, cli::parse_state_list(o.prefix));
  const auto obs = Observable::computational(tail.dim());
  const auto rep = strong_law_experiment(seq, obs, measure, check_outcome(o.outcome, tail.dim()), o.M, o.L,
                                         RandomSource(seed), worker_count(g));
  Result r;
  r.columns = {"analytic_f", "empirical_mean", "empirical_sd", "trajectories", "prefix_length", "outlier_fraction"};
  json report = {{"analytic_f", rep.analytic_f},     {"empirical_mean", rep.empirical_mean},
                 {"empirical_sd", rep.empirical_sd}, {"trajectories", rep.trajectories},
                 {"prefix_length", rep.prefix_length}, {"outlier_fraction", rep.outlier_fraction}};
  if (o.trajectories) report["frequencies"] = rep.frequencies;
  r.report = report;
  r.config = {{"state", o.state}, {"prefix", o.prefix}, {"g", measure.describe()}, {"M", o.M},
              {"L", o.L},         {"outcome", o.outcome}, {"seed", seed}};
  r.summary = {{"gap", rep.empirical_mean - rep.analytic_f}};
  return r;
}

// contextuality -------------------------------------------------------------

struct ContextOptions {
  std::string state = "uniform:3";
  std::string g = "power:4";
  std::size_t pairs = 0;
};

Result run_contextuality(const ContextOptions& o, const GlobalOptions& g) {
  const PureState psi = cli::parse_state(o.state);
  const GMeasure measure = cli::parse_g(o.g);
  const auto pair = contextuality_witness(psi);
  const auto rec = contextuality_probe(psi, pair.a, pair.b, pair.shared_a, pair.shared_b, measure);

  json report = {{"witness", {{"qA", rec.qA}, {"qB", rec.qB}, {"delta", rec.delta}}}};
  json config = {{"state", o.state}, {"g", measure.describe()}, {"pairs", o.pairs}};
  if (o.pairs > 0) {
    const std::uint64_t seed = require_seed(g, "contextuality");
    const auto audit = noncontextuality_audit(FrameCandidate::gmeasure(measure, psi), psi.dim(), o.pairs,
                                              RandomSource(seed));
    report["audit"] = {{"pairs_tested", audit.bases_tested},
                       {"max_context_deviation", audit.max_context_deviation}};
    config["seed"] = seed;
  }
  Result r;
  r.columns = {"qA", "qB", "delta"};
  r.report = report;
  r.config = config;
  r.summary = {{"delta", rec.delta}};
  return r;
}

// gleason-fit ---------------------------------------------------------------

struct GleasonOptions {
  std::string candidate = "born";
  std::string rho = "mixed";
  std::string g = "power:4";
  std::string state;
  std::size_t dim = 3;
  std::size_t bases = 200;
};

// "mixed", "random" or "diag:p0,p1,...".
DensityOperator parse_rho(const std::string& spec, std::size_t D, RandomSource& rng) {
  if (spec == "mixed") return DensityOperator::maximally_mixed(D);
  if (spec == "random") return DensityOperator::random(D, rng);
  if (spec.rfind("diag:", 0) == 0) {
    std::vector<double> p;
    for (const auto& item : cli::split(spec.substr(5), ',')) p.push_back(cli::parse_real(item, "--rho"));
    if (p.size() != D) throw UsageError("--rho: diagonal has " + std::to_string(p.size()) + " entries, D is " +
                                        std::to_string(D));
    double total = 0.0;
    for (double x : p) {
      if (x < 0.0) throw UsageError("--rho: negative diagonal entry");
      total += x;
    }
    if (total <= 0.0) throw UsageError("--rho: diagonal sums to zero");
    for (double& x : p) x /= total;
    return DensityOperator::diagonal(p);
  }
  throw UsageError("--rho: expected mixed, random or diag:<p0,p1,...>");
}

Result run_gleason(const GleasonOptions& o, const GlobalOptions& g) {
  const std::uint64_t seed = require_seed(g, "gleason-fit");
  const RandomSource root(seed);
  RandomSource rho_stream = root.fork(0);
  const RandomSource basis_stream = root.fork(1);

  std::optional<DensityOperator> source;
  std::optional<FrameCandidate> candidate;
  json config = {{"candidate", o.candidate}};
  if (o.candidate == "born") {
    if (o.dim < 2) throw UsageError("--D must be at least 2");
    source = parse_rho(o.rho, o.dim, rho_stream);
    candidate = FrameCandidate::born(*source);
    config["rho"] = o.rho;
  } else if (o.candidate == "gmeasure") {
    const PureState psi = cli::parse_state(o.state.empty() ? "uniform:" + std::to_string(o.dim) : o.state);
    const GMeasure measure = cli::parse_g(o.g);
    candidate = FrameCandidate::gmeasure(measure, psi);
    config["g"] = measure.describe();
    config["state"] = o.state.empty() ? "uniform:" + std::to_string(o.dim) : o.state;
  } else {
    throw UsageError("--candidate: expected born or gmeasure");
  }
  const std::size_t D = candidate->dim();
  config["D"] = D;
  config["bases"] = o.bases;
  config["seed"] = seed;

  const auto samples = frame_samples(*candidate, o.bases, basis_stream);
  const auto fit = fit_density(samples, D);
  const auto sums = frame_sum_audit(*candidate, D, o.bases, basis_stream);

  json report = {{"samples", samples.size()},
                 {"residual", fit.residual},
                 {"min_eigenvalue", fit.min_eigenvalue},
                 {"is_density_operator", fit.rho.has_value()},
                 {"max_sum_deviation", sums.max_sum_deviation}};
  json frob = nullptr;
  if (source) frob = (fit.estimate - source->matrix()).norm();
  report["frobenius_error"] = frob;
  report["estimate"] = complex_matrix(fit.estimate);

  Result r;
  r.columns = {"samples", "residual", "min_eigenvalue", "is_density_operator", "max_sum_deviation",
               "frobenius_error"};
  r.report = report;
  r.config = config;
  r.summary = {{"residual", fit.residual}};
  return r;
}

// components ----------------------------------------------------------------

struct ComponentsOptions {
  std::string tail;
  std::string base_prefix;
  std::string phi_tail;
  std::string phi_prefix;
  std::string cutoffs = "0,1,2,4,8";
};

Result run_components(const ComponentsOptions& o) {
  const PureState tail = cli::parse_state(o.tail);
  const VectorSequence base(tail, cli::parse_state_list(o.base_prefix));
  const VectorSequence phi(o.phi_tail.empty() ? tail : cli::parse_state(o.phi_tail),
                           cli::parse_state_list(o.phi_prefix));
  const auto cutoffs = cli::parse_sweep(o.cutoffs, "--cutoff", 0);
  const auto overlap = sequence_overlap(base, phi);
  const bool eq = equivalent(base, phi);

  Result r;
  r.columns = {"cutoff", "partial_sum", "bound"};
  for (std::size_t N : cutoffs) {
    const auto rec = completeness_check(base, phi, N);
    r.rows.push_back({N, rec.partial_sum, rec.bound});
  }
  r.config = {{"tail", o.tail},
              {"base_prefix", o.base_prefix},
              {"phi_tail", o.phi_tail.empty() ? o.tail : o.phi_tail},
              {"phi_prefix", o.phi_prefix},
              {"cutoff", cutoffs}};
  r.summary = {{"equivalent", eq},
               {"overlap", overlap.value()},
               {"prefix_log", std::isfinite(overlap.prefix_log) ? json(overlap.prefix_log) : json(nullptr)},
               {"tail_rate", std::isfinite(overlap.tail_rate) ? json(overlap.tail_rate) : json(nullptr)},
               {"converges", overlap.converges}};
  return r;
}

// output --------------------------------------------------------------------

json make_manifest(const std::string& cmd, const Result& r, const GlobalOptions& g, double seconds) {
  json m = {{"tool", "freqlab"}, {"version", kVersion}, {"subcommand", cmd}, {"config", r.config}};
  m["config"]["format"] = g.format;
  m["config"]["threads"] = g.threads;
  m["csv_header"] = {{"version", kCsvHeaderVersion}, {"columns", r.columns}};
  if (!g.omit_timing) m["duration_seconds"] = seconds;
  m["summary"] = r.summary;
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

void emit(const std::string& cmd, const Result& r, const GlobalOptions& g, double seconds) {
  const json manifest = make_manifest(cmd, r, g, seconds);
  if (g.format == "json") {
    json doc = {{"manifest", manifest}};
    if (r.report) {
      doc["report"] = *r.report;
    } else {
      json rows = json::array();
      for (const auto& row : r.rows) {
        json obj = json::object();
        for (std::size_t c = 0; c < r.columns.size(); ++c) obj[r.columns[c]] = row[c];
        rows.push_back(obj);
      }
      doc["rows"] = rows;
    }
    write_text(g.out, doc.dump(2) + "\n");
    return;
  }

  std::ostringstream csv;
  for (std::size_t c = 0; c < r.columns.size(); ++c) csv << (c ? "," : "") << r.columns[c];
  csv << "\n";
  auto line = [&](const std::vector<json>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) csv << (c ? "," : "") << csv_cell(cells[c]);
    csv << "\n";
  };
  if (r.report) {
    std::vector<json> cells;
    for (const auto& name : r.columns) {
      const json& rep = *r.report;
      if (rep.contains(name)) {
        cells.push_back(rep[name]);
      } else if (rep.contains("witness") && rep["witness"].contains(name)) {
        cells.push_back(rep["witness"][name]);
      } else {
        cells.push_back(nullptr);
      }
    }
    line(cells);
  } else {
    for (const auto& row : r.rows) line(row);
  }
  write_text(g.out, csv.str());

  std::string sidecar = g.manifest_path;
  if (sidecar.empty() && g.out != "-") sidecar = g.out + ".manifest.json";
  if (sidecar.empty()) {
    std::cerr << manifest.dump() << "\n";
  } else {
    write_text(sidecar, manifest.dump(2) + "\n");
  }
}

int report_error(const std::string& type, const std::string& message, int code) {
  const json err = {{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-operator experiments: convergence sweeps, strong-law simulation, "
               "contextuality and frame-function audits"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  GlobalOptions g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed (required for stochastic subcommands)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--out", g.out, "Output path, - for stdout");
  app.add_option("--manifest", g.manifest_path, "Manifest path for CSV output (default <out>.manifest.json)");
  app.add_option("--threads", g.threads, "Worker cap, 0 for all cores; never changes results");
  app.add_flag("--omit-timing", g.omit_timing, "Leave the wall-clock duration out of the manifest");

  FhOptions fh;
  auto* fh_cmd = app.add_subcommand("fh-converge", "Sweep N and report the frequency-operator residual");
  fh_cmd->add_option("--state", fh.state, "q=<real>, uniform:<D> or amplitude list")->capture_default_str();
  fh_cmd->add_option("--N", fh.sweep, "Comma-separated copy counts, e.g. 100,1e4,1e6")->required();
  fh_cmd->add_option("--outcome", fh.outcome, "Selected outcome j")->capture_default_str();
  fh_cmd->add_option("--dense-cap", fh.dense_cap, "Largest D^N evaluated densely, 0 to skip")
      ->capture_default_str();

  SquiresOptions sq;
  auto* sq_cmd = app.add_subcommand("squires", "Largest overlap with a fixed-frequency subspace");
  sq_cmd->add_option("--q", sq.q, "Born weight of the selected outcome")->capture_default_str();
  sq_cmd->add_option("--N", sq.sweep, "Comma-separated copy counts")->required();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo outcome sequences under a g-measure");
  sim_cmd->add_option("--state", sim.state, "Tail state")->required();
  sim_cmd->add_option("--prefix", sim.prefix, "Prefix states separated by ';'");
  sim_cmd->add_option("--g", sim.g, "power:<p> or table:<path>")->capture_default_str();
  sim_cmd->add_option("--M", sim.M, "Trajectories")->capture_default_str();
  sim_cmd->add_option("--L", sim.L, "Prefix length per trajectory")->capture_default_str();
  sim_cmd->add_option("--outcome", sim.outcome, "Selected outcome j")->capture_default_str();
  sim_cmd->add_flag("--trajectories", sim.trajectories, "Include per-trajectory frequencies (JSON only)");

  ContextOptions ctx;
  auto* ctx_cmd = app.add_subcommand("contextuality", "Witness pair and random-pair noncontextuality audit");
  ctx_cmd->add_option("--state", ctx.state, "State defining the g-measure")->capture_default_str();
  ctx_cmd->add_option("--g", ctx.g, "power:<p> or table:<path>")->capture_default_str();
  ctx_cmd->add_option("--pairs", ctx.pairs, "Random context pairs to audit (needs --seed)")->capture_default_str();

  GleasonOptions gl;
  auto* gl_cmd = app.add_subcommand("gleason-fit", "Least-squares density operator from frame samples");
  gl_cmd->add_option("--candidate", gl.candidate, "born or gmeasure")->capture_default_str();
  gl_cmd->add_option("--rho", gl.rho, "Born source: mixed, random or diag:<p0,p1,...>")->capture_default_str();
  gl_cmd->add_option("--g", gl.g, "g for gmeasure candidates")->capture_default_str();
  gl_cmd->add_option("--state", gl.state, "State for gmeasure candidates (default uniform)");
  gl_cmd->add_option("--D", gl.dim, "Dimension")->capture_default_str();
  gl_cmd->add_option("--bases", gl.bases, "Random bases sampled")->capture_default_str();

  ComponentsOptions comp;
  auto* comp_cmd = app.add_subcommand("components", "Overlap, equivalence and completeness of product vectors");
  comp_cmd->add_option("--tail", comp.tail, "Tail state of the base sequence")->required();
  comp_cmd->add_option("--base-prefix", comp.base_prefix, "Base prefix states separated by ';'");
  comp_cmd->add_option("--phi-tail", comp.phi_tail, "Tail of phi (default: base tail)");
  comp_cmd->add_option("--phi-prefix", comp.phi_prefix, "Prefix states of phi separated by ';'");
  comp_cmd->add_option("--cutoff", comp.cutoffs, "Comma-separated decoration cutoffs")->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  const auto start = std::chrono::steady_clock::now();
  std::string cmd;
  try {
    Result r;
    if (*fh_cmd) {
      cmd = "fh-converge";
      r = run_fh(fh);
    } else if (*sq_cmd) {
      cmd = "squires";
      r = run_squires(sq);
    } else if (*sim_cmd) {
      cmd = "simulate";
      r = run_simulate(sim, g);
    } else if (*ctx_cmd) {
      cmd = "contextuality";
      r = run_contextuality(ctx, g);
    } else if (*gl_cmd) {
      cmd = "gleason-fit";
      r = run_gleason(gl, g);
    } else {
      cmd = "components";
      r = run_components(comp);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit(cmd, r, g, seconds);
  } catch (const UsageError& e) {
    return report_error("usage", e.what(), 2);
  } catch (const ResourceError& e) {
    return report_error("resource", e.what(), 1);
  } catch (const DimensionError& e) {
    return report_error("dimension", e.what(), 1);
  } catch (const UnderdeterminedError& e) {
    return report_error("underdetermined", e.what(), 1);
  } catch (const PreconditionError& e) {
    return report_error("precondition", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), 1);
  }
  return 0;
}
