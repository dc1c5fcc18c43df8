// hdprec command-line tool. Exit codes: 0 ok, 1 user error, 2 internal error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdprec/bootstrap.hpp"
#include "hdprec/inference.hpp"
#include "hdprec/io.hpp"
#include "hdprec/simulate.hpp"
#include "index_spec.hpp"

namespace {

using namespace hdprec;
using nlohmann::json;

struct Common {
  std::uint64_t seed = 0;
  Index boot_m = 1000;
  std::string kernel = "qs";
  std::string bandwidth = "auto";
  bool studentized = false;
  double alpha = 0.05;
  double lambda_scale = 0.5;
  int threads = 0;
  std::string out = "hdprec";
};

struct DataOptions {
  std::string data;
  std::string prices;
  std::string groups;
  bool no_log_returns = false;
  bool no_standardize = false;
};

struct Loaded {
  Dataset data;
  std::vector<std::string> names;
  std::optional<cli::GroupInfo> groups;
};

void add_common(CLI::App* cmd, Common& c, bool studentized_default) {
  c.studentized = studentized_default;
  cmd->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--boot-M", c.boot_m, "bootstrap draws M")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--kernel", c.kernel, "long-run kernel")
      ->check(CLI::IsMember({"qs", "bartlett"}))
      ->capture_default_str();
  cmd->add_option("--bandwidth", c.bandwidth, "kernel bandwidth S_n: a positive number or 'auto'")
      ->capture_default_str();
  cmd->add_flag("--studentized,!--no-studentized", c.studentized, "Studentized (SKMB) statistic")
      ->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmd->add_option("--lambda-scale", c.lambda_scale, "lambda_j = scale * sd_j * sqrt(2 log p / n)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--threads", c.threads, "worker threads (0: OpenMP default)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--out", c.out, "output prefix")->capture_default_str();
}

void add_data(CLI::App* cmd, DataOptions& d) {
  auto* data = cmd->add_option("--data", d.data, "observations CSV (header row, one row per time point)");
  auto* prices = cmd->add_option("--prices", d.prices, "price CSV (header of symbols, one row per day)");
  data->excludes(prices);
  cmd->add_option("--groups", d.groups, "symbol,group CSV");
  cmd->add_flag("--no-log-returns", d.no_log_returns, "use simple instead of log returns with --prices");
  cmd->add_flag("--no-standardize", d.no_standardize, "keep raw returns with --prices");
}

KernelSpec kernel_of(const Common& c) {
  KernelSpec k;
  k.kind = c.kernel == "bartlett" ? KernelKind::Bartlett : KernelKind::QuadraticSpectral;
  return k;
}

std::optional<double> bandwidth_of(const Common& c) {
  if (c.bandwidth == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(c.bandwidth, &used);
    if (used == c.bandwidth.size() && v > 0.0 && std::isfinite(v)) return v;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::InvalidConfig, "--bandwidth must be a positive number or 'auto', got '" + c.bandwidth + "'");
}

PipelineConfig pipeline_of(const Common& c) {
  PipelineConfig cfg;
  cfg.lasso.lambda_scale = c.lambda_scale;
  cfg.kernel = kernel_of(c);
  cfg.bandwidth = bandwidth_of(c);
  cfg.seed = c.seed;
  return cfg;
}

void apply_threads(const Common& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

Loaded load(const DataOptions& d) {
  Loaded out;
  std::optional<io::CsvTable> map;
  if (!d.groups.empty()) map = io::read_csv(d.groups, true);
  if (!d.prices.empty()) {
    io::ReturnsSpec spec;
    spec.price_csv = d.prices;
    spec.log_returns = !d.no_log_returns;
    spec.standardize = !d.no_standardize;
    const auto prices = io::read_csv(spec.price_csv, true);
    auto r = io::returns_from_prices(prices, spec, map ? &*map : nullptr);
    for (const auto& w : r.warnings) warn(w);
    out.data = std::move(r.data);
    out.names = std::move(r.symbols);
    if (map) out.groups = cli::GroupInfo{std::move(r.group_names), std::move(r.groups)};
    return out;
  }
  if (d.data.empty()) throw Error(ErrorCode::InvalidConfig, "one of --data or --prices is required");
  auto nd = io::read_dataset(d.data);
  out.data = std::move(nd.data);
  out.names = std::move(nd.names);
  if (map) {
    cli::GroupInfo g;
    std::vector<std::string> warnings;
    g.members = io::groups_from_map(*map, out.names, &g.names, &warnings);
    for (const auto& w : warnings) warn(w);
    out.groups = std::move(g);
  }
  return out;
}

std::string out_path(const Common& c, const std::string& suffix) { return c.out + "_" + suffix; }

json base_manifest(const std::string& command, const Common& c) {
  json m;
  m["command"] = command;
  m["version"] = "0.1.0";
  m["seed"] = c.seed;
  m["kernel"] = c.kernel;
  m["bandwidth_option"] = c.bandwidth;
  m["boot_M"] = c.boot_m;
  m["alpha"] = c.alpha;
  m["studentized"] = c.studentized;
  m["lambda_scale"] = c.lambda_scale;
  return m;
}

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void write_manifest(const Common& c, const json& m) { io::write_text(out_path(c, "manifest.json"), m.dump(2) + "\n"); }

// Shared by estimate / test / recover: fit, build the region for --set, bootstrap.
struct Analysis {
  Loaded loaded;
  FittedPrecision fitted;
  std::optional<RegionData> region;
  BootstrapResult boot;
  json manifest;
};

Analysis analyze(const std::string& command, const Common& c, const DataOptions& d, const std::string& set_spec) {
  apply_threads(c);
  const auto pipe = pipeline_of(c);
  Analysis a;
  a.loaded = load(d);
  const Index p = a.loaded.data.p();
  IndexSet s = cli::parse_index_set(set_spec, p, a.loaded.groups ? &*a.loaded.groups : nullptr);
  a.fitted = fit_precision(a.loaded.data, pipe.lasso);
  for (Index j : a.fitted.fit.unconverged) warn("lasso for node " + std::to_string(j + 1) + " did not converge");
  a.region.emplace(prepare_region(a.fitted, std::move(s), pipe));
  const auto& region = *a.region;
  for (Index l : region.longrun.floored) warn("long-run variance floored for pair " + std::to_string(l + 1));

  BootstrapConfig bc;
  bc.draws = c.boot_m;
  bc.studentized = c.studentized;
  bc.kernel = pipe.kernel;
  bc.bandwidth = region.longrun.bandwidth;
  bc.rng = RngSpec{c.seed, "bootstrap"};
  a.boot = c.studentized ? kmb_draws(region.eta, region.h(), bc, region.w()) : kmb_draws(region.eta, region.h(), bc);

  a.manifest = base_manifest(command, c);
  a.manifest["input"] = d.prices.empty() ? d.data : d.prices;
  a.manifest["n"] = a.loaded.data.n();
  a.manifest["p"] = p;
  a.manifest["set"] = set_spec;
  a.manifest["r"] = region.eta.r();
  a.manifest["lambdas"] = to_vec(a.fitted.fit.lambda);
  a.manifest["bandwidth"] = region.longrun.bandwidth;
  a.manifest["bandwidth_fallback"] = region.longrun.bandwidth_fallback;
  a.manifest["clipped_mass"] = a.boot.clipped_mass;
  return a;
}

std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

int run_estimate(const Common& c, const DataOptions& d, const std::string& set_spec) {
  auto a = analyze("estimate", c, d, set_spec);
  const auto& region = *a.region;
  const Index n = a.loaded.data.n();
  const double q = quantile(a.boot, 1.0 - c.alpha);
  const auto intervals = c.studentized ? confidence_region(span_of(region.omega_s), q, n, true, region.w())
                                       : confidence_region(span_of(region.omega_s), q, n, false);
  io::write_text(out_path(c, "omega.csv"), io::matrix_csv(a.fitted.precision.omega_hat.to_dense()));
  std::string csv = "j1,j2,omega_hat,lower,upper,w\n";
  const auto& s = region.index_set();
  for (Index l = 0; l < s.r(); ++l) {
    const auto& iv = intervals[static_cast<std::size_t>(l)];
    csv += std::to_string(s[l].first + 1) + "," + std::to_string(s[l].second + 1) + "," +
           io::format_double(region.omega_s(l)) + "," + io::format_double(iv.lower) + "," +
           io::format_double(iv.upper) + "," + io::format_double(region.longrun.w_diag(l)) + "\n";
  }
  io::write_text(out_path(c, "intervals.csv"), csv);
  a.manifest["quantile"] = q;
  write_manifest(c, a.manifest);
  return 0;
}

int run_test(const Common& c, const DataOptions& d, const std::string& set_spec, bool zero, const std::string& c_file) {
  if (zero == !c_file.empty()) throw Error(ErrorCode::InvalidConfig, "give exactly one of --zero or --c FILE");
  auto a = analyze("test", c, d, set_spec);
  const auto& region = *a.region;
  const auto r = static_cast<std::size_t>(region.eta.r());
  std::vector<double> target(r, 0.0);
  if (!zero) {
    const Matrix cm = io::read_matrix(c_file, false);
    if (static_cast<std::size_t>(cm.size()) != r) {
      throw Error(ErrorCode::ShapeError, "--c file holds " + std::to_string(cm.size()) + " values, the set has r = " +
                                             std::to_string(r));
    }
    const Matrix flat = cm.transpose();  // row-major order of the file
    for (std::size_t l = 0; l < r; ++l) target[l] = flat.data()[l];
  }
  const auto outcome = test_structure(span_of(region.omega_s), target, a.boot, a.loaded.data.n(), c.alpha);
  std::string csv = "statistic,quantile,p_value,reject,alpha,r,studentized\n";
  csv += io::format_double(outcome.statistic) + "," + io::format_double(outcome.quantile) + "," +
         io::format_double(outcome.p_value) + "," + (outcome.reject ? "1" : "0") + "," + io::format_double(c.alpha) +
         "," + std::to_string(r) + "," + (c.studentized ? "1" : "0") + "\n";
  io::write_text(out_path(c, "test.csv"), csv);
  std::cout << "statistic " << io::format_double(outcome.statistic) << "  quantile "
            << io::format_double(outcome.quantile) << "  p-value " << io::format_double(outcome.p_value) << "  "
            << (outcome.reject ? "reject" : "do not reject") << '\n';
  a.manifest["c"] = zero ? std::string("zero") : c_file;
  a.manifest["quantile"] = outcome.quantile;
  write_manifest(c, a.manifest);
  return 0;
}

int run_recover(const Common& c, const DataOptions& d, const std::string& set_spec) {
  auto a = analyze("recover", c, d, set_spec);
  const auto& region = *a.region;
  const auto est =
      recover_support(a.fitted.precision.omega_hat, region.index_set(), a.boot, a.loaded.data.n(), c.alpha);
  std::string csv = "j1,j2,omega_hat,threshold\n";
  const auto& s = region.index_set();
  for (const auto& pair : est.selected) {
    const auto l = *s.position_of(pair);
    csv += std::to_string(pair.first + 1) + "," + std::to_string(pair.second + 1) + "," +
           io::format_double(a.fitted.precision.omega_hat(pair.first, pair.second)) + "," +
           io::format_double(est.thresholds[static_cast<std::size_t>(l)]) + "\n";
  }
  io::write_text(out_path(c, "edges.csv"), csv);
  a.manifest["quantile"] = est.quantile;
  a.manifest["selected"] = est.selected.size();
  write_manifest(c, a.manifest);
  return 0;
}

int run_blocks(const Common& c, const DataOptions& d, double fdr, bool within) {
  apply_threads(c);
  if (d.groups.empty()) throw Error(ErrorCode::InvalidConfig, "blocks needs --groups");
  const auto loaded = load(d);
  BlockTestConfig cfg;
  cfg.pipeline = pipeline_of(c);
  cfg.draws = c.boot_m;
  cfg.fdr = fdr;
  cfg.studentized = c.studentized;
  cfg.within_blocks = within;
  cfg.rng = RngSpec{c.seed, "blocks"};
  const auto result = block_test_matrix(loaded.data, loaded.groups->members, cfg);
  const auto& names = loaded.groups->names;
  std::string csv = "group1,group2,p_value,rejected\n";
  json edges = json::array();
  for (const auto& e : result.edges) {
    csv += names[e.h1] + "," + names[e.h2] + "," + io::format_double(e.p_value) + "," + (e.rejected ? "1" : "0") + "\n";
    edges.push_back({{"group1", names[e.h1]}, {"group2", names[e.h2]}, {"r", e.r}, {"bandwidth", e.bandwidth},
                     {"statistic", e.statistic}});
  }
  io::write_text(out_path(c, "blocks.csv"), csv);
  auto m = base_manifest("blocks", c);
  m["input"] = d.prices.empty() ? d.data : d.prices;
  m["groups"] = d.groups;
  m["n"] = loaded.data.n();
  m["p"] = loaded.data.p();
  m["fdr"] = fdr;
  m["within_blocks"] = within;
  m["lambdas"] = result.lambdas;
  m["edges"] = edges;
  write_manifest(c, m);
  return 0;
}

struct SimOptions {
  std::vector<std::string> structures{"A"};
  std::vector<double> rhos{0.0};
  Index p = 50;
  Index n = 150;
  Index reps = 500;
  Index bench_reps = 1000;
  std::vector<std::string> sets{"zeros", "offdiag"};
  std::vector<double> levels{0.925, 0.95, 0.975};
  bool lambda_sweep = false;
};

Structure structure_of(const std::string& s) {
  const auto st = parse_structure(s);
  if (!st) throw Error(ErrorCode::InvalidConfig, "unknown structure '" + s + "' (expected A, B or I)");
  return *st;
}

std::string rho_label(double rho) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", rho);
  return buf;
}

int run_simulate(const Common& c, const SimOptions& o) {
  apply_threads(c);
  CoverageConfig cfg;
  cfg.choices.clear();
  for (const auto& s : o.sets) cfg.choices.push_back(s == "zeros" ? IndexChoice::Zeros : IndexChoice::Offdiag);
  cfg.levels = o.levels;
  cfg.replicates = o.reps;
  cfg.benchmark_reps = o.bench_reps;
  cfg.draws = c.boot_m;
  cfg.pipeline = pipeline_of(c);
  const std::vector<double> scales = o.lambda_sweep ? std::vector<double>{0.25, 0.5, 1.0}
                                                    : std::vector<double>{c.lambda_scale};
  std::vector<CoverageReport> reports;
  json cells = json::array();
  for (const auto& sname : o.structures) {
    const Structure st = structure_of(sname);
    for (double rho : o.rhos) {
      DgpSpec dgp{st, o.p, rho, o.n, RngSpec{c.seed, "simulate"}.child(std::string(to_string(st)) + "/" + rho_label(rho))};
      for (double scale : scales) {
        cfg.pipeline.lasso.lambda_scale = scale;
        auto rep = coverage_experiment(dgp, cfg);
        std::cerr << "structure " << to_string(st) << " rho " << rho_label(rho) << " lambda_scale " << scale << ": "
                  << rep.replicates - rep.failed << " replicates in " << rep.runtime_seconds << " s\n";
        if (rep.failed > 0) warn(std::to_string(rep.failed) + " replicates failed");
        json cell{{"structure", to_string(st)}, {"rho", rho}, {"lambda_scale", scale}, {"failed", rep.failed},
                  {"benchmark_failed", rep.benchmark_failed}};
        json per_set = json::object();
        for (std::size_t k = 0; k < cfg.choices.size(); ++k) {
          per_set[to_string(cfg.choices[k])] = {{"median_w", rep.median_w[k]},
                                                {"mean_bandwidth", rep.mean_bandwidth[k]}};
        }
        cell["sets"] = per_set;
        cells.push_back(cell);
        reports.push_back(std::move(rep));
      }
    }
  }
  io::write_text(out_path(c, "coverage.csv"), coverage_csv(reports));
  auto m = base_manifest("simulate", c);
  m["p"] = o.p;
  m["n"] = o.n;
  m["replicates"] = o.reps;
  m["benchmark_reps"] = o.bench_reps;
  m["levels"] = o.levels;
  m["sets"] = o.sets;
  m["cells"] = cells;
  write_manifest(c, m);
  return 0;
}

int run_generate(const Common& c, const std::string& structure, Index p, Index n, double rho) {
  const Structure st = structure_of(structure);
  DgpSpec dgp{st, p, rho, n, RngSpec{c.seed, "generate"}};
  dgp.validate();
  const Generator gen(st, p);
  const auto data = gen.draw(n, rho, dgp.rng);
  io::write_dataset(out_path(c, "data.csv"), data);
  io::write_text(out_path(c, "omega.csv"), io::matrix_csv(gen.truth().omega.to_dense()));
  auto m = base_manifest("generate", c);
  m["structure"] = to_string(st);
  m["p"] = p;
  m["n"] = n;
  m["rho"] = rho;
  write_manifest(c, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inference on high-dimensional precision matrices of dependent data"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML configuration file");

  // One Common per subcommand: defaults differ (blocks is Studentized by default).
  Common c_sim, c_gen, c_est, c_test, c_rec, c_blk;
  DataOptions data;
  std::string set_spec = "offdiag";

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coverage of KMB/SKMB quantiles");
  SimOptions sim;
  add_common(simulate, c_sim, false);
  simulate->add_option("--structure", sim.structures, "A, B or I (identity); repeatable")->capture_default_str();
  simulate->add_option("--rho", sim.rhos, "AR(1) coefficients in [0, 1); repeatable")->capture_default_str();
  simulate->add_option("--p", sim.p, "dimension")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--n", sim.n, "sample size")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--reps", sim.reps, "replicates R")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--bench-reps", sim.bench_reps, "benchmark replicates R0")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--sets", sim.sets, "index sets")
      ->check(CLI::IsMember({"zeros", "offdiag"}))
      ->capture_default_str();
  simulate->add_option("--levels", sim.levels, "nominal levels")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  simulate->add_flag("--lambda-sweep", sim.lambda_sweep, "repeat for lambda_scale in {0.25, 0.5, 1}");

  auto* generate = app.add_subcommand("generate", "Write one simulated dataset and its true precision matrix");
  std::string gen_structure = "A";
  Index gen_p = 50;
  Index gen_n = 150;
  double gen_rho = 0.0;
  add_common(generate, c_gen, false);
  generate->add_option("--structure", gen_structure, "A, B or I")->capture_default_str();
  generate->add_option("--p", gen_p, "dimension")->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--n", gen_n, "sample size")->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--rho", gen_rho, "AR(1) coefficient")->capture_default_str();

  auto* estimate = app.add_subcommand("estimate", "Estimate Omega and simultaneous intervals over --set");
  add_common(estimate, c_est, false);
  add_data(estimate, data);
  estimate->add_option("--set", set_spec, "index set")->capture_default_str();

  auto* test = app.add_subcommand("test", "Test H0: Omega_S = c");
  bool zero = false;
  std::string c_file;
  add_common(test, c_test, false);
  add_data(test, data);
  test->add_option("--set", set_spec, "index set")->capture_default_str();
  test->add_flag("--zero", zero, "c = 0");
  test->add_option("--c", c_file, "CSV of the r values of c, in set order");

  auto* recover = app.add_subcommand("recover", "Select the nonzero entries of Omega over --set");
  add_common(recover, c_rec, false);
  add_data(recover, data);
  recover->add_option("--set", set_spec, "index set")->capture_default_str();

  auto* blocks = app.add_subcommand("blocks", "Block-pair tests with BH-FDR control");
  double fdr = 0.1;
  bool within = false;
  add_common(blocks, c_blk, true);
  add_data(blocks, data);
  blocks->add_option("--fdr", fdr, "FDR level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  blocks->add_flag("--within-blocks", within, "also test within-group blocks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return run_simulate(c_sim, sim);
    if (*generate) return run_generate(c_gen, gen_structure, gen_p, gen_n, gen_rho);
    if (*estimate) return run_estimate(c_est, data, set_spec);
    if (*test) return run_test(c_test, data, set_spec, zero, c_file);
    if (*recover) return run_recover(c_rec, data, set_spec);
    if (*blocks) return run_blocks(c_blk, data, fdr, within);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
