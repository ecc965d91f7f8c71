// irtci command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Failures print one machine-readable line on stderr:
//   error: code=<ErrorCode> message=<text>
// Log verbosity comes from IRTCI_LOG (error | warn | info | debug; default warn).

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "irtci/bench.hpp"
#include "irtci/data.hpp"
#include "irtci/estimation.hpp"
#include "irtci/eval.hpp"
#include "irtci/impute.hpp"
#include "irtci/missingness.hpp"
#include "irtci/simulate.hpp"

namespace {

using namespace irtci;

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("IRTCI_LOG");
    const std::string value = env ? env : "";
    if (value == "error") return LogLevel::Error;
    if (value == "info") return LogLevel::Info;
    if (value == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

/// Options shared by every command that reads a dataset.
struct DataOptions {
  std::string data;
  std::string schema;
  std::string missing_token;

  void add(CLI::App* app, const std::string& data_flag = "--data") {
    app->add_option(data_flag, data, "input CSV (header row required)")->required();
    app->add_option("--schema", schema, "schema file")->required();
    app->add_option("--missing-token", missing_token, "extra token read and written as missing");
  }
  CsvOptions csv() const { return CsvOptions{missing_token}; }
  std::vector<ColumnSchema> load_schema_checked() const { return load_schema(schema); }
  CategoricalDataset load() const {
    const auto schemas = load_schema_checked();
    return load_csv(data, schemas, csv());
  }
};

/// Rejects a column name that the schema does not declare.
void require_column(const std::vector<ColumnSchema>& schemas, const std::string& name, const std::string& flag) {
  for (const auto& s : schemas) {
    if (s.name == name) return;
  }
  throw Error(ErrorCode::UnknownColumn, flag + " names column '" + name + "' which is not in the schema");
}

struct FitOptions {
  FitConfig config;

  void add(CLI::App* app) {
    app->add_option("--grid-size", config.grid_size, "quadrature nodes")->capture_default_str();
    app->add_option("--grid-lo", config.grid_lo, "lowest node")->capture_default_str();
    app->add_option("--grid-hi", config.grid_hi, "highest node")->capture_default_str();
    app->add_option("--max-iter", config.max_iterations, "EM iteration cap")->capture_default_str();
    app->add_option("--tol", config.tolerance, "max absolute parameter change")->capture_default_str();
    app->add_option("--newton-iter", config.newton.max_iterations, "M-step Newton cap")->capture_default_str();
    app->add_option("--fit-seed", config.seed, "seed for NRM starting jitter")->capture_default_str();
    app->add_option("--bins", config.continuous_bins, "quantile bins for continuous features")->capture_default_str();
  }
};

void log_model(const FittedModel& model, const FitConfig& config) {
  log(LogLevel::Info, "fit seed " + std::to_string(config.seed) + ", grid " + std::to_string(config.grid_size) +
                          " nodes, tolerance " + format_double(config.tolerance));
  for (const auto& map : model.discretizations) {
    std::string cuts;
    for (double c : map.cut_points) cuts += (cuts.empty() ? "" : ", ") + format_double(c);
    log(LogLevel::Info, "discretized " + map.column + " into " + std::to_string(map.bin_count) + " bins, cuts [" + cuts + "]");
  }
  log(LogLevel::Info, "EM " + std::string(model.converged ? "converged" : "stopped") + " after " +
                          std::to_string(model.iterations) + " iterations, loglik " + format_double(model.log_likelihood));
  if (!model.converged) log(LogLevel::Warn, "EM hit the iteration cap before reaching the tolerance");
  for (const auto& c : model.clamps) {
    log(LogLevel::Warn, "clamped " + c.parameter + " of " + c.feature + " at iteration " + std::to_string(c.iteration));
  }
}

FittedModel run_fit(const CategoricalDataset& data, const FitConfig& config) {
  config.validate();
  FittedModel model = fit(data, config);
  log_model(model, config);
  return model;
}

std::vector<double> parse_fraction_list(const std::vector<double>& values) {
  for (double f : values) {
    if (!(f > 0.0 && f < 1.0)) throw Error(ErrorCode::InvalidArgument, "fractions must lie in (0, 1)");
  }
  return values;
}

int run(int argc, char** argv) {
  CLI::App app{"IRT-based categorical imputation (irtci)"};
  app.set_config("--config", "", "TOML/INI run description; flags override its values");
  app.require_subcommand(1);

  // fit -------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "estimate item parameters by marginal maximum likelihood");
  DataOptions fit_data;
  FitOptions fit_opts;
  std::string fit_model_out;
  std::string fit_diagnostics;
  fit_data.add(fit_cmd);
  fit_opts.add(fit_cmd);
  fit_cmd->add_option("--model-out,-o", fit_model_out, "model file to write")->required();
  fit_cmd->add_option("--diagnostics", fit_diagnostics, "diagnostics report path ('-' for stdout)");

  // impute ----------------------------------------------------------------
  auto* impute_cmd = app.add_subcommand("impute", "fill missing categorical feature cells (fits first without --model)");
  DataOptions impute_data;
  FitOptions impute_fit;
  std::string impute_model;
  std::string impute_save_model;
  std::string impute_output;
  std::string impute_sidecar;
  impute_data.add(impute_cmd);
  impute_fit.add(impute_cmd);
  auto* model_opt = impute_cmd->add_option("--model", impute_model, "previously fitted model file");
  auto* save_opt = impute_cmd->add_option("--save-model", impute_save_model, "write the model fitted in this run");
  model_opt->excludes(save_opt);
  impute_cmd->add_option("--output,-o", impute_output, "completed CSV ('-' for stdout)")->required();
  impute_cmd->add_option("--sidecar", impute_sidecar, "per-cell category probabilities CSV");

  // inject ----------------------------------------------------------------
  auto* inject_cmd = app.add_subcommand("inject", "remove a fraction of one column's cells (MCAR or MAR)");
  DataOptions inject_data;
  MissingnessSpec inject_spec;
  std::string inject_mechanism = "mcar";
  std::string inject_direction = "top";
  std::string inject_output;
  inject_data.add(inject_cmd);
  inject_cmd->add_option("--mechanism", inject_mechanism, "mcar | mar")
      ->check(CLI::IsMember({"mcar", "mar"}))
      ->capture_default_str();
  inject_cmd->add_option("--target", inject_spec.target, "column to blank")->required();
  inject_cmd->add_option("--fraction", inject_spec.fraction, "fraction of rows")->required();
  inject_cmd->add_option("--conditional", inject_spec.conditional, "MAR: column that drives missingness");
  inject_cmd->add_option("--direction", inject_direction, "MAR: top | bottom")
      ->check(CLI::IsMember({"top", "bottom"}))
      ->capture_default_str();
  inject_cmd->add_option("--seed", inject_spec.seed, "MCAR seed")->capture_default_str();
  inject_cmd->add_option("--output,-o", inject_output, "incomplete CSV ('-' for stdout)")->required();

  // mcar-test -------------------------------------------------------------
  auto* mcar_cmd = app.add_subcommand("mcar-test", "Little's chi-square test of MCAR");
  DataOptions mcar_data;
  std::vector<std::string> mcar_columns;
  mcar_data.add(mcar_cmd);
  mcar_cmd->add_option("--columns", mcar_columns, "columns to test (default: all feature columns)");

  // evaluate --------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "score imputed cells against the held truth");
  DataOptions eval_data;
  std::string eval_incomplete;
  std::string eval_completed;
  std::vector<std::string> eval_columns;
  std::string eval_format = "text";
  std::string eval_output;
  eval_data.add(eval_cmd, "--truth");
  eval_cmd->add_option("--incomplete", eval_incomplete, "CSV that was imputed (defines the scored cells)")->required();
  eval_cmd->add_option("--completed", eval_completed, "imputed CSV")->required();
  eval_cmd->add_option("--column", eval_columns, "restrict scoring to these columns");
  eval_cmd->add_option("--format", eval_format, "text | csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
  eval_cmd->add_option("--output,-o", eval_output, "report path (default stdout)");

  // bench -----------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "inject, test, fit, impute and score over a mechanism x fraction grid");
  DataOptions bench_data;
  FitOptions bench_fit;
  BenchConfig bench;
  std::vector<std::string> bench_mechanisms{"mar", "mcar"};
  std::vector<double> bench_fractions{0.05, 0.10, 0.30, 0.50};
  std::string bench_direction = "top";
  bool bench_no_impute = false;
  std::string bench_output;
  bench_data.add(bench_cmd);
  bench_fit.add(bench_cmd);
  bench_cmd->add_option("--target", bench.target, "column to blank and score")->required();
  bench_cmd->add_option("--conditional", bench.conditional, "MAR conditional column");
  bench_cmd->add_option("--mechanisms", bench_mechanisms, "mechanisms to run")
      ->check(CLI::IsMember({"mcar", "mar"}))
      ->capture_default_str();
  bench_cmd->add_option("--fractions", bench_fractions, "missing fractions")->capture_default_str();
  bench_cmd->add_option("--direction", bench_direction, "MAR: top | bottom")
      ->check(CLI::IsMember({"top", "bottom"}))
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "base injection seed")->capture_default_str();
  bench_cmd->add_flag("--no-impute", bench_no_impute, "only inject and run Little's test");
  bench_cmd->add_option("--output,-o", bench_output, "report path (default stdout)");

  // simulate --------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset drawn from random item parameters");
  std::string sim_family = "grm";
  int sim_items = 10;
  int sim_categories = 4;
  Eigen::Index sim_cases = 2000;
  std::uint64_t sim_seed = 1;
  bool sim_outcome = false;
  std::string sim_data;
  std::string sim_schema;
  std::string sim_truth;
  sim_cmd->add_option("--family", sim_family, "2pl | grm | nrm")
      ->check(CLI::IsMember({"2pl", "grm", "nrm"}))
      ->capture_default_str();
  sim_cmd->add_option("--items", sim_items, "number of items")->capture_default_str();
  sim_cmd->add_option("--categories", sim_categories, "categories per item (2 for 2pl)")->capture_default_str();
  sim_cmd->add_option("--cases", sim_cases, "number of rows")->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed, "simulation seed")->capture_default_str();
  sim_cmd->add_flag("--outcome", sim_outcome, "append an excluded continuous 'outcome' column");
  sim_cmd->add_option("--data-out", sim_data, "CSV path")->required();
  sim_cmd->add_option("--schema-out", sim_schema, "schema path")->required();
  sim_cmd->add_option("--truth-out", sim_truth, "true item parameters as a model file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? 0 : 1;
  }

  if (fit_cmd->parsed()) {
    const auto data = fit_data.load();
    const auto model = run_fit(data, fit_opts.config);
    save_model(model, fit_model_out);
    if (!fit_diagnostics.empty()) write_text(fit_diagnostics, format_diagnostics(model));
    return 0;
  }

  if (impute_cmd->parsed()) {
    const auto data = impute_data.load();
    FittedModel model;
    if (!impute_model.empty()) {
      model = load_model(impute_model);
      log(LogLevel::Info, "loaded model " + impute_model);
    } else {
      model = run_fit(data, impute_fit.config);
      if (!impute_save_model.empty()) save_model(model, impute_save_model);
    }
    const auto imputed = impute_dataset(data, model);
    log(LogLevel::Info, "imputed " + std::to_string(imputed.mask.size()) + " cells");
    write_text(impute_output, format_csv(imputed.completed, impute_data.csv()));
    if (!impute_sidecar.empty()) write_probability_sidecar(imputed, impute_sidecar);
    return 0;
  }

  if (inject_cmd->parsed()) {
    inject_spec.mechanism = parse_mechanism(inject_mechanism);
    inject_spec.direction = parse_direction(inject_direction);
    const auto schemas = inject_data.load_schema_checked();
    require_column(schemas, inject_spec.target, "--target");
    if (!inject_spec.conditional.empty()) require_column(schemas, inject_spec.conditional, "--conditional");
    inject_spec.validate();
    const auto data = load_csv(inject_data.data, schemas, inject_data.csv());
    log(LogLevel::Info, "inject " + std::string(to_string(inject_spec.mechanism)) + " seed " +
                            std::to_string(inject_spec.seed));
    const auto result = inject(data, inject_spec);
    if (result.warning) log(LogLevel::Warn, *result.warning);
    log(LogLevel::Info, "removed " + std::to_string(result.rows.size()) + " cells of " + inject_spec.target);
    write_text(inject_output, format_csv(result.data, inject_data.csv()));
    return 0;
  }

  if (mcar_cmd->parsed()) {
    const auto schemas = mcar_data.load_schema_checked();
    for (const auto& c : mcar_columns) require_column(schemas, c, "--columns");
    const auto data = load_csv(mcar_data.data, schemas, mcar_data.csv());
    std::vector<Eigen::Index> columns;
    if (mcar_columns.empty()) {
      columns = data.columns_with_role(ColumnRole::Feature);
    } else {
      for (const auto& c : mcar_columns) columns.push_back(data.index_of(c));
    }
    const auto result = littles_test(data.numeric_view(columns));
    if (result.ridge_used) log(LogLevel::Warn, "covariance was near-singular; a ridge was added");
    std::cout << "statistic: " << format_double(result.statistic) << '\n'
              << "df: " << result.df << '\n'
              << "p: " << format_double(result.p_value) << '\n'
              << "patterns: " << result.pattern_count << '\n';
    return 0;
  }

  if (eval_cmd->parsed()) {
    const auto schemas = eval_data.load_schema_checked();
    for (const auto& c : eval_columns) require_column(schemas, c, "--column");
    const auto truth = load_csv(eval_data.data, schemas, eval_data.csv());
    const auto incomplete = load_csv(eval_incomplete, schemas, eval_data.csv());
    ImputedDataset imputed;
    imputed.completed = load_csv(eval_completed, schemas, eval_data.csv());
    if (truth.rows() != incomplete.rows() || truth.rows() != imputed.completed.rows()) {
      throw Error(ErrorCode::SchemaMismatch, "truth, incomplete and completed files differ in row count");
    }
    for (Eigen::Index r = 0; r < incomplete.rows(); ++r) {
      for (Eigen::Index c = 0; c < incomplete.cols(); ++c) {
        if (!incomplete.schema(c).is_categorical() || !incomplete.is_missing(r, c)) continue;
        if (imputed.completed.is_missing(r, c)) continue;  // left missing: nothing to score
        imputed.mask.push_back({r, c});
      }
    }
    std::vector<ImputationReport> reports;
    if (eval_columns.empty()) {
      reports = score(truth, imputed);
    } else {
      for (const auto& c : eval_columns) reports.push_back(score(truth, imputed, c));
    }
    std::string text;
    for (const auto& report : reports) {
      text += eval_format == "csv" ? format_report_csv(report) : format_report(report) + "\n";
    }
    if (reports.empty()) log(LogLevel::Warn, "no imputed cells to score");
    write_text(eval_output, text);
    return 0;
  }

  if (bench_cmd->parsed()) {
    const auto schemas = bench_data.load_schema_checked();
    require_column(schemas, bench.target, "--target");
    if (!bench.conditional.empty()) require_column(schemas, bench.conditional, "--conditional");
    bench.mechanisms.clear();
    for (const auto& m : bench_mechanisms) bench.mechanisms.push_back(parse_mechanism(m));
    bench.fractions = parse_fraction_list(bench_fractions);
    bench.direction = parse_direction(bench_direction);
    bench.fit = bench_fit.config;
    bench.fit.validate();
    bench.impute = !bench_no_impute;
    const auto data = load_csv(bench_data.data, schemas, bench_data.csv());
    log(LogLevel::Info, "bench seed " + std::to_string(bench.seed) + ", fit seed " + std::to_string(bench.fit.seed));
    const auto report = run_bench(data, bench);
    for (const auto& row : report.rows) {
      log(LogLevel::Debug, std::string(to_string(row.mechanism)) + " " + format_double(row.fraction) + " seed " +
                               std::to_string(row.seed));
    }
    write_text(bench_output, format_bench_report(report));
    return 0;
  }

  if (sim_cmd->parsed()) {
    ItemFamily family = ItemFamily::Graded;
    if (sim_family == "2pl") family = ItemFamily::TwoPL;
    if (sim_family == "nrm") family = ItemFamily::Nominal;
    const int categories = family == ItemFamily::TwoPL ? 2 : sim_categories;
    const auto items = random_items(family, sim_items, categories, sim_seed);
    if (sim_cases < 1) throw Error(ErrorCode::InvalidArgument, "--cases must be positive");
    const auto sim = simulate(items, sim_cases, sim_seed + 1, sim_outcome);
    log(LogLevel::Info, "simulate seed " + std::to_string(sim_seed));
    emit_csv(sim.data, sim_data);
    save_schema(sim.data.schemas(), sim_schema);
    if (!sim_truth.empty()) {
      FittedModel truth;
      truth.items = items;
      truth.grid = build_grid();
      save_model(truth, sim_truth);
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const irtci::Error& e) {
    std::cerr << "error: code=" << irtci::to_string(e.code()) << " message=" << e.what() << '\n';
    return irtci::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: code=Internal message=" << e.what() << '\n';
    return 2;
  }
}
