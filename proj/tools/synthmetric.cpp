// Command-line front end: synthesize datasets, score general/specific
// utility, and run the Monte-Carlo calibration harness.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/validation failure.

#include <glob.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "synthmetric/synthmetric.hpp"

namespace sm = synthmetric;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : text) {
    if (ch == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      item += ch;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : split_list(text)) {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("invalid number in list: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

// Expand each --synthetic argument: a literal path, or a glob pattern when it
// contains metacharacters. Matches are sorted for a stable replicate order.
std::vector<std::string> expand_inputs(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& arg : args) {
    if (arg.find_first_of("*?[") == std::string::npos) {
      out.push_back(arg);
      continue;
    }
    glob_t g{};
    const int rc = glob(arg.c_str(), 0, nullptr, &g);
    if (rc == GLOB_NOMATCH) {
      globfree(&g);
      throw std::invalid_argument("no files match pattern: " + arg);
    }
    if (rc != 0) {
      globfree(&g);
      throw std::runtime_error("glob failed for pattern: " + arg);
    }
    std::vector<std::string> matches(g.gl_pathv, g.gl_pathv + g.gl_pathc);
    globfree(&g);
    std::sort(matches.begin(), matches.end());
    out.insert(out.end(), matches.begin(), matches.end());
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void emit_report(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
}

int threads_from_env() {
  const char* env = std::getenv("SYNTHMETRIC_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || v < 1)
    throw std::invalid_argument(std::string("invalid SYNTHMETRIC_THREADS value: ") + env);
  return static_cast<int>(v);
}

// ---------------------------------------------------------------------------
// synthesize

struct SynthArgs {
  std::string data_path, schema_path, out_dir;
  std::string method = "cart";
  std::vector<std::string> synthesized_columns;  // empty: all columns
  std::vector<std::string> visit_order;
  int m = 1;
  std::uint64_t seed = 0;
  int min_leaf = 5;  // synthesis trees model single columns; small leaves keep detail
  int max_depth = 30;
  double cp = 1e-4;
};

int cmd_synthesize(const SynthArgs& a) {
  const auto schema = sm::load_schema(a.schema_path);
  const sm::Dataset original = sm::load_csv(a.data_path, schema);

  sm::SynthesisPlan plan;
  plan.method = sm::synth_method_from_string(a.method);
  plan.m = a.m;
  plan.seed = a.seed;
  plan.mask.synthesized_columns = a.synthesized_columns.empty()
                                      ? sm::complete_mask(original).synthesized_columns
                                      : a.synthesized_columns;
  plan.mask.m = a.m;
  plan.visit_order = a.visit_order;
  plan.tree.min_leaf = a.min_leaf;
  plan.tree.max_depth = a.max_depth;
  plan.tree.complexity = a.cp;

  const auto replicates = sm::synthesize(original, plan);

  fs::create_directories(a.out_dir);
  const int width = std::max<int>(3, std::to_string(a.m).size());
  std::vector<std::string> files;
  for (std::size_t i = 0; i < replicates.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "syn_%0*zu.csv", width, i + 1);
    files.emplace_back(name);
    sm::write_csv((fs::path(a.out_dir) / name).string(), replicates[i]);
  }

  // Resolve the visit order actually used so the manifest is self-contained.
  std::vector<std::string> order = plan.visit_order;
  if (order.empty()) {
    for (const auto& col : schema)
      if (plan.mask.contains(col.name)) order.push_back(col.name);
  }

  json manifest;
  manifest["method"] = sm::to_string(plan.method);
  manifest["m"] = plan.m;
  manifest["seed"] = plan.seed;
  manifest["synthesized_columns"] = plan.mask.synthesized_columns;
  manifest["visit_order"] = order;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(sm::fnv1a64(sm::schema_to_json(schema).dump())));
  manifest["schema_hash"] = hash;
  if (plan.method == sm::SynthMethod::cart) {
    manifest["tree"] = {{"min_leaf", plan.tree.min_leaf},
                        {"max_depth", plan.tree.max_depth},
                        {"complexity", plan.tree.complexity}};
  }
  manifest["files"] = files;
  write_text((fs::path(a.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");

  std::cout << "wrote " << replicates.size() << " synthetic dataset"
            << (replicates.size() == 1 ? "" : "s") << " to " << a.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// utility general

struct GeneralArgs {
  std::string original_path, schema_path;
  std::vector<std::string> synthetic_args;
  std::string model = "logistic";
  std::string null_method = "analytic";
  std::vector<std::string> synthesized_columns;
  int order = 2;
  bool squares = false;
  bool standardize = true;
  int perms = 100;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int min_leaf = 20;
  int max_depth = 30;
  double cp = 1e-4;
  std::string format = "json";
  std::string out_path;
};

int cmd_utility_general(const GeneralArgs& a) {
  const auto schema = sm::load_schema(a.schema_path);
  const sm::Dataset original = sm::load_csv(a.original_path, schema);
  std::vector<sm::Dataset> synthetics;
  for (const auto& path : expand_inputs(a.synthetic_args))
    synthetics.push_back(sm::load_csv(path, schema));

  sm::PropensityModelSpec spec;
  if (a.model == "logistic")
    spec.model = sm::PropensityModel::logistic;
  else if (a.model == "cart")
    spec.model = sm::PropensityModel::cart;
  else
    throw std::invalid_argument("unknown propensity model: " + a.model);
  spec.design.interaction_order = a.order;
  spec.design.include_squares = a.squares;
  spec.design.standardize_numeric = a.standardize;
  spec.tree_config.min_leaf = a.min_leaf;
  spec.tree_config.max_depth = a.max_depth;
  spec.tree_config.complexity = a.cp;

  sm::UtilityOptions options;
  if (a.null_method == "analytic")
    options.null_method = sm::NullMethod::analytic;
  else if (a.null_method == "permutation")
    options.null_method = sm::NullMethod::permutation;
  else if (a.null_method == "pairwise")
    options.null_method = sm::NullMethod::pairwise;
  else
    throw std::invalid_argument("unknown null method: " + a.null_method);
  if (options.null_method == sm::NullMethod::permutation && !a.seed_set)
    throw std::invalid_argument("--seed is required for the permutation null");
  options.n_perms = a.perms;
  options.seed = a.seed;
  if (!a.synthesized_columns.empty())
    options.mask.synthesized_columns = a.synthesized_columns;

  const sm::UtilityReport report = sm::general_utility(original, synthetics, spec, options);

  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("pMSE=%.6g, ratio=%.6g, standardized=%.6g\n", report.pmse, report.ratio,
              report.standardized);
  emit_report(a.format == "md" ? sm::render_markdown(report) : sm::to_json(report).dump(2) + "\n",
              a.out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// utility specific

struct SpecificArgs {
  std::string original_path, schema_path;
  std::vector<std::string> synthetic_args;
  std::string formula_text;
  std::string family = "gaussian";
  double level = 0.95;
  std::string format = "json";
  std::string out_path;
  std::string plot_path;
};

int cmd_utility_specific(const SpecificArgs& a) {
  const auto schema = sm::load_schema(a.schema_path);
  const sm::Dataset original = sm::load_csv(a.original_path, schema);
  std::vector<sm::Dataset> synthetics;
  for (const auto& path : expand_inputs(a.synthetic_args))
    synthetics.push_back(sm::load_csv(path, schema));

  sm::ModelFormula formula = sm::parse_formula(a.formula_text);
  if (a.family == "gaussian")
    formula.family = sm::Family::gaussian;
  else if (a.family == "binomial")
    formula.family = sm::Family::binomial;
  else if (a.family == "multinomial")
    formula.family = sm::Family::multinomial;
  else
    throw std::invalid_argument("unknown family: " + a.family);

  const sm::FitComparison cmp = sm::compare_fits(original, synthetics, formula, a.level);

  for (const auto& w : cmp.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("median IO=%.6g, median standardized difference=%.6g\n", cmp.median_io,
              cmp.median_std_diff);
  emit_report(a.format == "md" ? sm::render_markdown(cmp) : sm::to_json(cmp).dump(2) + "\n",
              a.out_path);
  if (!a.plot_path.empty()) {
    sm::write_forest_svg(a.plot_path, cmp, "interval overlap: " + a.formula_text);
    std::cout << "wrote plot " << a.plot_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string preset;
  std::string config_path;
  bool full = false;
  long n = -1;
  int dim = -1;
  int reps = -1;
  std::string rhos;
  std::string model, null_method;
  int pairs_m = -1;
  int perms = -1;
  long long seed = -1;
  bool seed_set = false;
  int threads = 0;
  std::string format = "csv";
  std::string out_path;
};

void apply_preset(const std::string& name, sm::SimConfig& cfg) {
  if (name == "table1-desk") {
    // Complete synthesis, order-2 logistic, analytic null: desk-scale defaults.
  } else if (name == "table2-desk") {
    cfg.mask.synthesized_columns = {"x1", "x2"};
  } else if (name == "tableA1-desk") {
    cfg.spec.model = sm::PropensityModel::cart;
    cfg.null_method = sm::NullMethod::pairwise;
    cfg.pairs_m = 10;
    cfg.reps = 20;
  } else {
    throw std::invalid_argument("unknown preset: " + name +
                                " (expected table1-desk, table2-desk or tableA1-desk)");
  }
}

void apply_config_file(const std::string& path, sm::SimConfig& cfg, bool& seed_from_config) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("invalid config JSON in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "n")
      cfg.n = value.get<std::size_t>();
    else if (key == "dim")
      cfg.dim = value.get<int>();
    else if (key == "reps")
      cfg.reps = value.get<int>();
    else if (key == "covariances" || key == "rhos")
      cfg.covariances = value.get<std::vector<double>>();
    else if (key == "model") {
      const auto name = value.get<std::string>();
      if (name == "logistic")
        cfg.spec.model = sm::PropensityModel::logistic;
      else if (name == "cart")
        cfg.spec.model = sm::PropensityModel::cart;
      else
        throw std::invalid_argument("config: unknown propensity model: " + name);
    } else if (key == "null") {
      const auto name = value.get<std::string>();
      if (name == "analytic")
        cfg.null_method = sm::NullMethod::analytic;
      else if (name == "permutation")
        cfg.null_method = sm::NullMethod::permutation;
      else if (name == "pairwise")
        cfg.null_method = sm::NullMethod::pairwise;
      else
        throw std::invalid_argument("config: unknown null method: " + name);
    } else if (key == "pairs_m")
      cfg.pairs_m = value.get<int>();
    else if (key == "n_perms")
      cfg.n_perms = value.get<int>();
    else if (key == "order")
      cfg.spec.design.interaction_order = value.get<int>();
    else if (key == "squares")
      cfg.spec.design.include_squares = value.get<bool>();
    else if (key == "standardize")
      cfg.spec.design.standardize_numeric = value.get<bool>();
    else if (key == "synthesized_columns")
      cfg.mask.synthesized_columns = value.get<std::vector<std::string>>();
    else if (key == "min_leaf")
      cfg.spec.tree_config.min_leaf = value.get<int>();
    else if (key == "max_depth")
      cfg.spec.tree_config.max_depth = value.get<int>();
    else if (key == "cp")
      cfg.spec.tree_config.complexity = value.get<double>();
    else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
      seed_from_config = true;
    } else if (key == "threads")
      cfg.threads = value.get<int>();
    else
      throw std::invalid_argument("config: unknown key: " + key);
  }
}

int cmd_simulate(const SimulateArgs& a) {
  sm::SimConfig cfg;
  bool seed_from_config = false;
  if (!a.preset.empty()) apply_preset(a.preset, cfg);
  if (!a.config_path.empty()) apply_config_file(a.config_path, cfg, seed_from_config);
  if (a.full) {
    cfg.n = 5000;
    cfg.reps = 1000;
  }
  if (a.n >= 0) cfg.n = static_cast<std::size_t>(a.n);
  if (a.dim >= 0) cfg.dim = a.dim;
  if (a.reps >= 0) cfg.reps = a.reps;
  if (!a.rhos.empty()) cfg.covariances = split_doubles(a.rhos);
  if (!a.model.empty()) {
    if (a.model == "logistic")
      cfg.spec.model = sm::PropensityModel::logistic;
    else if (a.model == "cart")
      cfg.spec.model = sm::PropensityModel::cart;
    else
      throw std::invalid_argument("unknown propensity model: " + a.model);
  }
  if (!a.null_method.empty()) {
    if (a.null_method == "analytic")
      cfg.null_method = sm::NullMethod::analytic;
    else if (a.null_method == "permutation")
      cfg.null_method = sm::NullMethod::permutation;
    else if (a.null_method == "pairwise")
      cfg.null_method = sm::NullMethod::pairwise;
    else
      throw std::invalid_argument("unknown null method: " + a.null_method);
  }
  if (a.pairs_m >= 0) cfg.pairs_m = a.pairs_m;
  if (a.perms >= 0) cfg.n_perms = a.perms;
  if (a.seed_set)
    cfg.seed = static_cast<std::uint64_t>(a.seed);
  else if (!seed_from_config)
    throw std::invalid_argument("--seed is required for simulate");
  cfg.threads = a.threads > 0 ? a.threads : (cfg.threads > 1 ? cfg.threads : threads_from_env());

  int failed = 0;
  const auto rows = sm::run_simulation(cfg, &failed);
  if (failed > 0) std::cerr << "warning: " << failed << " replicate(s) failed and were skipped\n";

  std::string text;
  if (a.format == "json")
    text = sm::to_json(rows).dump(2) + "\n";
  else if (a.format == "md")
    text = sm::render_table(rows, sm::TableFormat::markdown);
  else
    text = sm::render_table(rows, sm::TableFormat::csv);
  emit_report(text, a.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-data utility measurement toolkit"};
  app.require_subcommand(1);

  // --- synthesize ---
  SynthArgs sa;
  auto* syn = app.add_subcommand("synthesize", "generate synthetic replicates of a dataset");
  syn->add_option("--data", sa.data_path, "original dataset CSV")->required();
  syn->add_option("--schema", sa.schema_path, "schema JSON")->required();
  syn->add_option("--method", sa.method, "bootstrap|parametric_normal|parametric_rank|cart")
      ->default_val("cart");
  syn->add_option("--m", sa.m, "number of synthetic replicates")->default_val(1);
  std::string syn_cols, syn_visit;
  syn->add_option("--synthesized-columns", syn_cols,
                  "comma-separated columns to synthesize (default: all)");
  syn->add_option("--order-of-visit", syn_visit,
                  "comma-separated column visit order (default: schema order)");
  syn->add_option("--seed", sa.seed, "RNG seed")->required();
  syn->add_option("--out-dir", sa.out_dir, "output directory")->required();
  syn->add_option("--min-leaf", sa.min_leaf, "cart: minimum rows per leaf")->default_val(5);
  syn->add_option("--max-depth", sa.max_depth, "cart: maximum tree depth")->default_val(30);
  syn->add_option("--cp", sa.cp, "cart: complexity (required relative impurity decrease)")
      ->default_val(1e-4);

  // --- utility general / specific ---
  auto* util = app.add_subcommand("utility", "measure synthetic-data utility");
  util->require_subcommand(1);

  GeneralArgs ga;
  auto* gen = util->add_subcommand("general", "propensity-score pMSE with a calibrated null");
  gen->add_option("--original", ga.original_path, "original dataset CSV")->required();
  gen->add_option("--synthetic", ga.synthetic_args, "synthetic CSV path(s); globs allowed")
      ->required();
  gen->add_option("--schema", ga.schema_path, "schema JSON")->required();
  gen->add_option("--model", ga.model, "logistic|cart")->default_val("logistic");
  gen->add_option("--null", ga.null_method, "analytic|permutation|pairwise")
      ->default_val("analytic");
  std::string gen_cols;
  gen->add_option("--synthesized-columns", gen_cols,
                  "comma-separated synthesized columns (default: all)");
  gen->add_option("--order", ga.order, "design interaction order (1-3)")->default_val(2);
  gen->add_flag("--squares", ga.squares, "include squares of numeric variables");
  gen->add_flag("--standardize,!--no-standardize", ga.standardize,
                "standardize numeric variables in the design (default on)");
  gen->add_option("--perms", ga.perms, "permutation count for the permutation null")
      ->default_val(100);
  auto* gen_seed = gen->add_option("--seed", ga.seed, "RNG seed (permutation null)");
  gen->add_option("--min-leaf", ga.min_leaf, "cart: minimum rows per leaf")->default_val(20);
  gen->add_option("--max-depth", ga.max_depth, "cart: maximum tree depth")->default_val(30);
  gen->add_option("--cp", ga.cp, "cart: complexity (required relative impurity decrease)")
      ->default_val(1e-4);
  gen->add_option("--format", ga.format, "json|md")->check(CLI::IsMember({"json", "md"}));
  gen->add_option("--out", ga.out_path, "write the report here instead of standard output");

  SpecificArgs pa;
  auto* spc = util->add_subcommand("specific", "fit comparison: CI overlap and coefficient differences");
  spc->add_option("--original", pa.original_path, "original dataset CSV")->required();
  spc->add_option("--synthetic", pa.synthetic_args, "synthetic CSV path(s); globs allowed")
      ->required();
  spc->add_option("--schema", pa.schema_path, "schema JSON")->required();
  spc->add_option("--formula", pa.formula_text, "model formula, e.g. 'y ~ a + b + a:b'")
      ->required();
  spc->add_option("--family", pa.family, "gaussian|binomial|multinomial")
      ->default_val("gaussian");
  spc->add_option("--level", pa.level, "confidence level")->default_val(0.95);
  spc->add_option("--format", pa.format, "json|md")->check(CLI::IsMember({"json", "md"}));
  spc->add_option("--out", pa.out_path, "write the report here instead of standard output");
  spc->add_option("--plot", pa.plot_path, "write an interval-overlap forest plot SVG here");

  // --- simulate ---
  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo calibration runs over equicorrelated normals");
  sim->add_option("--preset", ma.preset, "table1-desk|table2-desk|tableA1-desk");
  sim->add_option("--config", ma.config_path, "JSON config file (overrides preset)");
  sim->add_flag("--full", ma.full, "full scale: n=5000, reps=1000");
  sim->add_option("--n", ma.n, "rows per dataset");
  sim->add_option("--dim", ma.dim, "number of variables");
  sim->add_option("--reps", ma.reps, "replications per correlation value");
  sim->add_option("--rhos", ma.rhos, "comma-separated correlation values");
  sim->add_option("--model", ma.model, "logistic|cart");
  sim->add_option("--null", ma.null_method, "analytic|permutation|pairwise");
  sim->add_option("--pairs-m", ma.pairs_m, "syntheses per replicate for the pairwise null");
  sim->add_option("--perms", ma.perms, "permutation count for the permutation null");
  auto* sim_seed = sim->add_option("--seed", ma.seed, "RNG seed");
  sim->add_option("--threads", ma.threads, "worker threads (env SYNTHMETRIC_THREADS as fallback)");
  sim->add_option("--format", ma.format, "csv|md|json")
      ->check(CLI::IsMember({"csv", "md", "json"}));
  sim->add_option("--out", ma.out_path, "write the table here instead of standard output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 2;
  }

  try {
    if (*syn) {
      sa.synthesized_columns = split_list(syn_cols);
      sa.visit_order = split_list(syn_visit);
      return cmd_synthesize(sa);
    }
    if (*gen) {
      ga.synthesized_columns = split_list(gen_cols);
      ga.seed_set = gen_seed->count() > 0;
      return cmd_utility_general(ga);
    }
    if (*spc) return cmd_utility_specific(pa);
    if (*sim) {
      ma.seed_set = sim_seed->count() > 0;
      return cmd_simulate(ma);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
