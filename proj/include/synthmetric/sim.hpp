#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthmetric/dataset.hpp"
#include "synthmetric/rng.hpp"
#include "synthmetric/synth.hpp"
#include "synthmetric/utility_general.hpp"

namespace synthmetric {

struct SimCell {
  double mean_pmse = 0.0;
  double mean_ratio = 0.0;
  double mean_std = 0.0;
};

struct SimResultRow {
  double rho = 0.0;
  SimCell correct;
  SimCell incorrect;
};

// Monte-Carlo study of the null calibration: per correlation level one "real"
// MVN dataset is generated, then `reps` correct and incorrect syntheses of it
// are scored. Desk-scale defaults; the published-scale study uses n=5000 and
// reps=1000.
struct SimConfig {
  std::size_t n = 1000;
  int dim = 10;
  std::vector<double> covariances = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int reps = 200;
  PropensityModelSpec spec;    // logistic order-2 by default
  SynthesisMask mask;          // empty: complete synthesis
  NullMethod null_method = NullMethod::analytic;
  int pairs_m = 10;            // syntheses per replicate when the null is pairwise
  int n_perms = 100;           // permutation null
  std::uint64_t seed = 0;
  int threads = 1;
};

namespace detail {

struct RepOutcome {
  bool ok = false;
  double c_pmse = 0.0, c_ratio = 0.0, c_std = 0.0;
  double i_pmse = 0.0, i_ratio = 0.0, i_std = 0.0;
};

// Incorrect synthesis for the incomplete design: each masked column is redrawn
// iid normal from its own sample mean/sd, ignoring all other columns.
inline Dataset independent_normal_synthesis(const Dataset& original, const SynthesisMask& mask,
                                            Rng& rng) {
  Dataset syn = original;
  for (const auto& name : mask.synthesized_columns) {
    const std::size_t j = original.require_column(name);
    const auto& col = original.numeric(j);
    const double m = mean(col);
    const double sd = stddev(col);
    for (auto& v : syn.numeric(j)) v = m + sd * rng.normal();
  }
  syn.set_role(DatasetRole::synthetic);
  return syn;
}

inline RepOutcome run_replicate(const Dataset& real, const SimConfig& cfg, const Rng& rep_rng) {
  const bool complete = cfg.mask.synthesized_columns.empty();
  const int m = (cfg.null_method == NullMethod::pairwise) ? cfg.pairs_m : 1;

  Rng rng_correct = rep_rng.substream(1);
  Rng rng_incorrect = rep_rng.substream(2);

  std::vector<Dataset> correct, incorrect;
  if (complete) {
    for (int i = 0; i < m; ++i) correct.push_back(mvn_correct_synthesis(real, rng_correct));
    for (int i = 0; i < m; ++i) incorrect.push_back(mvn_incorrect_synthesis(real, rng_incorrect));
  } else {
    SynthesisPlan plan;
    plan.method = SynthMethod::parametric_normal;
    plan.mask = cfg.mask;
    plan.m = m;
    plan.seed = rng_correct.seed();
    correct = synthesize(real, plan);
    for (int i = 0; i < m; ++i)
      incorrect.push_back(independent_normal_synthesis(real, cfg.mask, rng_incorrect));
  }

  UtilityOptions opts;
  opts.null_method = cfg.null_method;
  opts.mask = cfg.mask;
  opts.n_perms = cfg.n_perms;

  RepOutcome out;
  opts.seed = rep_rng.substream(3).seed();
  const UtilityReport rc = general_utility(real, correct, cfg.spec, opts);
  opts.seed = rep_rng.substream(4).seed();
  const UtilityReport ri = general_utility(real, incorrect, cfg.spec, opts);
  out.c_pmse = rc.pmse;
  out.c_ratio = rc.ratio;
  out.c_std = rc.standardized;
  out.i_pmse = ri.pmse;
  out.i_ratio = ri.ratio;
  out.i_std = ri.standardized;
  out.ok = true;
  return out;
}

}  // namespace detail

// Runs the study. Replicates are independent and may execute on several
// threads; results land in per-replicate slots and are reduced in replicate
// order, so the output is identical for any thread count. Failed replicates
// (propagated fit errors) are skipped and counted in *failed_replicates.
inline std::vector<SimResultRow> run_simulation(const SimConfig& cfg,
                                                int* failed_replicates = nullptr) {
  if (cfg.reps < 1) throw std::invalid_argument("run_simulation: reps must be >= 1");
  if (cfg.n < 4) throw std::invalid_argument("run_simulation: n too small");
  if (cfg.dim < 1) throw std::invalid_argument("run_simulation: dim must be >= 1");
  for (const double rho : cfg.covariances)
    if (!(rho >= 0.0 && rho < 1.0))
      throw std::invalid_argument("run_simulation: covariances must lie in [0, 1)");
  if (cfg.null_method == NullMethod::pairwise && cfg.pairs_m < 2)
    throw std::invalid_argument("run_simulation: pairwise null needs pairs_m >= 2");
  if (!cfg.mask.synthesized_columns.empty()) {
    std::vector<ColumnSchema> schema;
    for (int j = 0; j < cfg.dim; ++j)
      schema.push_back({"x" + std::to_string(j + 1), ColumnKind::numeric, {}});
    validate_mask(cfg.mask, schema);
  }

  int failures = 0;
  std::vector<SimResultRow> rows;
  const Rng root(cfg.seed);

  for (std::size_t rho_idx = 0; rho_idx < cfg.covariances.size(); ++rho_idx) {
    const double rho = cfg.covariances[rho_idx];
    Rng rho_rng = root.substream(rho_idx);
    MvnSpec spec;
    spec.mean = Eigen::VectorXd::Zero(cfg.dim);
    spec.covariance = equicorrelation(cfg.dim, rho);
    const Dataset real = mvn_sample(spec, cfg.n, rho_rng);

    std::vector<detail::RepOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
    const auto work = [&](int rep) {
      try {
        outcomes[static_cast<std::size_t>(rep)] =
            detail::run_replicate(real, cfg, rho_rng.substream(static_cast<std::uint64_t>(rep) + 1));
      } catch (const std::exception&) {
        outcomes[static_cast<std::size_t>(rep)].ok = false;
      }
    };
    const int threads = std::max(1, cfg.threads);
    if (threads == 1) {
      for (int rep = 0; rep < cfg.reps; ++rep) work(rep);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
          for (;;) {
            const int rep = next.fetch_add(1);
            if (rep >= cfg.reps) return;
            work(rep);
          }
        });
      for (auto& th : pool) th.join();
    }

    SimResultRow row;
    row.rho = rho;
    int ok = 0;
    for (const auto& o : outcomes) {  // fixed order: replicate 0, 1, ...
      if (!o.ok) {
        ++failures;
        continue;
      }
      ++ok;
      row.correct.mean_pmse += o.c_pmse;
      row.correct.mean_ratio += o.c_ratio;
      row.correct.mean_std += o.c_std;
      row.incorrect.mean_pmse += o.i_pmse;
      row.incorrect.mean_ratio += o.i_ratio;
      row.incorrect.mean_std += o.i_std;
    }
    if (ok == 0)
      throw std::runtime_error("run_simulation: every replicate failed at rho = " +
                               std::to_string(rho));
    const double d = static_cast<double>(ok);
    row.correct.mean_pmse /= d;
    row.correct.mean_ratio /= d;
    row.correct.mean_std /= d;
    row.incorrect.mean_pmse /= d;
    row.incorrect.mean_ratio /= d;
    row.incorrect.mean_std /= d;
    rows.push_back(row);
  }

  if (failed_replicates) *failed_replicates = failures;
  return rows;
}

enum class TableFormat { markdown, csv };

// Table-1-style layout: one row per correlation, three summary columns per
// synthesis kind. CSV uses shortest round-trip numbers; markdown rounds.
inline std::string render_table(const std::vector<SimResultRow>& rows, TableFormat fmt) {
  std::string out;
  if (fmt == TableFormat::csv) {
    out += "rho,correct_pmse,correct_ratio,correct_std,incorrect_pmse,incorrect_ratio,incorrect_std\n";
    for (const auto& r : rows) {
      out += detail::format_double(r.rho) + "," + detail::format_double(r.correct.mean_pmse) +
             "," + detail::format_double(r.correct.mean_ratio) + "," +
             detail::format_double(r.correct.mean_std) + "," +
             detail::format_double(r.incorrect.mean_pmse) + "," +
             detail::format_double(r.incorrect.mean_ratio) + "," +
             detail::format_double(r.incorrect.mean_std) + "\n";
    }
    return out;
  }
  out +=
      "| rho | correct pMSE | correct ratio | correct std | incorrect pMSE | incorrect ratio | "
      "incorrect std |\n|---|---|---|---|---|---|---|\n";
  const auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.5g", v);
    return std::string(buf);
  };
  for (const auto& r : rows)
    out += "| " + num(r.rho) + " | " + num(r.correct.mean_pmse) + " | " +
           num(r.correct.mean_ratio) + " | " + num(r.correct.mean_std) + " | " +
           num(r.incorrect.mean_pmse) + " | " + num(r.incorrect.mean_ratio) + " | " +
           num(r.incorrect.mean_std) + " |\n";
  return out;
}

inline nlohmann::json to_json(const std::vector<SimResultRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e;
    e["rho"] = r.rho;
    e["correct"] = {{"pmse", r.correct.mean_pmse},
                    {"ratio", r.correct.mean_ratio},
                    {"standardized", r.correct.mean_std}};
    e["incorrect"] = {{"pmse", r.incorrect.mean_pmse},
                      {"ratio", r.incorrect.mean_ratio},
                      {"standardized", r.incorrect.mean_std}};
    j.push_back(std::move(e));
  }
  return j;
}

}  // namespace synthmetric
