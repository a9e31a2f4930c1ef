// Generates the bundled health-survey-like stand-in dataset used by the
// examples and the end-to-end tests: 5000 rows of mixed numeric/categorical
// variables with strong cross-column dependencies, so that synthesizers which
// destroy the joint structure are visibly worse on analysis-specific measures.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "synthmetric/dataset.hpp"
#include "synthmetric/glm.hpp"
#include "synthmetric/rng.hpp"

namespace sm = synthmetric;

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data";
  const std::size_t n = 5000;
  sm::Rng rng(20260814);

  std::vector<sm::ColumnSchema> schema = {
      {"age", sm::ColumnKind::numeric, {}},
      {"sex", sm::ColumnKind::categorical, {"female", "male"}},
      {"bmi", sm::ColumnKind::numeric, {}},
      {"smoker", sm::ColumnKind::categorical, {"no", "yes"}},
      {"income", sm::ColumnKind::numeric, {}},
      {"sbp", sm::ColumnKind::numeric, {}},
      {"area", sm::ColumnKind::categorical, {"urban", "suburban", "rural"}},
  };
  sm::Dataset ds(schema, n);

  for (std::size_t i = 0; i < n; ++i) {
    const double age = 18.0 + 62.0 * rng.uniform();
    const int male = rng.uniform() < 0.48 ? 1 : 0;
    const double bmi = 21.0 + 0.08 * age + 1.5 * male + 3.0 * rng.normal();
    const double p_smoke = sm::expit(-0.6 - 0.025 * (age - 45.0) + 0.35 * male);
    const int smoker = rng.uniform() < p_smoke ? 1 : 0;
    const double income = std::exp(9.5 + 0.015 * age + 0.45 * rng.normal());
    const double sbp =
        90.0 + 0.35 * age + 1.1 * bmi + 8.0 * smoker + 4.0 * male + 8.0 * rng.normal();
    const double u_area = rng.uniform();
    const double urban_cut = income > 20000.0 ? 0.5 : 0.35;
    const int area = u_area < urban_cut ? 0 : (u_area < urban_cut + 0.3 ? 1 : 2);

    ds.numeric(0)[i] = age;
    ds.codes(1)[i] = male;
    ds.numeric(2)[i] = bmi;
    ds.codes(3)[i] = smoker;
    ds.numeric(4)[i] = income;
    ds.numeric(5)[i] = sbp;
    ds.codes(6)[i] = area;
  }

  std::filesystem::create_directories(out_dir);
  sm::write_csv(out_dir + "/standin.csv", ds);
  std::ofstream schema_out(out_dir + "/standin_schema.json");
  schema_out << sm::schema_to_json(schema).dump(2) << "\n";
  std::cout << "wrote " << out_dir << "/standin.csv and " << out_dir
            << "/standin_schema.json (" << n << " rows)\n";
  return 0;
}
