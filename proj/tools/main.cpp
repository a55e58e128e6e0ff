#include <CLI11.hpp>
#include <cstdlib>
#include <optional>
#include <string>

#include "sgs/harness.hpp"
#include "sgs/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Score-guided Langevin sampling lab"};
  app.set_version_flag("--version", std::string(sgs::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string output_root;
  if (const char* env = std::getenv("SGS_OUTPUT_ROOT")) output_root = env;

  std::optional<std::uint64_t> seed_override;
  app.add_option("--seed", seed_override, "override the config seed list with one seed");
  app.add_option("--out", output_root, "output root (defaults to $SGS_OUTPUT_ROOT)");

  std::string sample_config;
  auto* sample = app.add_subcommand("sample", "run a configured sampling pipeline");
  sample->add_option("config", sample_config, "experiment config JSON")->required();

  std::string compare_config;
  auto* compare = app.add_subcommand("compare", "run arms and tally final W2");
  compare->add_option("config", compare_config, "comparison config JSON")->required();

  std::string bounds_inputs;
  std::vector<std::string> sweep_args;
  auto* bounds = app.add_subcommand("bounds", "evaluate the W2 bound decomposition");
  bounds->add_option("inputs", bounds_inputs, "bound inputs JSON")->required();
  bounds->add_option("--sweep", sweep_args, "FIELD LO HI STEPS")->expected(4);

  std::string fit_config;
  auto* fit = app.add_subcommand("fit", "train a DAE and emit its model JSON");
  fit->add_option("config", fit_config, "fit config JSON")->required();

  std::string w2_a, w2_b, w2_method = "exact";
  auto* w2 = app.add_subcommand("w2", "distance between two sample CSVs");
  w2->add_option("a", w2_a, "first batch CSV")->required();
  w2->add_option("b", w2_b, "second batch CSV")->required();
  w2->add_option("--method", w2_method, "exact | sliced")
      ->check(CLI::IsMember({"exact", "sliced"}));

  CLI11_PARSE(app, argc, argv);

  if (sample->parsed()) return sgs::cli_sample(sample_config, seed_override, output_root);
  if (compare->parsed()) return sgs::cli_compare(compare_config, seed_override, output_root);
  if (bounds->parsed()) {
    std::optional<std::string> field;
    double lo = 0, hi = 0;
    int steps = 0;
    if (!sweep_args.empty()) {
      field = sweep_args[0];
      lo = std::stod(sweep_args[1]);
      hi = std::stod(sweep_args[2]);
      steps = std::stoi(sweep_args[3]);
    }
    return sgs::cli_bounds(bounds_inputs, field, lo, hi, steps);
  }
  if (fit->parsed()) return sgs::cli_fit(fit_config, output_root);
  if (w2->parsed()) return sgs::cli_w2(w2_a, w2_b, w2_method);
  return 1;
}
