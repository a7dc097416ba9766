#include <CLI11.hpp>

#include "mvreprobit/cli.hpp"

int main(int argc, char** argv) {
  using mvreprobit::cli::Arguments;
  Arguments args;
  std::vector<std::string> sets;
  std::optional<int> chains;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<double> psrf_threshold;

  CLI::App app{"Multivariate random-effects probit models for panel data"};
  app.require_subcommand(1);

  auto add_set = [&](CLI::App* sub) {
    sub->add_option("--set", sets, "Override a config key, e.g. sampler.n_iterations=2000");
  };

  auto* fit = app.add_subcommand("fit", "Run the MCMC sampler");
  fit->add_option("--data", args.data, "Panel CSV")->required();
  fit->add_option("--config", args.config, "INI config file");
  fit->add_option("--out", args.out, "Output directory for chains")->required();
  fit->add_option("--chains", chains, "Number of chains");
  fit->add_option("--seed", seed, "Master seed");
  fit->add_option("--threads", threads, "Worker threads");
  add_set(fit);

  auto* simulate = app.add_subcommand("simulate", "Simulate a panel from known parameters");
  simulate->add_option("--config", args.config, "INI config with [simulate] and [truth]")->required();
  simulate->add_option("--out", args.out, "Output directory")->required();
  simulate->add_option("--seed", seed, "Simulation seed");
  add_set(simulate);

  auto* diagnose = app.add_subcommand("diagnose", "Convergence diagnostics for stored chains");
  diagnose->add_option("--chains", args.chains, "Chain directory")->required();
  diagnose->add_option("--psrf-threshold", psrf_threshold, "Warn above this PSRF");

  auto* summarize = app.add_subcommand("summarize", "Posterior summary table as CSV");
  summarize->add_option("--chains", args.chains, "Chain directory")->required();

  auto* correlations = app.add_subcommand("correlations", "Correlation decomposition");
  correlations->add_option("--chains", args.chains, "Chain directory")->required();
  correlations->add_option("--model", args.model, "two or three")->required()->check(CLI::IsMember({"two", "three"}));
  correlations->add_option("--data", args.data, "Panel CSV, adds unadjusted correlations");
  correlations->add_option("--out", args.out, "Directory for correlations.csv (default: chain directory)");

  auto* predict = app.add_subcommand("predict-marginals", "Predicted marginal probabilities");
  predict->add_option("--chains", args.chains, "Chain directory")->required();
  predict->add_option("--data", args.data, "Panel CSV")->required();
  predict->add_option("--covariate", args.covariate, "Covariate to fix")->required();
  predict->add_option("--values", args.values, "Values for the covariate")->required()->delimiter(',');

  auto* tetra = app.add_subcommand("tetrachoric", "Tetrachoric correlations of the outcomes");
  tetra->add_option("--data", args.data, "Panel CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mvreprobit::cli::kValidation;
  }

  args.command = app.get_subcommands().front()->get_name();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << s << "'\n";
      return mvreprobit::cli::kValidation;
    }
    args.overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (chains) args.overrides["sampler.n_chains"] = std::to_string(*chains);
  if (seed) args.overrides[args.command == "simulate" ? "simulate.seed" : "sampler.seed"] = std::to_string(*seed);
  if (threads) args.overrides["run.threads"] = std::to_string(*threads);
  if (psrf_threshold) args.overrides["run.psrf_threshold"] = mvreprobit::format_number(*psrf_threshold);
  return mvreprobit::cli::dispatch(args);
}
