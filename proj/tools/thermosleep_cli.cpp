// thermosleep: synthetic-data generation, panel estimation, marginal
// effects, climate projection and plotting for sleep/temperature analyses.
//
// Exit codes: 0 success, 1 validation/schema error, 2 numerical failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "thermosleep/thermosleep.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* c = cmd->add_option("--config", args.config_path, "JSON config (or a run manifest)");
  if (config_required) c->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "seed override (defaults to config.seed)");
  cmd->add_option("--threads", args.threads, "worker threads (default: hardware)");
}

std::uint64_t effective_seed(const thermosleep::json& config, const CommonArgs& args) {
  if (args.seed) return *args.seed;
  if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
  if (config.contains("synth") && config["synth"].contains("seed"))
    return config["synth"]["seed"].get<std::uint64_t>();
  return 1;
}

void apply_threads(const CommonArgs& args) {
  if (args.threads) {
    static std::string env;
    env = std::to_string(*args.threads);
    setenv("THERMOSLEEP_THREADS", env.c_str(), 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sleep/temperature panel estimation toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, fit_args, margins_args, project_args;
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  add_common(synth, synth_args);
  auto* fitc = app.add_subcommand("fit", "estimate a model specification");
  add_common(fitc, fit_args);
  auto* margins = app.add_subcommand("margins", "estimate interacted marginal effects");
  add_common(margins, margins_args);
  auto* project = app.add_subcommand("project", "project annual sleep loss on climate grids");
  add_common(project, project_args);

  std::string plot_input, plot_output = "plot.svg", plot_title, plot_out_dir = ".";
  std::optional<int> plot_year;
  auto* plot = app.add_subcommand("plot", "render a curve or loss-map SVG");
  plot->add_option("--input", plot_input, "curve.csv or projection_ensemble.csv")->required();
  plot->add_option("--out", plot_out_dir, "output directory");
  plot->add_option("--output", plot_output, "output file name");
  plot->add_option("--title", plot_title, "plot title");
  plot->add_option("--year", plot_year, "year to plot when the grid holds several");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      apply_threads(synth_args);
      const auto config = thermosleep::load_config_file(synth_args.config_path);
      thermosleep::run_synth(config, effective_seed(config, synth_args), synth_args.out_dir);
    } else if (*fitc) {
      apply_threads(fit_args);
      const auto config = thermosleep::load_config_file(fit_args.config_path);
      const std::string dir =
          std::filesystem::path(fit_args.config_path).parent_path().string();
      thermosleep::run_fit(config, effective_seed(config, fit_args), dir, fit_args.out_dir);
    } else if (*margins) {
      apply_threads(margins_args);
      const auto config = thermosleep::load_config_file(margins_args.config_path);
      const std::string dir =
          std::filesystem::path(margins_args.config_path).parent_path().string();
      thermosleep::run_margins(config, effective_seed(config, margins_args), dir,
                               margins_args.out_dir);
    } else if (*project) {
      apply_threads(project_args);
      const auto config = thermosleep::load_config_file(project_args.config_path);
      const std::string dir =
          std::filesystem::path(project_args.config_path).parent_path().string();
      thermosleep::run_project(config, effective_seed(config, project_args), dir,
                               project_args.out_dir);
    } else if (*plot) {
      thermosleep::run_plot(plot_input, plot_out_dir, plot_output, plot_title, plot_year);
    }
  } catch (const thermosleep::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const thermosleep::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
