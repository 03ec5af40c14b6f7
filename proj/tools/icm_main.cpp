#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "icm/commands.hpp"
#include "icm/errors.hpp"
#include "icm/log.hpp"
#include "icm/run_config.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<double> threshold;
};

// Command-line flags supersede config-file keys.
icm::cli::RunConfig merged_config(const Flags& flags) {
  icm::cli::RunConfig config;
  if (!flags.config_path.empty())
    config = icm::cli::RunConfig::from_file(flags.config_path);
  if (flags.seed) config.set("seed", std::to_string(*flags.seed));
  if (flags.threads) config.set("threads", std::to_string(*flags.threads));
  if (flags.out) config.set("out", *flags.out);
  if (flags.method) config.set("method", *flags.method);
  if (flags.threshold) {
    std::ostringstream os;
    os << std::setprecision(17) << *flags.threshold;
    config.set("threshold", os.str());
  }
  return config;
}

void add_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_path, "Path to a key=value config file");
  cmd->add_option("--seed", flags.seed, "Random seed (unsigned 64-bit)");
  cmd->add_option("--threads", flags.threads, "Worker thread count");
  cmd->add_option("--out", flags.out, "Output directory");
  cmd->add_option("--method", flags.method,
                  "Comma-separated methods: uncorrected,pca,icm");
  cmd->add_option("--threshold", flags.threshold, "Significance threshold");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit-confounder GWAS pipeline"};
  app.require_subcommand(1);

  const char* names[] = {"simulate", "fit", "assoc", "study", "gradcheck"};
  const char* descriptions[] = {
      "Generate a synthetic genotype/trait dataset",
      "Fit the two-stage model and write a checkpoint",
      "Run per-SNP association tests from a checkpoint",
      "Run the replicated precision study",
      "Run the finite-difference gradient verification suite"};
  Flags flags[5];
  for (int i = 0; i < 5; ++i)
    add_flags(app.add_subcommand(names[i], descriptions[i]), flags[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (int i = 0; i < 5; ++i) {
    if (!app.get_subcommand(names[i])->parsed()) continue;
    try {
      return icm::cli::run_command(names[i], merged_config(flags[i]));
    } catch (const icm::ConfigError& e) {
      icm::log_error(e.what());
      return 1;
    } catch (const icm::DomainError& e) {
      icm::log_error(e.what());
      return 1;
    } catch (const icm::DimensionError& e) {
      icm::log_error(e.what());
      return 1;
    } catch (const icm::IoError& e) {
      icm::log_error(e.what());
      return 3;
    } catch (const icm::NumericError& e) {
      icm::log_error(e.what());
      return 2;
    } catch (const std::exception& e) {
      icm::log_error(std::string("unexpected failure: ") + e.what());
      return 2;
    }
  }
  return 1;
}
