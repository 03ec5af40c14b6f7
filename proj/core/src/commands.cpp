#include "icm/commands.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "icm/assoc.hpp"
#include "icm/dataset_io.hpp"
#include "icm/errors.hpp"
#include "icm/gradsuite.hpp"
#include "icm/lfvi.hpp"
#include "icm/log.hpp"
#include "icm/model.hpp"
#include "icm/simgen.hpp"
#include "icm/study.hpp"

namespace icm::cli {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string out_dir(const RunConfig& config) {
  const std::string dir = config.get_string("out", ".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
  return dir;
}

int get_threads(const RunConfig& config) {
  const auto t = static_cast<int>(config.get_int("threads", 1));
  if (t < 1) throw ConfigError("threads must be >= 1");
  return t;
}

// Keys shared by every command.
const std::vector<std::string> kCommonKeys = {"seed", "out", "threads"};

const std::vector<std::string> kModelKeys = {
    "latent_dim",     "snp_model",    "trait_model",   "trait_kind",
    "categorical_levels", "group_lasso_scale", "snp_hidden1", "snp_hidden2",
    "trait_hidden1",  "trait_hidden2"};

const std::vector<std::string> kStage1Keys = {
    "snp_batch", "individual_batch", "epochs", "step_size", "step_size_z",
    "mc_samples"};

const std::vector<std::string> kStage2Keys = {
    "stage2",          "stage2_epochs",     "stage2_step_size",
    "stage2_individual_batch", "stage2_mc_samples", "ratio_steps",
    "generator_steps", "ratio_hidden1",     "ratio_hidden2"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> lists) {
  std::vector<std::string> out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  return out;
}

model::IcmConfig model_config_from(const RunConfig& config) {
  model::IcmConfig c;
  c.latent_dim = static_cast<int>(config.get_int("latent_dim", c.latent_dim));
  c.snp_hidden1 = static_cast<int>(config.get_int("snp_hidden1", c.snp_hidden1));
  c.snp_hidden2 = static_cast<int>(config.get_int("snp_hidden2", c.snp_hidden2));
  c.trait_hidden1 = static_cast<int>(config.get_int("trait_hidden1", c.trait_hidden1));
  c.trait_hidden2 = static_cast<int>(config.get_int("trait_hidden2", c.trait_hidden2));
  if (config.has("snp_model"))
    c.snp_model = model::snp_model_from_name(config.get_string("snp_model", ""));
  if (config.has("trait_model"))
    c.trait_model = model::trait_model_from_name(config.get_string("trait_model", ""));
  if (config.has("trait_kind"))
    c.trait_kind = model::trait_kind_from_name(config.get_string("trait_kind", ""));
  c.categorical_levels =
      static_cast<int>(config.get_int("categorical_levels", c.categorical_levels));
  c.group_lasso_scale = config.get_real("group_lasso_scale", c.group_lasso_scale);
  c.validate();
  return c;
}

lfvi::Stage1Config stage1_config_from(const RunConfig& config) {
  lfvi::Stage1Config s;
  s.snp_batch = static_cast<int>(config.get_int("snp_batch", s.snp_batch));
  s.individual_batch =
      static_cast<int>(config.get_int("individual_batch", s.individual_batch));
  s.epochs = static_cast<int>(config.get_int("epochs", s.epochs));
  s.step_size = config.get_real("step_size", s.step_size);
  s.step_size_z = config.get_real("step_size_z", s.step_size_z);
  s.mc_samples = static_cast<int>(config.get_int("mc_samples", s.mc_samples));
  s.validate();
  return s;
}

lfvi::Stage2Config stage2_config_from(const RunConfig& config) {
  lfvi::Stage2Config s;
  s.epochs = static_cast<int>(config.get_int("stage2_epochs", s.epochs));
  s.step_size = config.get_real("stage2_step_size", s.step_size);
  s.individual_batch = static_cast<int>(
      config.get_int("stage2_individual_batch", s.individual_batch));
  s.mc_samples = static_cast<int>(config.get_int("stage2_mc_samples", s.mc_samples));
  s.ratio_steps = static_cast<int>(config.get_int("ratio_steps", s.ratio_steps));
  s.generator_steps =
      static_cast<int>(config.get_int("generator_steps", s.generator_steps));
  s.ratio_hidden1 = static_cast<int>(config.get_int("ratio_hidden1", s.ratio_hidden1));
  s.ratio_hidden2 = static_cast<int>(config.get_int("ratio_hidden2", s.ratio_hidden2));
  s.validate();
  return s;
}

bool same_model_config(const model::IcmConfig& a, const model::IcmConfig& b) {
  return a.latent_dim == b.latent_dim && a.snp_hidden1 == b.snp_hidden1 &&
         a.snp_hidden2 == b.snp_hidden2 && a.trait_hidden1 == b.trait_hidden1 &&
         a.trait_hidden2 == b.trait_hidden2 && a.snp_model == b.snp_model &&
         a.trait_model == b.trait_model && a.trait_kind == b.trait_kind &&
         a.categorical_levels == b.categorical_levels &&
         a.group_lasso_scale == b.group_lasso_scale;
}

std::string metrics_to_text(const std::vector<lfvi::MetricRow>& rows) {
  std::string text;
  for (const auto& r : rows)
    text += std::to_string(r.epoch) + "\t" + r.block + "\t" + fmt(r.value) + "\n";
  return text;
}

}  // namespace

int cmd_simulate(const RunConfig& config) {
  config.require_known(concat({kCommonKeys,
                               {"family", "a", "snps", "individuals", "n_causal"}}));
  const std::uint64_t seed = config.require_seed();
  const auto family = simgen::family_from_name(config.get_string("family", "PSD"));
  const double a = config.get_real("a", 0.1);
  const int snps = static_cast<int>(config.get_int("snps", 5000));
  const int individuals = static_cast<int>(config.get_int("individuals", 500));
  const int n_causal = static_cast<int>(config.get_int("n_causal", 10));
  const int threads = get_threads(config);
  const std::string dir = out_dir(config);

  log_info("simulate: family=" + simgen::family_name(family) + " a=" + fmt(a) +
           " snps=" + std::to_string(snps) + " individuals=" +
           std::to_string(individuals));
  const simgen::SimulatedDataset sim =
      simgen::simulate_dataset(family, a, snps, individuals, n_causal, seed, threads);
  const io::Dataset data = io::dataset_from_simulation(sim);
  io::save_dataset(dir + "/dataset.icm", data);

  // Sidecar summary: configuration, genotype byte counts, allele-frequency
  // histogram, trait moments, and structure concentration.
  std::ostringstream s;
  s << "family\t" << simgen::family_name(family) << "\n";
  s << "a\t" << fmt(a) << "\n";
  s << "snps\t" << snps << "\n";
  s << "individuals\t" << individuals << "\n";
  s << "n_causal\t" << n_causal << "\n";
  s << "seed\t" << seed << "\n";

  std::size_t byte_count[3] = {0, 0, 0};
  const std::vector<std::uint8_t>& bytes = sim.genotypes.data();
  const std::size_t total = static_cast<std::size_t>(snps) * individuals;
  for (std::size_t i = 0; i < total; ++i) ++byte_count[bytes[i]];
  for (int g = 0; g < 3; ++g)
    s << "genotype_count_" << g << "\t" << byte_count[g] << "\n";

  constexpr int kBins = 10;
  int hist[kBins] = {0};
  for (int m = 0; m < snps; ++m) {
    const double freq = sim.genotypes.snp_column(m).mean() / 2.0;
    int bin = static_cast<int>(freq * kBins);
    bin = std::min(std::max(bin, 0), kBins - 1);
    ++hist[bin];
  }
  for (int b = 0; b < kBins; ++b)
    s << "allele_freq_bin\t" << fmt(static_cast<double>(b) / kBins) << "\t"
      << fmt(static_cast<double>(b + 1) / kBins) << "\t" << hist[b] << "\n";

  const Vector& y = sim.trait.traits;
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / (y.size() - 1);
  s << "trait_mean\t" << fmt(mean) << "\n";
  s << "trait_var\t" << fmt(var) << "\n";
  s << "trait_min\t" << fmt(y.minCoeff()) << "\n";
  s << "trait_max\t" << fmt(y.maxCoeff()) << "\n";

  // Mean (over individuals) of the largest normalized membership: near 1
  // when structure is concentrated, near 1/k when diffuse.
  double mean_max = 0.0;
  for (Eigen::Index col = 0; col < sim.structure.s.cols(); ++col) {
    const Vector memb = sim.structure.s.col(col);
    const double sum = memb.sum();
    mean_max += sum > 0.0 ? memb.maxCoeff() / sum : 0.0;
  }
  mean_max /= static_cast<double>(sim.structure.s.cols());
  s << "mean_max_membership\t" << fmt(mean_max) << "\n";

  io::write_text_atomic(dir + "/dataset_summary.txt", s.str());
  log_info("simulate: wrote " + dir + "/dataset.icm");
  return 0;
}

int cmd_fit(const RunConfig& config) {
  config.require_known(concat(
      {kCommonKeys, {"dataset", "resume_from"}, kModelKeys, kStage1Keys, kStage2Keys}));
  const std::uint64_t seed = config.require_seed();
  if (!config.has("dataset"))
    throw ConfigError("fit requires config key 'dataset' (path to a dataset file)");
  const std::string dir = out_dir(config);
  const int threads = get_threads(config);
  (void)threads;  // stage-1 math is dense-linear-algebra bound; kept for parity

  const io::Dataset data = io::load_dataset(config.get_string("dataset", ""));
  const model::IcmConfig model_config = model_config_from(config);
  lfvi::Stage1Config stage1 = stage1_config_from(config);
  stage1.seed = seed;

  std::vector<lfvi::MetricRow> metrics;
  lfvi::VariationalState state;
  if (config.has("resume_from")) {
    state = io::load_checkpoint(config.get_string("resume_from", ""));
    if (!same_model_config(state.config, model_config))
      throw ConfigError("fit: model configuration does not match the checkpoint");
    if (state.individuals != data.genotypes.individuals() ||
        state.snps != data.genotypes.snps())
      throw ConfigError("fit: checkpoint dimensions do not match the dataset");
    if (state.stage1_seed != seed)
      log_info("fit: resuming with the checkpoint's stage-1 seed " +
               std::to_string(state.stage1_seed));
    stage1.seed = state.stage1_seed;
    lfvi::stage1_run_epochs(state, data.genotypes, stage1, stage1.epochs, &metrics,
                            nullptr);
  } else {
    state = lfvi::stage1_fit(data.genotypes, model_config, stage1, &metrics, nullptr);
  }
  io::save_checkpoint(dir + "/checkpoint.icmc", state);
  log_info("fit: stage 1 complete (" + std::to_string(state.stage1_epochs_done) +
           " epochs)");

  const std::string stage2_mode = config.get_string("stage2", "auto");
  if (stage2_mode != "auto" && stage2_mode != "on" && stage2_mode != "off")
    throw ConfigError("fit: stage2 must be auto, on, or off");
  const bool want_stage2 =
      stage2_mode == "on" || (stage2_mode == "auto" && data.traits.has_value());
  if (stage2_mode == "on" && !data.traits)
    throw ConfigError("fit: stage 2 requested but the dataset has no trait block");

  if (want_stage2) {
    lfvi::Stage2Config stage2 = stage2_config_from(config);
    stage2.seed = seed;
    if (model_config.trait_kind == model::TraitKind::kRealImplicit)
      lfvi::stage2_fit_lfvi(data.genotypes, *data.traits, state, stage2, &metrics);
    else
      lfvi::stage2_fit_tractable(data.genotypes, *data.traits, state, stage2, &metrics);
    io::save_checkpoint(dir + "/checkpoint.icmc", state);
    log_info("fit: stage 2 complete (" + std::to_string(state.stage2_epochs_done) +
             " epochs)");
  }

  io::write_text_atomic(dir + "/metrics.tsv", metrics_to_text(metrics));
  return 0;
}

int cmd_assoc(const RunConfig& config) {
  config.require_known(concat({kCommonKeys,
                               {"dataset", "checkpoint", "method", "threshold",
                                "pca_components", "genomic_control"}}));
  const std::string dir = out_dir(config);
  const int threads = get_threads(config);
  const double threshold = config.get_real("threshold", 0.0025);
  const int pca_components = static_cast<int>(config.get_int("pca_components", 3));
  const bool apply_gc = config.get_bool("genomic_control", false);
  const std::vector<std::string> methods = config.get_list("method", {"icm"});
  for (const auto& m : methods)
    if (m != "uncorrected" && m != "pca" && m != "icm")
      throw ConfigError("assoc: unknown method '" + m + "'");

  if (!config.has("dataset"))
    throw ConfigError("assoc requires config key 'dataset'");
  const io::Dataset data = io::load_dataset(config.get_string("dataset", ""));
  if (!data.traits)
    throw ConfigError("assoc: dataset has no trait block");

  Matrix z_hat;
  const bool needs_checkpoint =
      std::find(methods.begin(), methods.end(), "icm") != methods.end();
  if (needs_checkpoint) {
    if (!config.has("checkpoint"))
      throw ConfigError("assoc: method icm requires config key 'checkpoint'");
    const lfvi::VariationalState state =
        io::load_checkpoint(config.get_string("checkpoint", ""));
    if (state.individuals != data.genotypes.individuals() ||
        state.snps != data.genotypes.snps())
      throw ConfigError("assoc: checkpoint dimensions do not match the dataset");
    z_hat = state.mu_z;
  }

  for (const auto& method : methods) {
    assoc::AssociationResult res;
    if (method == "uncorrected")
      res = assoc::test_uncorrected(data.genotypes, *data.traits, threshold, threads);
    else if (method == "pca")
      res = assoc::test_pca_baseline(data.genotypes, *data.traits, pca_components,
                                     threshold, threads);
    else
      res = assoc::test_corrected(data.genotypes, *data.traits, z_hat, threshold,
                                  threads);

    bool have_lambda = false;
    double lambda = 1.0;
    if (res.snps() >= 100) {
      auto [lam, corrected] = assoc::genomic_control(res);
      lambda = lam;
      have_lambda = true;
      if (apply_gc) res = std::move(corrected);
    } else if (apply_gc) {
      throw ConfigError("assoc: genomic control needs at least 100 SNPs");
    }

    std::ostringstream s;
    for (int m = 0; m < res.snps(); ++m)
      s << m << "\t" << fmt(res.statistic(m)) << "\t" << fmt(res.p_value(m)) << "\t"
        << (res.p_value(m) <= res.threshold ? 1 : 0) << "\n";
    s << "# lambda_gc\t" << (have_lambda ? fmt(lambda) : "NA") << "\n";
    std::string prec = "NA";
    if (data.truth) {
      const auto p = assoc::precision(res, data.truth->causal);
      if (p) prec = fmt(*p);
    }
    s << "# precision\t" << prec << "\n";
    io::write_text_atomic(dir + "/assoc_" + method + ".tsv", s.str());
    log_info("assoc: wrote " + dir + "/assoc_" + method + ".tsv");
  }
  return 0;
}

int cmd_study(const RunConfig& config) {
  config.require_known(concat({kCommonKeys,
                               {"families", "a", "snps", "individuals", "n_causal",
                                "replicates", "threshold", "pca_components", "method"},
                               kModelKeys, kStage1Keys}));
  study::StudyConfig sc;
  sc.seed = config.get_u64("seed", 0);
  sc.threads = get_threads(config);
  sc.individuals = static_cast<int>(config.get_int("individuals", sc.individuals));
  sc.snps = static_cast<int>(config.get_int("snps", sc.snps));
  sc.n_causal = static_cast<int>(config.get_int("n_causal", sc.n_causal));
  sc.replicates = static_cast<int>(config.get_int("replicates", sc.replicates));
  if (sc.replicates < 1) throw ConfigError("study: replicates must be >= 1");
  sc.threshold = config.get_real("threshold", sc.threshold);
  sc.pca_components = static_cast<int>(config.get_int("pca_components", sc.pca_components));
  sc.methods = config.get_list("method", sc.methods);
  sc.model = model_config_from(config);
  sc.stage1 = stage1_config_from(config);

  const auto family_names = config.get_list("families", {"PSD", "SPATIAL"});
  const auto a_values = config.get_real_list("a", {0.1});
  for (const auto& fname : family_names)
    for (const double a : a_values)
      sc.tasks.push_back({simgen::family_from_name(fname), a});

  const std::string dir = out_dir(config);
  study::StudyDetail detail;
  const std::vector<study::StudyRow> rows = study::run_replicated_study(sc, &detail);

  std::ostringstream s;
  s << "family\ta\tmethod\tmean_precision\tse\tn_defined\tn_failed\treference\n";
  for (const auto& r : rows) {
    s << r.family << "\t" << fmt(r.sparsity) << "\t" << r.method << "\t"
      << (std::isnan(r.mean_precision) ? "NA" : fmt(r.mean_precision)) << "\t"
      << (std::isnan(r.se) ? "" : fmt(r.se)) << "\t" << r.n_defined << "\t"
      << r.n_failed << "\t" << (r.reference ? fmt(*r.reference) : "NA") << "\n";
  }
  for (const auto& f : detail.failures) s << "# failure\t" << f << "\n";
  io::write_text_atomic(dir + "/study.tsv", s.str());
  log_info("study: wrote " + dir + "/study.tsv");

  for (const auto& f : detail.failures) log_error("study replicate failed: " + f);
  return detail.failures.empty() ? 0 : 2;
}

int cmd_gradcheck(const RunConfig& config) {
  config.require_known(concat({kCommonKeys, {"instances", "tolerance"}}));
  const int instances = static_cast<int>(config.get_int("instances", 20));
  const double tolerance = config.get_real("tolerance", 1e-5);
  const std::uint64_t seed = config.get_u64("seed", 20260816);

  const auto rows = num::run_gradient_suite(instances, tolerance, seed);
  std::cout << "op\tinstances\tmax_rel_err\tstatus\n";
  for (const auto& r : rows)
    std::cout << r.op << "\t" << r.instances << "\t" << fmt(r.max_rel_err) << "\t"
              << (r.pass ? "PASS" : "FAIL") << "\n";
  return num::gradient_suite_passed(rows) ? 0 : 2;
}

int run_command(const std::string& name, const RunConfig& config) {
  if (name == "simulate") return cmd_simulate(config);
  if (name == "fit") return cmd_fit(config);
  if (name == "assoc") return cmd_assoc(config);
  if (name == "study") return cmd_study(config);
  if (name == "gradcheck") return cmd_gradcheck(config);
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace icm::cli
