#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icm/lfvi.hpp"
#include "icm/model.hpp"
#include "icm/simgen.hpp"

namespace icm::study {

// One (structure family, sparsity) cell of the replicated study.
struct StudyTask {
  simgen::StructureFamily family = simgen::StructureFamily::kPsd;
  double sparsity = 0.1;
};

struct StudyConfig {
  std::vector<StudyTask> tasks;
  int individuals = 500;
  int snps = 5000;
  int n_causal = 10;
  int replicates = 10;
  double threshold = 0.0025;
  int pca_components = 3;
  std::vector<std::string> methods{"uncorrected", "pca", "icm"};
  model::IcmConfig model;
  lfvi::Stage1Config stage1;  // its seed field is ignored; seeds derive from `seed`
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

// One summary row per (family, sparsity, method).  mean/se are NaN when
// undefined (no replicate produced a defined precision; fewer than two for
// the standard error).  reference is the published full-scale precision for
// the matching configuration, as a fraction, when one exists.
struct StudyRow {
  std::string family;
  double sparsity = 0.0;
  std::string method;
  double mean_precision = 0.0;
  double se = 0.0;
  int n_defined = 0;
  int n_failed = 0;
  std::optional<double> reference;
};

// Per-replicate details, exposed for tests and the study output file.
struct StudyDetail {
  // precisions[task][method][replicate]; nullopt = undefined or failed.
  std::vector<std::vector<std::vector<std::optional<double>>>> precisions;
  std::vector<std::string> failures;
};

// Published full-scale precision (fraction in [0,1]) for a configuration:
// psd/spatial carry per-sparsity rows; the two surrogate families map to
// their full-scale counterparts independent of sparsity.  Unknown
// combinations -> nullopt.
std::optional<double> reference_precision(simgen::StructureFamily family,
                                          double sparsity, const std::string& method);

// For each task and replicate: simulate -> stage-1 fit (when a corrected
// method is requested) -> per-method scan -> precision against the true
// causal set.  Replicate failures are recorded in detail->failures and the
// run continues.  Replicate r of task t is seeded independently of the
// replicate count, so extending the study leaves earlier replicates
// unchanged.
std::vector<StudyRow> run_replicated_study(const StudyConfig& config,
                                           StudyDetail* detail = nullptr);

}  // namespace icm::study
