#include "icm/study.hpp"

#include <cmath>
#include <limits>

#include "icm/assoc.hpp"
#include "icm/errors.hpp"
#include "icm/log.hpp"
#include "icm/rng.hpp"

namespace icm::study {

namespace {

constexpr std::uint64_t kKeyStudy = 0x57d1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ReferenceRow {
  double icm, pca, lmm, gcat;
};

std::optional<ReferenceRow> reference_row(simgen::StructureFamily family,
                                          double sparsity) {
  using F = simgen::StructureFamily;
  switch (family) {
    case F::kBnSurrogate:
      return ReferenceRow{0.992, 0.348, 0.307, 0.992};
    case F::kPcSurrogate:
      return ReferenceRow{0.856, 0.027, 0.433, 0.703};
    case F::kPsd:
      if (sparsity == 1.0) return ReferenceRow{0.970, 0.804, 0.923, 0.953};
      if (sparsity == 0.5) return ReferenceRow{0.943, 0.795, 0.901, 0.936};
      if (sparsity == 0.1) return ReferenceRow{0.922, 0.381, 0.386, 0.904};
      if (sparsity == 0.01) return ReferenceRow{0.927, 0.242, 0.351, 0.907};
      return std::nullopt;
    case F::kSpatial:
      if (sparsity == 1.0) return ReferenceRow{0.909, 0.564, 0.600, 0.752};
      if (sparsity == 0.5) return ReferenceRow{0.862, 0.505, 0.466, 0.725};
      if (sparsity == 0.1) return ReferenceRow{0.809, 0.024, 0.266, 0.356};
      if (sparsity == 0.01) return ReferenceRow{0.755, 0.018, 0.153, 0.302};
      return std::nullopt;
  }
  return std::nullopt;
}

bool needs_stage1(const std::vector<std::string>& methods) {
  for (const auto& m : methods)
    if (m == "icm") return true;
  return false;
}

}  // namespace

std::optional<double> reference_precision(simgen::StructureFamily family,
                                          double sparsity, const std::string& method) {
  const auto row = reference_row(family, sparsity);
  if (!row) return std::nullopt;
  if (method == "icm") return row->icm;
  if (method == "pca") return row->pca;
  if (method == "lmm") return row->lmm;
  if (method == "gcat") return row->gcat;
  if (method == "uncorrected") return std::nullopt;  // not reported at full scale
  return std::nullopt;
}

void StudyConfig::validate() const {
  if (tasks.empty()) throw ConfigError("study: at least one (family, sparsity) task");
  if (individuals < 10) throw ConfigError("study: individuals must be >= 10");
  if (snps < 1) throw ConfigError("study: snps must be >= 1");
  if (n_causal < 0 || n_causal > snps)
    throw ConfigError("study: n_causal must lie in [0, snps]");
  if (replicates < 0) throw ConfigError("study: replicates must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("study: threshold must lie in (0, 1)");
  if (pca_components < 0) throw ConfigError("study: pca_components must be >= 0");
  if (methods.empty()) throw ConfigError("study: at least one method");
  for (const auto& m : methods)
    if (m != "uncorrected" && m != "pca" && m != "icm")
      throw ConfigError("study: unknown method '" + m + "'");
  stage1.validate();
  model.validate();
}

std::vector<StudyRow> run_replicated_study(const StudyConfig& config,
                                           StudyDetail* detail) {
  config.validate();
  const std::size_t n_tasks = config.tasks.size();
  const std::size_t n_methods = config.methods.size();

  StudyDetail local;
  StudyDetail& det = detail ? *detail : local;
  det.precisions.assign(
      n_tasks, std::vector<std::vector<std::optional<double>>>(
                   n_methods, std::vector<std::optional<double>>(
                                  static_cast<std::size_t>(config.replicates))));
  det.failures.clear();
  std::vector<std::vector<int>> failed(n_tasks,
                                       std::vector<int>(n_methods, 0));

  num::RngStream study_rng = num::RngStream(config.seed).split(kKeyStudy);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const StudyTask& task = config.tasks[t];
    num::RngStream task_rng = study_rng.split(static_cast<std::uint64_t>(t));
    for (int r = 0; r < config.replicates; ++r) {
      // Replicate seeds depend only on (study seed, task, replicate index).
      num::RngStream rep_rng = task_rng.split(static_cast<std::uint64_t>(r));
      const std::uint64_t sim_seed = rep_rng.split(0).next_u64();
      const std::uint64_t fit_seed = rep_rng.split(1).next_u64();

      simgen::SimulatedDataset data;
      try {
        data = simgen::simulate_dataset(task.family, task.sparsity, config.snps,
                                        config.individuals, config.n_causal, sim_seed,
                                        config.threads);
      } catch (const std::exception& e) {
        for (std::size_t mi = 0; mi < n_methods; ++mi) ++failed[t][mi];
        det.failures.push_back("family=" + simgen::family_name(task.family) +
                               " a=" + std::to_string(task.sparsity) + " replicate=" +
                               std::to_string(r) + " simulate: " + e.what());
        continue;
      }

      Matrix z_hat;
      bool stage1_ok = true;
      std::string stage1_error;
      if (needs_stage1(config.methods)) {
        try {
          lfvi::Stage1Config s1 = config.stage1;
          s1.seed = fit_seed;
          const lfvi::VariationalState state =
              lfvi::stage1_fit(data.genotypes, config.model, s1, nullptr, nullptr);
          z_hat = state.mu_z;
        } catch (const std::exception& e) {
          stage1_ok = false;
          stage1_error = e.what();
        }
      }

      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        const std::string& method = config.methods[mi];
        try {
          assoc::AssociationResult res;
          if (method == "uncorrected") {
            res = assoc::test_uncorrected(data.genotypes, data.trait.traits,
                                          config.threshold, config.threads);
          } else if (method == "pca") {
            res = assoc::test_pca_baseline(data.genotypes, data.trait.traits,
                                           config.pca_components, config.threshold,
                                           config.threads);
          } else {
            if (!stage1_ok) throw NumericError("stage-1 fit failed: " + stage1_error);
            res = assoc::test_corrected(data.genotypes, data.trait.traits, z_hat,
                                        config.threshold, config.threads);
          }
          det.precisions[t][mi][static_cast<std::size_t>(r)] =
              assoc::precision(res, data.trait.causal);
        } catch (const std::exception& e) {
          ++failed[t][mi];
          det.failures.push_back("family=" + simgen::family_name(task.family) +
                                 " a=" + std::to_string(task.sparsity) + " replicate=" +
                                 std::to_string(r) + " method=" + method + ": " +
                                 e.what());
        }
      }
      log_debug("study: finished " + simgen::family_name(task.family) + " a=" +
                std::to_string(task.sparsity) + " replicate " + std::to_string(r));
    }
  }

  std::vector<StudyRow> rows;
  rows.reserve(n_tasks * n_methods);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      StudyRow row;
      row.family = simgen::family_name(config.tasks[t].family);
      row.sparsity = config.tasks[t].sparsity;
      row.method = config.methods[mi];
      row.n_failed = failed[t][mi];
      row.reference = reference_precision(config.tasks[t].family,
                                          config.tasks[t].sparsity, row.method);
      double sum = 0.0;
      for (const auto& p : det.precisions[t][mi])
        if (p) {
          sum += *p;
          ++row.n_defined;
        }
      row.mean_precision = row.n_defined > 0 ? sum / row.n_defined : kNaN;
      if (row.n_defined >= 2) {
        double ss = 0.0;
        for (const auto& p : det.precisions[t][mi])
          if (p) ss += (*p - row.mean_precision) * (*p - row.mean_precision);
        row.se = std::sqrt(ss / (row.n_defined - 1)) / std::sqrt(row.n_defined);
      } else {
        row.se = kNaN;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace icm::study
