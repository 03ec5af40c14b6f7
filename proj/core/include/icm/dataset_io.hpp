#pragma once

#include <optional>
#include <string>

#include "icm/genotype.hpp"
#include "icm/la.hpp"
#include "icm/lfvi.hpp"
#include "icm/simgen.hpp"

namespace icm::io {

// Ground-truth block of a simulated dataset (absent for external data).
struct DatasetTruth {
  Vector beta;              // per-SNP effects
  Vector lambda;            // per-individual confounder offset
  Vector sigma;             // per-individual noise scale
  std::vector<int> causal;  // causal SNP indices
  Matrix gamma;             // SNP-by-population factor
  Matrix s;                 // population-by-individual membership
};

// In-memory form of a genotype dataset file: magic "ICMG1", little-endian
// u32 snps/individuals/flags header, one byte per genotype (row-major by
// individual), then optional trait and truth blocks per the flags.
struct Dataset {
  GenotypeMatrix genotypes;
  std::optional<Vector> traits;
  std::optional<DatasetTruth> truth;
};

Dataset dataset_from_simulation(const simgen::SimulatedDataset& sim);

// Atomic (write-temp-rename) writers; readers validate magic, version, and
// lengths before returning.  All failures raise IoError.
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

// Versioned, bit-exact serialization of the full inference state.
void save_checkpoint(const std::string& path, const lfvi::VariationalState& state);
lfvi::VariationalState load_checkpoint(const std::string& path);

// Atomic text write used for all delimiter-separated outputs.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace icm::io
