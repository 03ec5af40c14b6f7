#include "icm/dataset_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "icm/errors.hpp"

namespace icm::io {

namespace {

constexpr char kDatasetMagic[5] = {'I', 'C', 'M', 'G', '1'};
constexpr char kCheckpointMagic[5] = {'I', 'C', 'M', 'C', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kFlagTraits = 1u;
constexpr std::uint32_t kFlagTruth = 2u;

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), tmp_(path + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open for writing: " + tmp_);
  }
  ~Writer() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed: " + tmp_);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void vec(const Vector& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }

  void commit() {
    out_.flush();
    if (!out_) throw IoError("flush failed: " + tmp_);
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) throw IoError("rename failed: " + tmp_ + " -> " + path_);
    committed_ = true;
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw IoError("cannot open for reading: " + path);
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw IoError("truncated file: " + path_);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  Vector vec() {
    const std::uint32_t n = u32();
    Vector v(static_cast<Eigen::Index>(n));
    for (std::uint32_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = f64();
    return v;
  }
  Matrix mat() {
    const std::uint32_t r = u32();
    const std::uint32_t c = u32();
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::uint32_t i = 0; i < r; ++i)
      for (std::uint32_t j = 0; j < c; ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f64();
    return m;
  }
  void expect_magic(const char (&magic)[5], const char* what) {
    char got[5];
    bytes(got, 5);
    if (std::memcmp(got, magic, 5) != 0)
      throw IoError(std::string("not a ") + what + " file: " + path_);
  }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::string path_;
  std::ifstream in_;
};

void write_bn(Writer& w, const num::BatchNormParams& bn) {
  w.vec(bn.scale);
  w.vec(bn.shift);
  w.vec(bn.running_mean);
  w.vec(bn.running_var);
}

void read_bn(Reader& r, num::BatchNormParams& bn) {
  bn.scale = r.vec();
  bn.shift = r.vec();
  bn.running_mean = r.vec();
  bn.running_var = r.vec();
}

void write_net(Writer& w, const num::MlpParams& p) {
  w.mat(p.w1);
  w.vec(p.b1);
  w.mat(p.w2);
  w.vec(p.b2);
  w.mat(p.w3);
  w.vec(p.b3);
  write_bn(w, p.bn1);
  write_bn(w, p.bn2);
}

void read_net(Reader& r, num::MlpParams& p) {
  p.w1 = r.mat();
  p.b1 = r.vec();
  p.w2 = r.mat();
  p.b2 = r.vec();
  p.w3 = r.mat();
  p.b3 = r.vec();
  read_bn(r, p.bn1);
  read_bn(r, p.bn2);
}

void write_adam(Writer& w, const num::AdamState& s) {
  w.f64(s.config.step_size);
  w.f64(s.config.beta1);
  w.f64(s.config.beta2);
  w.f64(s.config.eps);
  w.u64(static_cast<std::uint64_t>(s.step));
  w.vec(s.m);
  w.vec(s.v);
}

void read_adam(Reader& r, num::AdamState& s) {
  s.config.step_size = r.f64();
  s.config.beta1 = r.f64();
  s.config.beta2 = r.f64();
  s.config.eps = r.f64();
  s.step = static_cast<std::int64_t>(r.u64());
  s.m = r.vec();
  s.v = r.vec();
}

}  // namespace

Dataset dataset_from_simulation(const simgen::SimulatedDataset& sim) {
  Dataset d;
  d.genotypes = sim.genotypes;
  d.traits = sim.trait.traits;
  DatasetTruth truth;
  truth.beta = sim.trait.beta;
  truth.lambda = sim.trait.lambda;
  truth.sigma = sim.trait.sigma;
  truth.causal = sim.trait.causal;
  truth.gamma = sim.structure.gamma;
  truth.s = sim.structure.s;
  d.truth = std::move(truth);
  return d;
}

void save_dataset(const std::string& path, const Dataset& data) {
  const int n = data.genotypes.individuals();
  const int m = data.genotypes.snps();
  if (data.traits && data.traits->size() != n)
    throw DimensionError("save_dataset: trait length mismatch");

  Writer w(path);
  w.bytes(kDatasetMagic, 5);
  w.u32(static_cast<std::uint32_t>(m));
  w.u32(static_cast<std::uint32_t>(n));
  std::uint32_t flags = 0;
  if (data.traits) flags |= kFlagTraits;
  if (data.truth) flags |= kFlagTruth;
  w.u32(flags);
  w.bytes(data.genotypes.data().data(),
          static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  if (data.traits)
    for (Eigen::Index i = 0; i < data.traits->size(); ++i) w.f64((*data.traits)(i));
  if (data.truth) {
    const DatasetTruth& t = *data.truth;
    w.vec(t.beta);
    w.vec(t.lambda);
    w.vec(t.sigma);
    w.u32(static_cast<std::uint32_t>(t.causal.size()));
    for (const int c : t.causal) w.u32(static_cast<std::uint32_t>(c));
    w.mat(t.gamma);
    w.mat(t.s);
  }
  w.commit();
}

Dataset load_dataset(const std::string& path) {
  Reader r(path);
  r.expect_magic(kDatasetMagic, "dataset");
  const std::uint32_t m = r.u32();
  const std::uint32_t n = r.u32();
  const std::uint32_t flags = r.u32();
  if (m == 0 || n == 0) throw IoError("dataset has empty dimensions: " + path);
  if ((flags & ~(kFlagTraits | kFlagTruth)) != 0)
    throw IoError("dataset has unknown flags: " + path);

  Dataset d;
  d.genotypes = GenotypeMatrix(static_cast<int>(n), static_cast<int>(m));
  r.bytes(d.genotypes.data().data(),
          static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * m; ++i)
    if (d.genotypes.data()[i] > 2)
      throw IoError("dataset has genotype bytes outside {0,1,2}: " + path);

  if (flags & kFlagTraits) {
    Vector y(static_cast<Eigen::Index>(n));
    for (std::uint32_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = r.f64();
    d.traits = std::move(y);
  }
  if (flags & kFlagTruth) {
    DatasetTruth t;
    t.beta = r.vec();
    t.lambda = r.vec();
    t.sigma = r.vec();
    const std::uint32_t n_causal = r.u32();
    if (n_causal > m) throw IoError("dataset truth block is inconsistent: " + path);
    t.causal.resize(n_causal);
    for (std::uint32_t i = 0; i < n_causal; ++i) t.causal[i] = static_cast<int>(r.u32());
    t.gamma = r.mat();
    t.s = r.mat();
    if (t.beta.size() != static_cast<Eigen::Index>(m) ||
        t.lambda.size() != static_cast<Eigen::Index>(n) ||
        t.sigma.size() != static_cast<Eigen::Index>(n))
      throw IoError("dataset truth block is inconsistent: " + path);
    d.truth = std::move(t);
  }
  if (!r.at_eof()) throw IoError("dataset has trailing bytes: " + path);
  return d;
}

void save_checkpoint(const std::string& path, const lfvi::VariationalState& state) {
  Writer w(path);
  w.bytes(kCheckpointMagic, 5);
  w.u32(kCheckpointVersion);

  const model::IcmConfig& c = state.config;
  w.i32(c.latent_dim);
  w.i32(c.snp_hidden1);
  w.i32(c.snp_hidden2);
  w.i32(c.trait_hidden1);
  w.i32(c.trait_hidden2);
  w.u32(static_cast<std::uint32_t>(c.snp_model));
  w.u32(static_cast<std::uint32_t>(c.trait_model));
  w.u32(static_cast<std::uint32_t>(c.trait_kind));
  w.i32(c.categorical_levels);
  w.f64(c.group_lasso_scale);

  w.i32(state.individuals);
  w.i32(state.snps);
  w.u64(state.stage1_seed);
  w.i32(state.stage1_epochs_done);
  w.i32(state.stage2_epochs_done);

  w.mat(state.mu_z);
  w.mat(state.log_sigma_z);
  w.mat(state.mu_w);
  w.mat(state.log_sigma_w);

  const bool phi_net = state.phi.kind == model::SnpModelKind::kNeural;
  w.u32(phi_net ? 1 : 0);
  if (phi_net) write_net(w, state.phi.net);

  const bool theta_net = state.theta.kind == model::TraitModelKind::kNeural;
  w.u32(theta_net ? 1 : 0);
  w.i32(state.theta.snps);
  w.i32(state.theta.latent_dim);
  if (theta_net)
    write_net(w, state.theta.net);
  else
    w.vec(state.theta.coef);
  w.u32(state.theta_fitted ? 1 : 0);

  w.u32(state.ratio_allocated ? 1 : 0);
  if (state.ratio_allocated) {
    w.i32(state.ratio_hidden1);
    w.i32(state.ratio_hidden2);
    write_net(w, state.ratio);
  }

  write_adam(w, state.opt_mu_z);
  write_adam(w, state.opt_ls_z);
  write_adam(w, state.opt_mu_w);
  write_adam(w, state.opt_ls_w);
  write_adam(w, state.opt_phi);
  write_adam(w, state.opt_theta);
  write_adam(w, state.opt_ratio);
  w.commit();
}

lfvi::VariationalState load_checkpoint(const std::string& path) {
  Reader r(path);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  const std::uint32_t version = r.u32();
  if (version > kCheckpointVersion)
    throw IoError("checkpoint version " + std::to_string(version) +
                  " is newer than supported: " + path);

  lfvi::VariationalState st;
  model::IcmConfig& c = st.config;
  c.latent_dim = r.i32();
  c.snp_hidden1 = r.i32();
  c.snp_hidden2 = r.i32();
  c.trait_hidden1 = r.i32();
  c.trait_hidden2 = r.i32();
  c.snp_model = static_cast<model::SnpModelKind>(r.u32());
  c.trait_model = static_cast<model::TraitModelKind>(r.u32());
  c.trait_kind = static_cast<model::TraitKind>(r.u32());
  c.categorical_levels = r.i32();
  c.group_lasso_scale = r.f64();
  c.validate();

  st.individuals = r.i32();
  st.snps = r.i32();
  st.stage1_seed = r.u64();
  st.stage1_epochs_done = r.i32();
  st.stage2_epochs_done = r.i32();
  if (st.individuals <= 0 || st.snps <= 0 || st.stage1_epochs_done < 0 ||
      st.stage2_epochs_done < 0)
    throw IoError("checkpoint has invalid dimensions: " + path);

  st.mu_z = r.mat();
  st.log_sigma_z = r.mat();
  st.mu_w = r.mat();
  st.log_sigma_w = r.mat();
  if (st.mu_z.rows() != st.individuals || st.mu_z.cols() != c.latent_dim ||
      st.mu_w.rows() != st.snps || st.mu_w.cols() != c.latent_dim ||
      st.log_sigma_z.rows() != st.individuals || st.log_sigma_w.rows() != st.snps)
    throw IoError("checkpoint variational blocks are inconsistent: " + path);

  st.phi.kind = c.snp_model;
  if (r.u32() != 0) read_net(r, st.phi.net);

  const bool theta_net = r.u32() != 0;
  st.theta.kind = theta_net ? model::TraitModelKind::kNeural
                            : model::TraitModelKind::kLinear;
  st.theta.snps = r.i32();
  st.theta.latent_dim = r.i32();
  if (theta_net)
    read_net(r, st.theta.net);
  else
    st.theta.coef = r.vec();
  st.theta_fitted = r.u32() != 0;

  st.ratio_allocated = r.u32() != 0;
  if (st.ratio_allocated) {
    st.ratio_hidden1 = r.i32();
    st.ratio_hidden2 = r.i32();
    read_net(r, st.ratio);
  }

  read_adam(r, st.opt_mu_z);
  read_adam(r, st.opt_ls_z);
  read_adam(r, st.opt_mu_w);
  read_adam(r, st.opt_ls_w);
  read_adam(r, st.opt_phi);
  read_adam(r, st.opt_theta);
  read_adam(r, st.opt_ratio);
  if (!r.at_eof()) throw IoError("checkpoint has trailing bytes: " + path);
  return st;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  Writer w(path);
  w.bytes(content.data(), content.size());
  w.commit();
}

}  // namespace icm::io
