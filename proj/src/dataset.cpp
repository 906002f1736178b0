#include "fdrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fdrl/binio.hpp"
#include "fdrl/rng.hpp"

namespace fdrl {

namespace {

constexpr char kFeatureMagic[9] = "FDRLFEAT";
constexpr char kFactorMagic[9] = "FDRLFACT";
constexpr std::uint32_t kFeatureVersion = 1;

std::string manifest_path(const std::string& path) { return path + ".manifest"; }
std::string factors_path(const std::string& path) { return path + ".factors"; }

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

void check_record_finite(const FeatureRecord& rec, std::size_t index) {
  if (!rec.h_a.allFinite() || !rec.h_t.allFinite())
    throw ValidationError("record " + std::to_string(index) + " contains a non-finite value");
}

}  // namespace

int DatasetManifest::fold_count() const {
  int k = 0;
  for (int f : folds) k = std::max(k, f);
  return k;
}

void DatasetManifest::validate() const {
  if (d_in < 1) throw ValidationError("manifest: d_in must be >= 1");
  if (classes < 1) throw ValidationError("manifest: class count must be >= 1");
  if (folds.size() != count)
    throw ValidationError("manifest: " + std::to_string(folds.size()) + " fold entries for " +
                          std::to_string(count) + " records");
  const int k = fold_count();
  std::vector<bool> seen(static_cast<std::size_t>(k) + 1, false);
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] < 1)
      throw ValidationError("manifest: fold index " + std::to_string(folds[i]) + " at record " +
                            std::to_string(i) + " is not >= 1");
    seen[static_cast<std::size_t>(folds[i])] = true;
  }
  for (int f = 1; f <= k; ++f)
    if (!seen[static_cast<std::size_t>(f)])
      throw ValidationError("manifest: fold " + std::to_string(f) + " has no records");
  if (!class_names.empty() && static_cast<int>(class_names.size()) != classes)
    throw ValidationError("manifest: " + std::to_string(class_names.size()) +
                          " class names for " + std::to_string(classes) + " classes");
}

void SynthSpec::validate() const {
  if (feature_dim < 1 || shared_dim < 1 || private_dim_a < 1 || private_dim_t < 1)
    throw ConfigError("synth: dims must be >= 1");
  if (classes < 1) throw ConfigError("synth: classes must be >= 1");
  if (shared_dim < classes)
    throw ConfigError("synth: shared_dim must be >= classes to separate class means");
  if (samples < 1) throw ConfigError("synth: samples must be >= 1");
  if (folds < 1) throw ConfigError("synth: folds must be >= 1");
  if (noise_scale < 0) throw ConfigError("synth: noise_scale must be >= 0");
}

namespace {

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << "d_in = " << m.d_in << "\n";
  os << "classes = " << m.classes << "\n";
  os << "count = " << m.count << "\n";
  std::string names;
  for (std::size_t i = 0; i < m.class_names.size(); ++i)
    names += (i ? "," : "") + m.class_names[i];
  os << "class_names = " << names << "\n";
  os << "provenance = " << m.provenance << "\n";
  os << "folds = ";
  for (std::size_t i = 0; i < m.folds.size(); ++i) os << (i ? "," : "") << m.folds[i];
  os << "\n";
  if (!os) throw IoError("failed while writing " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  DatasetManifest m;
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    };
    trim(key);
    trim(val);
    if (key == "d_in") m.d_in = std::stoi(val);
    else if (key == "classes") m.classes = std::stoi(val);
    else if (key == "count") m.count = static_cast<std::size_t>(std::stoull(val));
    else if (key == "provenance") m.provenance = val;
    else if (key == "class_names") {
      if (!val.empty()) m.class_names = split_csv(val);
    } else if (key == "folds") {
      for (const std::string& tok : split_csv(val))
        if (!tok.empty()) m.folds.push_back(std::stoi(tok));
    }
  }
  return m;
}

void write_factors(const std::string& path, const GroundTruthFactors& f) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  binio::put_magic(os, kFactorMagic);
  binio::put_u32(os, kFeatureVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(f.z_shared.cols()));
  binio::put_u32(os, static_cast<std::uint32_t>(f.z_private_a.cols()));
  binio::put_u32(os, static_cast<std::uint32_t>(f.z_private_t.cols()));
  binio::put_u64(os, static_cast<std::uint64_t>(f.z_shared.rows()));
  for (Eigen::Index r = 0; r < f.z_shared.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.z_shared.cols(); ++c) binio::put_f64(os, f.z_shared(r, c));
    for (Eigen::Index c = 0; c < f.z_private_a.cols(); ++c) binio::put_f64(os, f.z_private_a(r, c));
    for (Eigen::Index c = 0; c < f.z_private_t.cols(); ++c) binio::put_f64(os, f.z_private_t(r, c));
  }
  if (!os) throw IoError("failed while writing " + path);
}

GroundTruthFactors read_factors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  binio::check_magic(is, kFactorMagic, "factors");
  std::uint32_t version = binio::get_u32(is, "factors version");
  if (version != kFeatureVersion)
    throw ValidationError("factors: unsupported version " + std::to_string(version));
  const auto sd = binio::get_u32(is, "shared dim");
  const auto pa = binio::get_u32(is, "private dim a");
  const auto pt = binio::get_u32(is, "private dim t");
  const auto n = binio::get_u64(is, "count");
  GroundTruthFactors f;
  f.z_shared.resize(static_cast<Eigen::Index>(n), sd);
  f.z_private_a.resize(static_cast<Eigen::Index>(n), pa);
  f.z_private_t.resize(static_cast<Eigen::Index>(n), pt);
  for (std::uint64_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < sd; ++c)
      f.z_shared(static_cast<Eigen::Index>(r), c) = binio::get_f64(is, "factor value");
    for (std::uint32_t c = 0; c < pa; ++c)
      f.z_private_a(static_cast<Eigen::Index>(r), c) = binio::get_f64(is, "factor value");
    for (std::uint32_t c = 0; c < pt; ++c)
      f.z_private_t(static_cast<Eigen::Index>(r), c) = binio::get_f64(is, "factor value");
  }
  return f;
}

}  // namespace

void save_features(const std::string& path, const Dataset& ds) {
  ds.manifest.validate();
  if (ds.records.size() != ds.manifest.count)
    throw ValidationError("save_features: record count does not match manifest");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  binio::put_magic(os, kFeatureMagic);
  binio::put_u32(os, kFeatureVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(ds.manifest.d_in));
  binio::put_u32(os, static_cast<std::uint32_t>(ds.manifest.classes));
  binio::put_u64(os, ds.records.size());
  for (const FeatureRecord& rec : ds.records) {
    for (Eigen::Index i = 0; i < rec.h_a.size(); ++i) binio::put_f64(os, rec.h_a(i));
    for (Eigen::Index i = 0; i < rec.h_t.size(); ++i) binio::put_f64(os, rec.h_t(i));
    binio::put_u32(os, static_cast<std::uint32_t>(rec.label));
  }
  if (!os) throw IoError("failed while writing " + path);
  write_manifest(manifest_path(path), ds.manifest);
  if (ds.truth) write_factors(factors_path(path), *ds.truth);
}

namespace {

Dataset load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  binio::check_magic(is, kFeatureMagic, "features");
  std::uint32_t version = binio::get_u32(is, "feature version");
  if (version != kFeatureVersion)
    throw ValidationError("features: unsupported version " + std::to_string(version));
  const int d_in = static_cast<int>(binio::get_u32(is, "d_in"));
  const int classes = static_cast<int>(binio::get_u32(is, "classes"));
  const std::uint64_t count = binio::get_u64(is, "count");
  if (d_in < 1 || classes < 1) throw ValidationError("features: corrupt header dims");

  Dataset ds;
  ds.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord rec;
    rec.h_a.resize(d_in);
    rec.h_t.resize(d_in);
    const std::string at = "record " + std::to_string(i);
    for (int c = 0; c < d_in; ++c) rec.h_a(c) = binio::get_f64(is, at);
    for (int c = 0; c < d_in; ++c) rec.h_t(c) = binio::get_f64(is, at);
    rec.label = static_cast<int>(binio::get_u32(is, at + " label"));
    if (rec.label < 0 || rec.label >= classes)
      throw ValidationError("record " + std::to_string(i) + ": label " +
                            std::to_string(rec.label) + " outside [0, " +
                            std::to_string(classes) + ")");
    check_record_finite(rec, i);
    ds.records.push_back(std::move(rec));
  }

  ds.manifest.d_in = d_in;
  ds.manifest.classes = classes;
  ds.manifest.count = ds.records.size();
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(is, header)) throw ValidationError("csv: empty file " + path);
  std::vector<std::string> cols = split_csv(header);
  int d_in = 0;
  for (const std::string& c : cols)
    if (c.rfind("ha_", 0) == 0) ++d_in;
  if (d_in == 0 || static_cast<int>(cols.size()) != 2 * d_in + 1 || cols.back() != "label")
    throw ValidationError("csv: header must be ha_0..ha_{d-1},ht_0..ht_{d-1},label");

  Dataset ds;
  std::string line;
  std::size_t index = 0;
  int max_label = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> toks = split_csv(line);
    if (static_cast<int>(toks.size()) != 2 * d_in + 1)
      throw ValidationError("record " + std::to_string(index) + ": expected " +
                            std::to_string(2 * d_in + 1) + " fields, got " +
                            std::to_string(toks.size()));
    FeatureRecord rec;
    rec.h_a.resize(d_in);
    rec.h_t.resize(d_in);
    try {
      for (int c = 0; c < d_in; ++c) rec.h_a(c) = std::stod(toks[static_cast<std::size_t>(c)]);
      for (int c = 0; c < d_in; ++c)
        rec.h_t(c) = std::stod(toks[static_cast<std::size_t>(d_in + c)]);
      rec.label = std::stoi(toks.back());
    } catch (const std::exception&) {
      throw ValidationError("record " + std::to_string(index) + ": unparsable number");
    }
    if (rec.label < 0)
      throw ValidationError("record " + std::to_string(index) + ": negative label");
    check_record_finite(rec, index);
    max_label = std::max(max_label, rec.label);
    ds.records.push_back(std::move(rec));
    ++index;
  }
  ds.manifest.d_in = d_in;
  ds.manifest.classes = max_label + 1;
  ds.manifest.count = ds.records.size();
  return ds;
}

}  // namespace

Dataset load_features(const std::string& path) {
  Dataset ds = ends_with(path, ".csv") ? load_csv(path) : load_binary(path);

  std::ifstream probe(manifest_path(path));
  if (probe.good()) {
    DatasetManifest m = read_manifest(manifest_path(path));
    if (m.d_in != ds.manifest.d_in)
      throw ValidationError("manifest d_in " + std::to_string(m.d_in) +
                            " does not match file d_in " + std::to_string(ds.manifest.d_in));
    if (m.count != ds.manifest.count)
      throw ValidationError("manifest count " + std::to_string(m.count) +
                            " does not match file count " + std::to_string(ds.manifest.count));
    if (m.classes < ds.manifest.classes)
      throw ValidationError("manifest classes " + std::to_string(m.classes) +
                            " below the file's label range");
    ds.manifest = std::move(m);
  } else {
    // no sidecar: default round-robin folds over five splits
    ds.manifest.folds.resize(ds.manifest.count);
    for (std::size_t i = 0; i < ds.manifest.count; ++i)
      ds.manifest.folds[i] = static_cast<int>(i % 5) + 1;
    if (ds.manifest.count < 5)
      for (std::size_t i = 0; i < ds.manifest.count; ++i) ds.manifest.folds[i] = 1;
  }
  if (ds.manifest.class_names.empty()) {
    for (int c = 0; c < ds.manifest.classes; ++c)
      ds.manifest.class_names.push_back("c" + std::to_string(c));
  }
  ds.manifest.validate();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].label >= ds.manifest.classes)
      throw ValidationError("record " + std::to_string(i) + ": label outside manifest classes");
  }

  std::ifstream fprobe(factors_path(path), std::ios::binary);
  if (fprobe.good()) {
    GroundTruthFactors f = read_factors(factors_path(path));
    if (static_cast<std::size_t>(f.z_shared.rows()) != ds.manifest.count)
      throw ValidationError("factors count does not match feature count");
    ds.truth = std::move(f);
  }
  return ds;
}

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng map_rng(spec.map_seed);

  // Fixed latent-to-feature maps, scaled so feature variance stays O(1).
  auto make_map = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    map_rng.fill_normal(m);
    return Eigen::MatrixXd(m / std::sqrt(static_cast<double>(cols)));
  };
  Eigen::MatrixXd A_s = make_map(spec.feature_dim, spec.shared_dim);
  Eigen::MatrixXd A_p = make_map(spec.feature_dim, spec.private_dim_a);
  Eigen::MatrixXd B_s = make_map(spec.feature_dim, spec.shared_dim);
  Eigen::MatrixXd B_p = make_map(spec.feature_dim, spec.private_dim_t);

  // Orthonormal class directions keep the means evenly separated.
  Eigen::MatrixXd basis(spec.shared_dim, spec.shared_dim);
  map_rng.fill_normal(basis);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd class_means(spec.shared_dim, spec.classes);
  for (int c = 0; c < spec.classes; ++c) class_means.col(c) = spec.separation * q.col(c);

  // Modality-dependent means for the private factors.
  const double kPrivateOffset = 1.5;
  Eigen::VectorXd mean_a = Eigen::VectorXd::Constant(spec.private_dim_a, kPrivateOffset);
  Eigen::VectorXd mean_t = Eigen::VectorXd::Constant(spec.private_dim_t, -kPrivateOffset);

  Rng rng(seed);
  Dataset ds;
  const Eigen::Index n = static_cast<Eigen::Index>(spec.samples);
  GroundTruthFactors truth;
  truth.z_shared.resize(n, spec.shared_dim);
  truth.z_private_a.resize(n, spec.private_dim_a);
  truth.z_private_t.resize(n, spec.private_dim_t);
  ds.records.reserve(spec.samples);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.integer(static_cast<std::uint64_t>(spec.classes)));
    Eigen::MatrixXd zs(spec.shared_dim, 1), za(spec.private_dim_a, 1), zt(spec.private_dim_t, 1);
    rng.fill_normal(zs);
    rng.fill_normal(za);
    rng.fill_normal(zt);
    zs.col(0) += class_means.col(label);
    za.col(0) += mean_a;
    zt.col(0) += mean_t;
    Eigen::MatrixXd na(spec.feature_dim, 1), nt(spec.feature_dim, 1);
    rng.fill_normal(na);
    rng.fill_normal(nt);

    FeatureRecord rec;
    rec.h_a = A_s * zs.col(0) + A_p * za.col(0) + spec.noise_scale * na.col(0);
    rec.h_t = B_s * zs.col(0) + B_p * zt.col(0) + spec.noise_scale * nt.col(0);
    rec.label = label;
    ds.records.push_back(std::move(rec));
    truth.z_shared.row(i) = zs.col(0).transpose();
    truth.z_private_a.row(i) = za.col(0).transpose();
    truth.z_private_t.row(i) = zt.col(0).transpose();
  }

  ds.manifest.d_in = spec.feature_dim;
  ds.manifest.classes = spec.classes;
  ds.manifest.count = spec.samples;
  for (int c = 0; c < spec.classes; ++c) ds.manifest.class_names.push_back("c" + std::to_string(c));
  ds.manifest.folds.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i)
    ds.manifest.folds[i] = static_cast<int>(i % static_cast<std::size_t>(spec.folds)) + 1;
  std::ostringstream prov;
  prov << "synthetic feature_dim=" << spec.feature_dim << " shared_dim=" << spec.shared_dim
       << " private_dim_a=" << spec.private_dim_a << " private_dim_t=" << spec.private_dim_t
       << " classes=" << spec.classes << " separation=" << spec.separation
       << " noise_scale=" << spec.noise_scale << " map_seed=" << spec.map_seed
       << " samples=" << spec.samples << " folds=" << spec.folds << " seed=" << seed;
  ds.manifest.provenance = prov.str();
  ds.truth = std::move(truth);
  ds.manifest.validate();
  return ds;
}

FoldSplit kfold_split(const Dataset& ds, int fold) {
  const int k = ds.manifest.fold_count();
  if (fold < 1 || fold > k)
    throw ConfigError("fold " + std::to_string(fold) + " outside 1.." + std::to_string(k));
  FoldSplit split;
  for (std::size_t i = 0; i < ds.manifest.folds.size(); ++i) {
    (ds.manifest.folds[i] == fold ? split.test_indices : split.train_indices)
        .push_back(static_cast<int>(i));
  }
  if (split.train_indices.empty() || split.test_indices.empty())
    throw ConfigError("fold " + std::to_string(fold) + " yields an empty split");
  return split;
}

std::vector<std::vector<int>> train_batches(const FoldSplit& split, int batch_size,
                                            std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<int> order = split.train_indices;
  // one deterministic stream per (seed, epoch)
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch) + 1);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.integer(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<int>> batches;
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

void gather_batch(const Dataset& ds, const std::vector<int>& indices, Eigen::MatrixXd& H_a,
                  Eigen::MatrixXd& H_t, std::vector<int>& labels) {
  const Eigen::Index b = static_cast<Eigen::Index>(indices.size());
  H_a.resize(b, ds.manifest.d_in);
  H_t.resize(b, ds.manifest.d_in);
  labels.resize(indices.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const FeatureRecord& rec = ds.records[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
    H_a.row(i) = rec.h_a.transpose();
    H_t.row(i) = rec.h_t.transpose();
    labels[static_cast<std::size_t>(i)] = rec.label;
  }
}

}  // namespace fdrl
