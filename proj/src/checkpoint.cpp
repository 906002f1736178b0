#include "fdrl/checkpoint.hpp"

#include <fstream>

#include "fdrl/binio.hpp"

namespace fdrl {

namespace {
constexpr char kMagic[9] = "FDRLCKPT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

const Eigen::MatrixXd* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return &m;
  return nullptr;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  binio::put_magic(os, kMagic);
  binio::put_u32(os, kVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(data.config_echo.size()));
  os.write(data.config_echo.data(), static_cast<std::streamsize>(data.config_echo.size()));
  binio::put_u64(os, data.tensors.size());
  for (const auto& [name, m] : data.tensors) {
    binio::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put_u64(os, static_cast<std::uint64_t>(m.rows()));
    binio::put_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) binio::put_f64(os, m(r, c));
  }
  if (!os) throw IoError("failed while writing " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  binio::check_magic(is, kMagic, "checkpoint");
  const std::uint32_t version = binio::get_u32(is, "checkpoint version");
  if (version != kVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  CheckpointData data;
  const std::uint32_t echo_len = binio::get_u32(is, "config echo length");
  data.config_echo.resize(echo_len);
  if (echo_len > 0 && !is.read(data.config_echo.data(), echo_len))
    throw ValidationError("checkpoint: truncated config echo");
  const std::uint64_t count = binio::get_u64(is, "tensor count");
  data.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = binio::get_u32(is, "tensor name length");
    std::string name(name_len, '\0');
    if (name_len > 0 && !is.read(name.data(), name_len))
      throw ValidationError("checkpoint: truncated tensor name");
    const auto rows = static_cast<Eigen::Index>(binio::get_u64(is, name + " rows"));
    const auto cols = static_cast<Eigen::Index>(binio::get_u64(is, name + " cols"));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = binio::get_f64(is, name + " value");
    data.tensors.emplace_back(std::move(name), std::move(m));
  }
  return data;
}

}  // namespace fdrl
