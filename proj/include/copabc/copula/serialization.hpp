#pragma once

#include "copabc/copula/meta_gaussian.hpp"
#include "copabc/core/io.hpp"

#include <cstring>
#include <fstream>
#include <string>

namespace copabc {

// Layout (little-endian): magic "CPABCCOP", u32 version, u64 p; per marginal
// u64 n, u8 equal_weights, f64 bandwidth, n sorted values, n weights; then
// Lambda row-major; then the repair log.
inline constexpr char kCopulaMagic[8] = {'C', 'P', 'A', 'B', 'C', 'C', 'O', 'P'};
inline constexpr std::uint32_t kCopulaVersion = 1;

inline void write_copula(std::ostream& out, const CopulaPosterior& post) {
  out.write(kCopulaMagic, sizeof kCopulaMagic);
  io::write_pod(out, kCopulaVersion);
  io::write_pod(out, static_cast<std::uint64_t>(post.dim()));
  for (const MarginalEstimate& m : post.marginals()) {
    io::write_pod(out, static_cast<std::uint64_t>(m.size()));
    io::write_pod(out, static_cast<std::uint8_t>(m.equal_weights()));
    io::write_pod(out, m.bandwidth());
    out.write(reinterpret_cast<const char*>(m.sorted_sample().data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(m.weights().data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  const auto& c = post.correlation();
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) io::write_pod(out, c(i, j));
  const RepairLog& log = post.repair_log();
  io::write_pod(out, static_cast<std::uint8_t>(log.repaired));
  io::write_pod(out, log.eigenvalue_floor);
  io::write_pod(out, log.min_eigenvalue_before);
  io::write_pod(out, log.min_eigenvalue_after);
  io::write_pod(out, log.max_abs_change);
  io::write_pod(out, static_cast<std::int32_t>(log.iterations));
}

inline CopulaPosterior read_copula(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCopulaMagic, sizeof magic) != 0)
    throw std::runtime_error("not a copula posterior file");
  if (io::read_pod<std::uint32_t>(in) != kCopulaVersion) throw std::runtime_error("unsupported copula file version");
  const auto p = io::read_pod<std::uint64_t>(in);
  std::vector<MarginalEstimate> marginals;
  marginals.reserve(p);
  for (std::uint64_t i = 0; i < p; ++i) {
    const auto n = io::read_pod<std::uint64_t>(in);
    const bool equal = io::read_pod<std::uint8_t>(in) != 0;
    const double bw = io::read_pod<double>(in);
    std::vector<double> sorted(n), weights(n);
    in.read(reinterpret_cast<char*>(sorted.data()), static_cast<std::streamsize>(n * sizeof(double)));
    in.read(reinterpret_cast<char*>(weights.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("truncated copula file");
    marginals.push_back(MarginalEstimate::from_parts(std::move(sorted), std::move(weights), equal, bw));
  }
  Eigen::MatrixXd c(static_cast<Index>(p), static_cast<Index>(p));
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) c(i, j) = io::read_pod<double>(in);
  RepairLog log;
  log.repaired = io::read_pod<std::uint8_t>(in) != 0;
  log.eigenvalue_floor = io::read_pod<double>(in);
  log.min_eigenvalue_before = io::read_pod<double>(in);
  log.min_eigenvalue_after = io::read_pod<double>(in);
  log.max_abs_change = io::read_pod<double>(in);
  log.iterations = io::read_pod<std::int32_t>(in);
  return CopulaPosterior(std::move(marginals), std::move(c), log);
}

inline void save_copula(const CopulaPosterior& post, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_copula(out, post);
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline CopulaPosterior load_copula(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_copula(in);
}

}  // namespace copabc
