#pragma once

#include "copabc/abc/reference_table.hpp"
#include "copabc/core/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace copabc {

// Binary cache layout (little-endian):
//   magic "CPABCREF", u32 version, u64 N, u64 p, u64 q, u64 seed,
//   u32 id length, id bytes, then N rows of (theta_1..theta_p, s_1..s_q, ratio) as f64.
inline constexpr char kTableMagic[8] = {'C', 'P', 'A', 'B', 'C', 'R', 'E', 'F'};
inline constexpr std::uint32_t kTableVersion = 1;

inline void save_reference_table(const ReferenceTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kTableMagic, sizeof kTableMagic);
  io::write_pod(out, kTableVersion);
  io::write_pod(out, static_cast<std::uint64_t>(table.size()));
  io::write_pod(out, static_cast<std::uint64_t>(table.param_dim()));
  io::write_pod(out, static_cast<std::uint64_t>(table.summary_dim()));
  io::write_pod(out, table.seed());
  io::write_string(out, table.model_id());
  const Index p = table.param_dim();
  const Index q = table.summary_dim();
  std::vector<double> row(static_cast<std::size_t>(p + q + 1));
  for (Index r = 0; r < table.size(); ++r) {
    for (Index c = 0; c < p; ++c) row[c] = table.params()(r, c);
    for (Index c = 0; c < q; ++c) row[p + c] = table.summaries()(r, c);
    row[p + q] = table.ratios()(r);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline ReferenceTable load_reference_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kTableMagic, sizeof magic) != 0)
    throw std::runtime_error(path + ": not a reference-table file");
  const auto version = io::read_pod<std::uint32_t>(in);
  if (version != kTableVersion) throw std::runtime_error(path + ": unsupported table version");
  const auto n = static_cast<Index>(io::read_pod<std::uint64_t>(in));
  const auto p = static_cast<Index>(io::read_pod<std::uint64_t>(in));
  const auto q = static_cast<Index>(io::read_pod<std::uint64_t>(in));
  const auto seed = io::read_pod<std::uint64_t>(in);
  std::string id = io::read_string(in);
  Eigen::MatrixXd params(n, p);
  Eigen::MatrixXd summaries(n, q);
  Eigen::VectorXd ratios(n);
  std::vector<double> row(static_cast<std::size_t>(p + q + 1));
  for (Index r = 0; r < n; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated table");
    for (Index c = 0; c < p; ++c) params(r, c) = row[c];
    for (Index c = 0; c < q; ++c) summaries(r, c) = row[p + c];
    ratios(r) = row[p + q];
  }
  return ReferenceTable(std::move(params), std::move(summaries), std::move(ratios), seed, std::move(id));
}

/// CSV with header theta_1..theta_p, s_1..s_q, ratio. Values use the shortest
/// round-tripping representation, so import(export(t)) reproduces t exactly.
inline void export_reference_table_csv(const ReferenceTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const Index p = table.param_dim();
  const Index q = table.summary_dim();
  for (Index c = 0; c < p; ++c) out << "theta_" << c + 1 << ',';
  for (Index c = 0; c < q; ++c) out << "s_" << c + 1 << ',';
  out << "ratio\n";
  for (Index r = 0; r < table.size(); ++r) {
    for (Index c = 0; c < p; ++c) out << io::format_double(table.params()(r, c)) << ',';
    for (Index c = 0; c < q; ++c) out << io::format_double(table.summaries()(r, c)) << ',';
    out << io::format_double(table.ratios()(r)) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

/// Reads a table CSV. `expected_p`/`expected_q`, when nonzero, must match the
/// header. A missing ratio column means prior-as-importance (ratio 1).
inline ReferenceTable import_reference_table_csv(const std::string& path, std::size_t expected_p = 0,
                                                 std::size_t expected_q = 0, std::uint64_t seed = 0,
                                                 std::string model_id = "csv") {
  const io::CsvTable csv = io::read_csv(path);
  std::vector<std::size_t> theta_cols, s_cols;
  std::optional<std::size_t> ratio_col;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    const std::string& h = csv.header[c];
    if (h.rfind("theta_", 0) == 0) {
      if (std::stoul(h.substr(6)) != theta_cols.size() + 1)
        throw std::invalid_argument(path + ": theta columns must be theta_1..theta_p in order");
      theta_cols.push_back(c);
    } else if (h.rfind("s_", 0) == 0) {
      if (std::stoul(h.substr(2)) != s_cols.size() + 1)
        throw std::invalid_argument(path + ": summary columns must be s_1..s_q in order");
      s_cols.push_back(c);
    } else if (h == "ratio") {
      ratio_col = c;
    } else {
      throw std::invalid_argument(path + ": unexpected column '" + h + "'");
    }
  }
  if (theta_cols.empty() || s_cols.empty()) throw std::invalid_argument(path + ": need theta_* and s_* columns");
  if (expected_p && theta_cols.size() != expected_p)
    throw std::invalid_argument(path + ": expected " + std::to_string(expected_p) + " theta columns, found " +
                                std::to_string(theta_cols.size()));
  if (expected_q && s_cols.size() != expected_q)
    throw std::invalid_argument(path + ": expected " + std::to_string(expected_q) + " summary columns, found " +
                                std::to_string(s_cols.size()));
  const auto n = static_cast<Index>(csv.rows.size());
  if (n == 0) throw std::invalid_argument(path + ": no data rows");
  Eigen::MatrixXd params(n, static_cast<Index>(theta_cols.size()));
  Eigen::MatrixXd summaries(n, static_cast<Index>(s_cols.size()));
  Eigen::VectorXd ratios = Eigen::VectorXd::Ones(n);
  for (Index r = 0; r < n; ++r) {
    const auto& row = csv.rows[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < theta_cols.size(); ++c) params(r, static_cast<Index>(c)) = row[theta_cols[c]];
    for (std::size_t c = 0; c < s_cols.size(); ++c) summaries(r, static_cast<Index>(c)) = row[s_cols[c]];
    if (ratio_col) ratios(r) = row[*ratio_col];
  }
  return ReferenceTable(std::move(params), std::move(summaries), std::move(ratios), seed, std::move(model_id));
}

}  // namespace copabc
