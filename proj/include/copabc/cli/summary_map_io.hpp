#pragma once

#include "copabc/cli/config.hpp"
#include "copabc/core/io.hpp"
#include "copabc/core/summary_map.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace copabc::cli {

// Summary-map text format, all indices 1-based:
//   i: k1 k2 ...      summaries informative for parameter i
//   i,j: k1 k2 ...    explicit pair subset (otherwise the union)
// Blank lines and lines starting with '#' are ignored.

inline void write_summary_map(std::ostream& out, const SummaryMap& smap) {
  for (std::size_t i = 0; i < smap.param_dim(); ++i) {
    out << i + 1 << ':';
    for (std::size_t k : smap.univariate(i)) out << ' ' << k + 1;
    out << '\n';
  }
  for (const auto& [key, subset] : smap.overrides()) {
    out << key.first + 1 << ',' << key.second + 1 << ':';
    for (std::size_t k : subset) out << ' ' << k + 1;
    out << '\n';
  }
}

inline SummaryMap parse_summary_map(std::istream& in, const std::string& source, std::size_t p, std::size_t q) {
  std::vector<std::optional<IndexSet>> uni(p);
  std::map<std::pair<std::size_t, std::size_t>, IndexSet> pairs;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> config_error {
    return config_error(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto index = [&](const std::string& text, std::size_t limit, const char* what) {
    std::size_t v = 0;
    const std::string t = io::trim(text);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || v < 1 || v > limit)
      throw fail(std::string(what) + " index '" + t + "' must be an integer in 1.." + std::to_string(limit));
    return v - 1;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = io::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw fail("expected 'i: k1 k2 ...' or 'i,j: k1 k2 ...'");
    IndexSet subset;
    std::istringstream rest(t.substr(colon + 1));
    std::string tok;
    while (rest >> tok) subset.push_back(index(tok, q, "summary"));
    if (subset.empty()) throw fail("empty summary list");
    const std::vector<std::string> head = io::split(t.substr(0, colon), ',');
    if (head.size() == 1) {
      const std::size_t i = index(head[0], p, "parameter");
      if (uni[i]) throw fail("parameter " + std::to_string(i + 1) + " listed twice");
      uni[i] = std::move(subset);
    } else if (head.size() == 2) {
      const std::size_t i = index(head[0], p, "parameter"), j = index(head[1], p, "parameter");
      if (i == j) throw fail("pair needs two distinct parameters");
      pairs[{std::min(i, j), std::max(i, j)}] = std::move(subset);
    } else {
      throw fail("expected one parameter index or a pair before ':'");
    }
  }
  std::vector<IndexSet> out;
  for (std::size_t i = 0; i < p; ++i) {
    if (!uni[i]) throw config_error(source + ": no summary-map entry for parameter " + std::to_string(i + 1));
    out.push_back(std::move(*uni[i]));
  }
  return SummaryMap(q, std::move(out), std::move(pairs));
}

inline SummaryMap load_summary_map(const std::string& path, std::size_t p, std::size_t q) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open summary-map file " + path);
  return parse_summary_map(in, path, p, q);
}

}  // namespace copabc::cli
