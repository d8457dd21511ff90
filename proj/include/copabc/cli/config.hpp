#pragma once

#include "copabc/core/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace copabc::cli {

// Invalid or unreadable configuration; maps to exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat INI-style configuration: `[section]` headers, `key = value` lines,
/// `#` or `;` comments. Getters record the effective value (default or
/// given) so the resolved configuration can be echoed back, and `finish`
/// rejects keys no command consumed.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& source) {
    Config c;
    c.source_ = source;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = io::trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw config_error(c.where(line_no) + "unterminated section header");
        section = io::trim(std::string_view(t).substr(1, t.size() - 2));
        if (section.empty()) throw config_error(c.where(line_no) + "empty section name");
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw config_error(c.where(line_no) + "expected 'key = value'");
      if (section.empty()) throw config_error(c.where(line_no) + "key outside of any [section]");
      const std::string key = io::trim(std::string_view(t).substr(0, eq));
      if (key.empty()) throw config_error(c.where(line_no) + "empty key");
      auto& sec = c.entries_[section];
      if (sec.count(key)) throw config_error(c.where(line_no) + "duplicate key '" + key + "' in [" + section + "]");
      sec[key] = Entry{io::trim(std::string_view(t).substr(eq + 1)), line_no, false};
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = entries_.find(section);
    return s != entries_.end() && s->second.count(key);
  }

  /// Overrides (or adds) a value, as command-line flags do.
  void set(const std::string& section, const std::string& key, const std::string& value) {
    entries_[section][key] = Entry{value, 0, false};
  }

  std::string get_string(const std::string& section, const std::string& key, const std::string& def) {
    const Entry* e = lookup(section, key);
    const std::string v = e ? e->value : def;
    record(section, key, v);
    return v;
  }

  double get_double(const std::string& section, const std::string& key, double def) {
    const Entry* e = lookup(section, key);
    double v = def;
    if (e) {
      const auto parsed = io::parse_double(e->value);
      if (!parsed) throw config_error(where(*e) + section + "." + key + ": '" + e->value + "' is not a number");
      v = *parsed;
    }
    record(section, key, io::format_double(v));
    return v;
  }

  std::uint64_t get_uint(const std::string& section, const std::string& key, std::uint64_t def) {
    const Entry* e = lookup(section, key);
    std::uint64_t v = def;
    if (e) v = parse_uint(e->value, *e, section + "." + key);
    record(section, key, std::to_string(v));
    return v;
  }

  bool get_bool(const std::string& section, const std::string& key, bool def) {
    const Entry* e = lookup(section, key);
    bool v = def;
    if (e) {
      if (e->value == "true" || e->value == "1" || e->value == "yes") {
        v = true;
      } else if (e->value == "false" || e->value == "0" || e->value == "no") {
        v = false;
      } else {
        throw config_error(where(*e) + section + "." + key + ": '" + e->value + "' is not a boolean");
      }
    }
    record(section, key, v ? "true" : "false");
    return v;
  }

  std::vector<double> get_doubles(const std::string& section, const std::string& key, const std::vector<double>& def) {
    const Entry* e = lookup(section, key);
    std::vector<double> v = def;
    if (e) {
      v.clear();
      for (const std::string& f : list_fields(e->value)) {
        const auto parsed = io::parse_double(f);
        if (!parsed) throw config_error(where(*e) + section + "." + key + ": '" + f + "' is not a number");
        v.push_back(*parsed);
      }
    }
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + io::format_double(x);
    record(section, key, s);
    return v;
  }

  std::vector<std::uint64_t> get_uints(const std::string& section, const std::string& key,
                                       const std::vector<std::uint64_t>& def) {
    const Entry* e = lookup(section, key);
    std::vector<std::uint64_t> v = def;
    if (e) {
      v.clear();
      for (const std::string& f : list_fields(e->value)) v.push_back(parse_uint(f, *e, section + "." + key));
    }
    std::string s;
    for (std::uint64_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    record(section, key, s);
    return v;
  }

  std::vector<std::string> get_strings(const std::string& section, const std::string& key,
                                       const std::vector<std::string>& def) {
    const Entry* e = lookup(section, key);
    const std::vector<std::string> v = e ? list_fields(e->value) : def;
    std::string s;
    for (const std::string& x : v) s += (s.empty() ? "" : ",") + x;
    record(section, key, s);
    return v;
  }

  /// Error prefix for a value that parsed but is out of range.
  std::string where(const std::string& section, const std::string& key) const {
    const Entry* e = lookup(section, key);
    return (e ? where(*e) : source_ + ": ") + section + "." + key + ": ";
  }

  /// Throws for any key in `sections` (or any other section) that was never read.
  void finish(const std::vector<std::string>& sections) const {
    for (const auto& [name, sec] : entries_) {
      const bool known = std::find(sections.begin(), sections.end(), name) != sections.end();
      for (const auto& [key, e] : sec) {
        if (!known) throw config_error(where(e) + "section [" + name + "] is not used by this command");
        if (!e.used) throw config_error(where(e) + "unknown key '" + key + "' in [" + name + "]");
      }
    }
  }

  /// The resolved configuration, in the order values were read.
  std::string echo() const {
    std::vector<std::string> order;
    for (const auto& [section, key, value] : effective_)
      if (std::find(order.begin(), order.end(), section) == order.end()) order.push_back(section);
    std::ostringstream out;
    for (std::size_t k = 0; k < order.size(); ++k) {
      out << (k ? "\n" : "") << '[' << order[k] << "]\n";
      for (const auto& [section, key, value] : effective_)
        if (section == order[k]) out << key << " = " << value << '\n';
    }
    return out.str();
  }

  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    mutable bool used = false;
  };

  std::string where(std::size_t line) const { return source_ + ":" + std::to_string(line) + ": "; }
  std::string where(const Entry& e) const { return e.line ? where(e.line) : std::string("command line: "); }

  const Entry* lookup(const std::string& section, const std::string& key) const {
    auto s = entries_.find(section);
    if (s == entries_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  void record(const std::string& section, const std::string& key, const std::string& value) {
    for (auto& [s, k, v] : effective_)
      if (s == section && k == key) {
        v = value;
        return;
      }
    effective_.push_back({section, key, value});
  }

  std::uint64_t parse_uint(const std::string& text, const Entry& e, const std::string& name) const {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
      throw config_error(where(e) + name + ": '" + text + "' is not a non-negative integer");
    return v;
  }

  static std::vector<std::string> list_fields(const std::string& value) {
    std::vector<std::string> out;
    if (io::trim(value).empty()) return out;
    for (const std::string& f : io::split(value, ',')) out.push_back(io::trim(f));
    return out;
  }

  std::string source_ = "config";
  std::map<std::string, std::map<std::string, Entry>> entries_;
  std::vector<std::tuple<std::string, std::string, std::string>> effective_;
};

}  // namespace copabc::cli
