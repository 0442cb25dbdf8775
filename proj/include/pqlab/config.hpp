#pragma once

// Flat key = value experiment configs, CSV tables, and an ordered parallel map.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace pqlab {

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Keys are normalized so that "lambda-list" and "lambda_list" coincide.
inline std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

class Config {
 public:
  /// Lines "key = value"; '#' starts a comment; blank lines are skipped.
  static Config parse(std::istream& in, const std::string& source = "config") {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = normalize_key(trim(t.substr(0, eq)));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
      c.values_[key] = trim(t.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[normalize_key(key)] = value; }
  bool has(const std::string& key) const { return values_.count(normalize_key(key)) > 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto it = find(key);
    return it ? *it : fallback;
  }

  double number(const std::string& key, double fallback) const {
    const auto it = find(key);
    return it ? to_number(key, *it) : fallback;
  }

  int integer(const std::string& key, int fallback) const {
    const double v = number(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer");
    return static_cast<int>(v);
  }

  /// Comma-separated numbers.
  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const {
    const auto it = find(key);
    if (!it) return fallback;
    std::vector<double> out;
    for (const std::string& item : split(*it, ',')) out.push_back(to_number(key, item));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }

  /// Comma-separated groups of colon-separated numbers, e.g. "2:2.4, 1.8:2.2".
  std::vector<std::vector<double>> tuples(const std::string& key, const std::vector<std::vector<double>>& fallback) const {
    const auto it = find(key);
    if (!it) return fallback;
    std::vector<std::vector<double>> out;
    for (const std::string& group : split(*it, ',')) {
      std::vector<double> t;
      for (const std::string& item : split(group, ':')) t.push_back(to_number(key, item));
      out.push_back(std::move(t));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }

  /// Keys present but never read.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!read_.count(k)) out.push_back(k);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = s.find(sep, start);
      const std::string item = trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (!item.empty()) out.push_back(item);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  }

  static double to_number(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": not a number: '" + s + "'");
    }
  }

  const std::string* find(const std::string& key) const {
    const std::string k = normalize_key(key);
    read_.insert(k);
    const auto it = values_.find(k);
    return it == values_.end() ? nullptr : &it->second;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;
};

/// Parameters shared by every experiment; study-specific keys stay in `raw`.
struct ExperimentConfig {
  std::string experiment;
  int n = 3;
  double p = 2.0;
  double q = 2.0;
  double kappa = 0.25;
  double mu = 1.0;
  double nu = 1.0;
  std::vector<double> lambda_list;
  std::vector<double> h_list;
  double radius = 1.0;
  double tol = 1e-10;
  unsigned seed = 1;
  int threads = 1;
  Config raw;

  static ExperimentConfig from(const Config& c, const std::string& experiment, std::vector<double> default_lambdas,
                               std::vector<double> default_h) {
    ExperimentConfig e;
    e.experiment = experiment;
    e.raw = c;
    e.n = e.raw.integer("n", 3);
    e.p = e.raw.number("p", 2.0);
    e.q = e.raw.number("q", e.p);
    e.kappa = e.raw.number("kappa", 0.25);
    e.mu = e.raw.number("mu", 1.0);
    e.nu = e.raw.number("nu", 1.0);
    e.lambda_list = e.raw.list("lambda_list", default_lambdas);
    e.h_list = e.raw.list("h", default_h);
    e.radius = e.raw.number("radius", 1.0);
    e.tol = e.raw.number("tol", 1e-10);
    e.seed = static_cast<unsigned>(e.raw.integer("seed", 1));
    e.threads = e.raw.integer("threads", 1);
    if (e.n < 2 || e.n > 8) throw ConfigError("n must lie in 2..8");
    if (!(e.p > 1.0) || !(e.q >= e.p)) throw ConfigError("need 1 < p <= q");
    if (!(e.kappa > 0.0 && e.kappa < 0.5)) throw ConfigError("kappa must lie in (0, 1/2)");
    if (!(e.mu >= 0.0 && e.mu <= 1.0)) throw ConfigError("mu must lie in [0, 1]");
    if (!(e.nu > 0.0)) throw ConfigError("nu must be > 0");
    if (e.lambda_list.empty()) throw ConfigError("lambda_list must be non-empty");
    for (std::size_t i = 1; i < e.lambda_list.size(); ++i) {
      if (!(e.lambda_list[i] > e.lambda_list[i - 1])) throw ConfigError("lambda_list must be increasing");
    }
    for (double h : e.h_list) {
      if (!(h > 0.0 && h <= 0.5)) throw ConfigError("h must lie in (0, 1/2]");
    }
    if (!(e.radius > 0.0)) throw ConfigError("radius must be > 0");
    if (!(e.tol > 0.0)) throw ConfigError("tol must be > 0");
    if (e.threads < 1) throw ConfigError("threads must be >= 1");
    return e;
  }
};

// ---------------------------------------------------------------- CSV output

using CsvCell = std::variant<double, long long, std::string>;

inline std::string format_cell(const CsvCell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;

  void add(std::vector<CsvCell> row) {
    if (row.size() != header.size()) throw std::logic_error("CsvTable: row width differs from header");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::out_of_range("CsvTable: no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }

  double number(std::size_t row, const std::string& name) const {
    const CsvCell& c = rows.at(row).at(column(name));
    if (const double* d = std::get_if<double>(&c)) return *d;
    if (const long long* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
    throw std::invalid_argument("CsvTable: column " + name + " is not numeric");
  }

  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_cell(r[i]);
      out << '\n';
    }
  }
};

inline CsvCell cell(bool b) { return static_cast<long long>(b ? 1 : 0); }
inline CsvCell cell(int i) { return static_cast<long long>(i); }
inline CsvCell cell(long i) { return static_cast<long long>(i); }
inline CsvCell cell(std::size_t i) { return static_cast<long long>(i); }
inline CsvCell cell(double d) { return d; }
inline CsvCell cell(const std::string& s) { return s; }
inline CsvCell cell(const char* s) { return std::string(s); }

/// Runs fn(0..count-1) on up to `threads` workers; results come back in index
/// order. The first exception by index is rethrown after all workers finish.
template <class T>
std::vector<T> parallel_map(std::size_t count, int threads, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::mutex m;
  std::size_t next = 0;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= count) return;
        i = next++;
      }
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace pqlab
