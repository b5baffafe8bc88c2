#include "otreg/config.hpp"

#include <fstream>
#include <sstream>

namespace otreg {

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

Config Config::parse_string(const std::string& text,
                            const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ": expected key = value, got \"" +
                            trim(raw) + "\"",
                        lineno);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ": empty key", lineno);
    if (!value.empty() && value.front() == '=')
      throw ConfigError(origin + ": expected key = value, got \"" +
                            trim(raw) + "\"",
                        lineno);
    if (key.size() > 10 &&
        key.substr(key.size() - 10) == ".halfspace") {
      cfg.rows_[key.substr(0, key.size() - 10)].push_back(value);
      continue;
    }
    if (cfg.kv_.count(key))
      throw ConfigError(origin + ": duplicate key \"" + key + "\"", lineno);
    cfg.kv_[key] = value;
    cfg.lines_[key] = lineno;
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end())
    throw ConfigError(origin_ + ": missing key \"" + key + "\"");
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key \"" + key + "\" is not a number: \"" +
                          v + "\"",
                      line_of(key));
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key \"" + key +
                          "\" is not an integer: \"" + v + "\"",
                      line_of(key));
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

VectorXd Config::get_vector(const std::string& key) const {
  try {
    return parse_vector(get_string(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key \"" + key + "\" is not a vector: \"" +
                          get_string(key) + "\"",
                      line_of(key));
  }
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get_string(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::vector<std::string>& Config::halfspaces(
    const std::string& prefix) const {
  static const std::vector<std::string> empty;
  auto it = rows_.find(prefix);
  return it == rows_.end() ? empty : it->second;
}

int Config::line_of(const std::string& key) const {
  auto it = lines_.find(key);
  return it == lines_.end() ? -1 : it->second;
}

VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t pos = 0;
    item = trim(item);
    vals.push_back(std::stod(item, &pos));
    if (pos != item.size())
      throw ConfigError("bad vector component: \"" + item + "\"");
  }
  if (vals.empty()) throw ConfigError("empty vector");
  VectorXd v(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return v;
}

CostOracle cost_from_config(const Config& cfg) {
  const std::string name = cfg.get_string("cost.name");
  const int dim = cfg.get_int("cost.dim", 2);
  const double eps = cfg.get_double("cost.epsilon", 0.0);
  CostOracle c = builtin_cost(name, dim, eps);
  if (cfg.has("cost.fd_step")) c.fd_step = cfg.get_double("cost.fd_step");
  return c;
}

DomainSpec domain_from_config(const Config& cfg, const std::string& prefix) {
  const std::string shape = cfg.get_string(prefix + ".shape");
  if (shape == "ball") {
    return DomainSpec::ball(cfg.get_vector(prefix + ".center"),
                            cfg.get_double(prefix + ".radius"));
  }
  if (shape == "box") {
    return DomainSpec::box(cfg.get_vector(prefix + ".lo"),
                           cfg.get_vector(prefix + ".hi"));
  }
  if (shape == "polytope") {
    const auto& rows = cfg.halfspaces(prefix);
    if (rows.empty())
      throw ConfigError("polytope \"" + prefix + "\" has no halfspace rows");
    VectorXd first = parse_vector(rows[0]);
    const int n = static_cast<int>(first.size()) - 1;
    if (n < 1) throw ConfigError("halfspace row needs n+1 entries");
    MatrixXd A(rows.size(), n);
    VectorXd b(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      VectorXd r = parse_vector(rows[i]);
      if (r.size() != n + 1)
        throw ConfigError("halfspace row " + std::to_string(i) +
                          " has inconsistent arity");
      A.row(static_cast<Eigen::Index>(i)) = r.head(n).transpose();
      b[static_cast<Eigen::Index>(i)] = r[n];
    }
    return DomainSpec::polytope(A, b);
  }
  throw ConfigError("unknown domain shape \"" + shape + "\" for \"" + prefix +
                    "\"");
}

}  // namespace otreg
