#pragma once

#include <map>
#include <string>
#include <vector>

#include "otreg/cost.hpp"
#include "otreg/domain.hpp"
#include "otreg/errors.hpp"

namespace otreg {

// Flat key=value file: one `key = value` pair per line, `#` comments,
// blank lines ignored. Keys are dotted paths (cost.name, source.shape);
// repeated keys are an error except `*.halfspace`, which accumulates rows.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  // comma-separated doubles ("0.5, -1")
  VectorXd get_vector(const std::string& key) const;
  // comma-separated strings
  std::vector<std::string> get_list(const std::string& key) const;
  // accumulated `prefix.halfspace` rows, each "a_1,...,a_n,b"
  const std::vector<std::string>& halfspaces(const std::string& prefix) const;

  int line_of(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  std::map<std::string, int> lines_;
  std::map<std::string, std::vector<std::string>> rows_;
  std::string origin_;
};

// cost.name, cost.epsilon (perturbed family), cost.fd_step
CostOracle cost_from_config(const Config& cfg);

// <prefix>.shape = ball | box | polytope; ball: center, radius;
// box: lo, hi; polytope: halfspace rows "a_1,...,a_n,b"
DomainSpec domain_from_config(const Config& cfg, const std::string& prefix);

VectorXd parse_vector(const std::string& text);

}  // namespace otreg
