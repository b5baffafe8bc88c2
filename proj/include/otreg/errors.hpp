#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace otreg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hypothesis (B1) failure: singular cross-Hessian at a witness point.
struct BiTwistError : Error {
  BiTwistError(std::string msg, Eigen::VectorXd x, Eigen::VectorXd y)
      : Error(std::move(msg)), x(std::move(x)), y(std::move(y)) {}
  Eigen::VectorXd x, y;
};

// Newton inversion of a cost-exponential chart failed to converge.
struct ChartInversionError : Error {
  ChartInversionError(std::string msg, Eigen::VectorXd q)
      : Error(std::move(msg)), q(std::move(q)) {}
  Eigen::VectorXd q;
};

struct DomainError : Error {
  using Error::Error;
};

struct DegenerateBodyError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(std::string msg, int line = -1) : Error(std::move(msg)), line(line) {}
  int line;
};

}  // namespace otreg
