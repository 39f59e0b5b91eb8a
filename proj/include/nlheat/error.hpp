#pragma once

#include <stdexcept>
#include <string>

namespace nlheat {

enum class ErrorKind {
  InvalidArgument,
  IncompatibleGrids,
  Sampling,
  DomainTooSmall,
  DiscretizationQuality,
  MomentDiverges,
  MomentTable,
  InternalConsistency,
  FitFailure,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::InvalidArgument, what) {}
};

class IncompatibleGrids : public Error {
 public:
  explicit IncompatibleGrids(const std::string& what = "grids differ")
      : Error(ErrorKind::IncompatibleGrids, what) {}
};

class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, double node)
      : Error(ErrorKind::Sampling, what), node_(node) {}
  double node() const noexcept { return node_; }

 private:
  double node_;
};

/// Raised when the truncated domain [-L, L] cannot hold the requested object.
/// `minimal_half_extent()` is the smallest L the caller should retry with.
class DomainTooSmall : public Error {
 public:
  DomainTooSmall(const std::string& what, double minimal_half_extent)
      : Error(ErrorKind::DomainTooSmall,
              what + " (minimal L = " + std::to_string(minimal_half_extent) + ")"),
        minimal_(minimal_half_extent) {}
  double minimal_half_extent() const noexcept { return minimal_; }

 private:
  double minimal_;
};

class DiscretizationQuality : public Error {
 public:
  explicit DiscretizationQuality(const std::string& what)
      : Error(ErrorKind::DiscretizationQuality, what) {}
};

class MomentDiverges : public Error {
 public:
  explicit MomentDiverges(const std::string& what) : Error(ErrorKind::MomentDiverges, what) {}
};

class MomentTableError : public Error {
 public:
  explicit MomentTableError(const std::string& what) : Error(ErrorKind::MomentTable, what) {}
};

class InternalConsistency : public Error {
 public:
  explicit InternalConsistency(const std::string& what)
      : Error(ErrorKind::InternalConsistency, what) {}
};

class FitFailure : public Error {
 public:
  explicit FitFailure(const std::string& what) : Error(ErrorKind::FitFailure, what) {}
};

}  // namespace nlheat
