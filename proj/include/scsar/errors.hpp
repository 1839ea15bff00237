#pragma once

#include <stdexcept>
#include <string>

namespace scsar {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownUnitId : Error {
  explicit UnknownUnitId(const std::string& id) : Error("UnknownUnitId: " + id) {}
};

struct SelfLoop : Error {
  explicit SelfLoop(const std::string& id) : Error("SelfLoop: " + id) {}
};

struct KTooLarge : Error {
  explicit KTooLarge(const std::string& m) : Error("KTooLarge: " + m) {}
};

struct EmptySubset : Error {
  EmptySubset() : Error("EmptySubset: restriction to an empty unit subset") {}
};

struct IndexOutOfRange : Error {
  explicit IndexOutOfRange(const std::string& m) : Error("IndexOutOfRange: " + m) {}
};

struct SpatialParamOutOfRange : Error {
  explicit SpatialParamOutOfRange(const std::string& m)
      : Error("SpatialParamOutOfRange: " + m) {}
};

struct RankDeficientDesign : Error {
  explicit RankDeficientDesign(const std::string& m) : Error("RankDeficientDesign: " + m) {}
};

struct TooFewUnits : Error {
  explicit TooFewUnits(const std::string& m) : Error("TooFewUnits: " + m) {}
};

struct MinVariance : Error {
  explicit MinVariance(const std::string& m) : Error("MinVariance: " + m) {}
};

struct NotApplicable : Error {
  explicit NotApplicable(const std::string& m) : Error("NotApplicable: " + m) {}
};

struct KExceedsN : Error {
  explicit KExceedsN(const std::string& m) : Error("KExceedsN: " + m) {}
};

struct ClusterTooSmall : Error {
  explicit ClusterTooSmall(const std::string& m) : Error("ClusterTooSmall: " + m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("ConfigError: " + m) {}
};

struct TooFewFarms : Error {
  explicit TooFewFarms(const std::string& m) : Error("TooFewFarms: " + m) {}
};

struct ZeroTotalOutput : Error {
  explicit ZeroTotalOutput(const std::string& m) : Error("ZeroTotalOutput: " + m) {}
};

struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& m) : Error("LengthMismatch: " + m) {}
};

struct MissingColumn : Error {
  explicit MissingColumn(const std::string& name) : Error("MissingColumn: " + name) {}
};

struct NonNumericCell : Error {
  explicit NonNumericCell(const std::string& m) : Error("NonNumericCell: " + m) {}
};

struct DuplicateUnitId : Error {
  explicit DuplicateUnitId(const std::string& id) : Error("DuplicateUnitId: " + id) {}
};

struct IoFailure : Error {
  explicit IoFailure(const std::string& m) : Error("IoFailure: " + m) {}
};

}  // namespace scsar
