#pragma once

#include <stdexcept>
#include <string>

namespace fedrd {

// Base class for all library errors so callers can catch the whole family.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Estimation
struct SingularInformation : Error {
  explicit SingularInformation(const std::string& msg) : Error(msg) {}
};
struct NonPositiveVariance : Error {
  explicit NonPositiveVariance(const std::string& msg) : Error(msg) {}
};

// Federation / protocol state
struct LocalTimeMissingFromGrid : Error {
  explicit LocalTimeMissingFromGrid(const std::string& msg) : Error(msg) {}
};
struct ZeroRiskSet : Error {
  explicit ZeroRiskSet(const std::string& msg) : Error(msg) {}
};

// Simulation
struct NegativeHazard : Error {
  explicit NegativeHazard(const std::string& msg) : Error(msg) {}
};
struct NonFiniteHazard : Error {
  explicit NonFiniteHazard(const std::string& msg) : Error(msg) {}
};

// Evaluation
struct NoComparablePairs : Error {
  explicit NoComparablePairs(const std::string& msg) : Error(msg) {}
};

// Wire format
struct WireError : Error {
  explicit WireError(const std::string& msg) : Error(msg) {}
};
struct VersionMismatch : WireError {
  explicit VersionMismatch(const std::string& msg) : WireError(msg) {}
};
struct TruncatedPayload : WireError {
  explicit TruncatedPayload(const std::string& msg) : WireError(msg) {}
};
struct DimensionMismatch : WireError {
  explicit DimensionMismatch(const std::string& msg) : WireError(msg) {}
};

// Transport
struct TransportError : Error {
  explicit TransportError(const std::string& msg) : Error(msg) {}
};
struct TimeoutError : TransportError {
  explicit TimeoutError(const std::string& msg) : TransportError(msg) {}
};
struct DuplicateSite : TransportError {
  explicit DuplicateSite(const std::string& msg) : TransportError(msg) {}
};
struct MissingSite : TransportError {
  explicit MissingSite(const std::string& msg) : TransportError(msg) {}
};
struct ProtocolError : TransportError {
  explicit ProtocolError(const std::string& msg) : TransportError(msg) {}
};

}  // namespace fedrd
