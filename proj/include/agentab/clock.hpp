#pragma once

#include <chrono>
#include <string>

namespace agentab {

// Time source for traces and manifests. Runs that must replay
// byte-identically use the frozen clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double Seconds() const = 0;      // monotonic, arbitrary origin
  virtual std::string Timestamp() const = 0;  // ISO-8601 UTC
};

class WallClock final : public Clock {
 public:
  WallClock() : origin_(std::chrono::steady_clock::now()) {}
  double Seconds() const override;
  std::string Timestamp() const override;

 private:
  std::chrono::steady_clock::time_point origin_;
};

// Time stands still: every duration is 0 and every timestamp the epoch.
class FrozenClock final : public Clock {
 public:
  double Seconds() const override { return 0.0; }
  std::string Timestamp() const override { return "1970-01-01T00:00:00Z"; }
};

}  // namespace agentab
