#include "agentab/clock.hpp"

#include <ctime>

namespace agentab {

double WallClock::Seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
}

std::string WallClock::Timestamp() const {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace agentab
