#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace agentab {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = "0.3.0";

// Error hierarchy. Every failure the library reports derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: config, spec, plan, or precondition violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Network / protocol failure talking to a model backend or a driver.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact that does not match its schema or invariants.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

// First 8 bytes of SHA-256 as an integer, used to derive child seeds.
std::uint64_t HashToU64(std::string_view data);

// Derives a seed from a parent seed and a label (e.g. a persona id).
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view label);

// Portable random helpers. std distributions are implementation-defined, so
// everything that must replay bit-identically goes through these.
using Rng = std::mt19937_64;

double Uniform01(Rng& rng);
// Uniform integer in [0, bound) by rejection sampling; bound > 0.
std::uint64_t UniformBelow(Rng& rng, std::uint64_t bound);
double Normal(Rng& rng, double mean, double sd);

template <typename T>
void Shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = UniformBelow(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

// Uniform draw in [0,1) that is a pure function of the key.
double KeyedUniform(std::string_view key);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view contents);
Json ReadJsonFile(const std::filesystem::path& path);
// Pretty-printed JSON with a trailing newline.
void WriteJsonFile(const std::filesystem::path& path, const Json& doc);

std::string ToLower(std::string_view s);
std::string Trim(std::string_view s);

// First decimal number in `text`, allowing comma digit grouping
// ("$1,055.14 each" -> 1055.14). Signs are ignored.
std::optional<double> FirstNumber(std::string_view text);

// Fixed-point rendering; avoids locale and iostream state.
std::string FormatFixed(double value, int decimals);

}  // namespace agentab
