#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfld/model.hpp"

namespace cfld {

/// SplitMix64: additive Weyl sequence followed by a xor-shift/multiply finalizer.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + uniform01() * (hi - lo); }

 private:
  std::uint64_t state_;
};

/// Independent draw streams, in documented order.
enum class GenStream : std::uint64_t {
  ZoneLocations = 0,
  CandidateLocations = 1,
  CompetitorLocations = 2,
  BuyingPower = 3,
  CompetitorAttractiveness = 4,
};

/// Generator positioned at the start of `stream` for `seed`.
SplitMix64 make_stream(std::uint64_t seed, GenStream stream) noexcept;

struct GenConfig {
  std::size_t n_zones = 20;
  std::size_t n_candidates = 20;
  std::size_t n_competitors = 5;
  double fixed_cost = 0.0;
  std::uint64_t seed = 1;
  double square_side = 100.0;
  std::vector<double> level_values{100.0, 300.0, 500.0, 700.0, 900.0};
  double level_cost_multiplier = 2.0;
  double buying_power_lo = 100.0;
  double buying_power_hi = 10000.0;
  double attractiveness_lo = 100.0;
  double attractiveness_hi = 1000.0;

  /// Throws InvalidInstance when counts are zero or levels are not strictly
  /// positive and ascending.
  void validate() const;
};

/// Raised when a point keeps colliding with the distance floor.
class GenerationError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kMaxResampleAttempts = 100;

/// Random market on [0, side]^2.
///
/// Each quantity group is drawn from its own stream, so two configurations
/// that differ only in a count share the common prefix of every group: the
/// instance with K+1 competitors is the K-competitor instance plus one more.
Instance generate(const GenConfig& config);

inline constexpr const char* kInstanceSchema = "cfld-1";

/// Canonical JSON encoding; doubles are written in shortest round-trip form.
std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);

void save_instance(const Instance& instance, const std::filesystem::path& path);
Instance load_instance(const std::filesystem::path& path);

}  // namespace cfld
