#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cheom/quantum_core.hpp"

namespace cheom {

enum class Detection { homodyne, heterodyne, photodetect, unmonitored };

Detection detection_from_string(const std::string& s);
std::string to_string(Detection d);

std::uint64_t splitmix64(std::uint64_t x);
// Derived seed for child i of seed s; injective in i for fixed s.
std::uint64_t mix_seed(std::uint64_t s, std::uint64_t i);
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trajectory, std::uint64_t mode);

// Single-owner random stream. Every normal consumes exactly two engine draws (Box-Muller).
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  double uniform();  // open interval (0, 1)
  double normal();
  double wiener(double dt);
  cplx complex_wiener(double dt);
  double exp_threshold() { return -std::log(uniform()); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

bool jump_decision(double accumulated_rate_integral, double threshold);

// Per-mode increments for one step. Real Wiener increments sit in the real part.
struct StepNoise {
  std::vector<cplx> dw;
};

struct NoisePath {
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<Detection> kinds;
  std::vector<std::vector<double>> real;         // homodyne modes (empty otherwise)
  std::vector<std::vector<cplx>> complex;        // heterodyne modes
  std::vector<std::vector<std::uint8_t>> jumps;  // photodetect modes, filled by a realized run

  StepNoise at(std::size_t step) const;
  void save(const std::string& path) const;
  static NoisePath load(const std::string& path);
};

// Draws `steps` increments per mode in mode-major order from the given per-mode streams.
NoisePath record_path(std::vector<NoiseStream>& streams, std::size_t steps, double dt,
                      const std::vector<Detection>& kinds);

// Source of jump decisions for photodetected modes.
class JumpDriver {
 public:
  virtual ~JumpDriver() = default;
  // rate is 2k<a†a> at the start of the step; returns true if mode jumps at the end of this step.
  virtual bool decide(std::size_t mode, double rate, double dt, std::size_t step) = 0;
};

class ThresholdJumpDriver : public JumpDriver {
 public:
  // streams indexed by mode; entries for non-photodetect modes are unused.
  ThresholdJumpDriver(std::vector<NoiseStream>* streams, const std::vector<Detection>& kinds);
  bool decide(std::size_t mode, double rate, double dt, std::size_t step) override;
  // Flags of every decision so far, for replay.
  const std::vector<std::vector<std::uint8_t>>& flags() const { return flags_; }

 private:
  std::vector<NoiseStream>* streams_;
  std::vector<double> integral_, threshold_;
  std::vector<std::vector<std::uint8_t>> flags_;
};

class RecordedJumpDriver : public JumpDriver {
 public:
  explicit RecordedJumpDriver(const NoisePath& path) : path_(path) {}
  bool decide(std::size_t mode, double rate, double dt, std::size_t step) override;

 private:
  const NoisePath& path_;
};

}  // namespace cheom
