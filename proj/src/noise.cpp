#include "cheom/noise.hpp"

#include <cmath>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace cheom {

Detection detection_from_string(const std::string& s) {
  if (s == "homodyne") return Detection::homodyne;
  if (s == "heterodyne") return Detection::heterodyne;
  if (s == "photodetect") return Detection::photodetect;
  if (s == "unmonitored") return Detection::unmonitored;
  throw std::invalid_argument("unknown detection '" + s + "'");
}

std::string to_string(Detection d) {
  switch (d) {
    case Detection::homodyne: return "homodyne";
    case Detection::heterodyne: return "heterodyne";
    case Detection::photodetect: return "photodetect";
    case Detection::unmonitored: return "unmonitored";
  }
  return "?";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// splitmix64 is a bijection, so i -> s ^ splitmix64(i + c) is injective for fixed s.
std::uint64_t mix_seed(std::uint64_t s, std::uint64_t i) {
  return s ^ splitmix64(i + 0x9e3779b97f4a7c15ULL);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trajectory, std::uint64_t mode) {
  return mix_seed(mix_seed(master, trajectory), mode);
}

NoiseStream::NoiseStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double NoiseStream::uniform() {
  ++counter_;
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double NoiseStream::wiener(double dt) { return std::sqrt(dt) * normal(); }

cplx NoiseStream::complex_wiener(double dt) {
  const double z1 = normal();
  const double z2 = normal();
  return cplx(z1, z2) * std::sqrt(dt / 2.0);
}

bool jump_decision(double accumulated_rate_integral, double threshold) {
  return accumulated_rate_integral >= threshold;
}

StepNoise NoisePath::at(std::size_t step) const {
  StepNoise s;
  s.dw.assign(kinds.size(), cplx(0.0));
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    if (kinds[k] == Detection::homodyne) s.dw[k] = real[k].at(step);
    if (kinds[k] == Detection::heterodyne) s.dw[k] = complex[k].at(step);
  }
  return s;
}

namespace {

constexpr char kMagic[8] = {'C', 'H', 'E', 'O', 'M', 'N', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("noise path: truncated file");
  return v;
}

}  // namespace

void NoisePath::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + tmp + "'");
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kVersion);
    put<double>(os, dt);
    put<std::uint64_t>(os, steps);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(kinds.size()));
    for (auto k : kinds) put<std::uint8_t>(os, static_cast<std::uint8_t>(k));
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      switch (kinds[k]) {
        case Detection::homodyne:
          for (double v : real[k]) put<double>(os, v);
          break;
        case Detection::heterodyne:
          for (cplx v : complex[k]) {
            put<double>(os, v.real());
            put<double>(os, v.imag());
          }
          break;
        case Detection::photodetect:
          for (auto f : jumps[k]) put<std::uint8_t>(os, f);
          break;
        case Detection::unmonitored: break;
      }
    }
  }
  std::filesystem::rename(tmp, path);
}

NoisePath NoisePath::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("noise path: bad magic");
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("noise path: unsupported version");
  NoisePath p;
  p.dt = get<double>(is);
  p.steps = get<std::uint64_t>(is);
  const auto nm = get<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < nm; ++k) {
    auto tag = get<std::uint8_t>(is);
    if (tag > 3) throw std::runtime_error("noise path: bad kind tag");
    p.kinds.push_back(static_cast<Detection>(tag));
  }
  p.real.resize(nm);
  p.complex.resize(nm);
  p.jumps.resize(nm);
  for (std::uint32_t k = 0; k < nm; ++k) {
    switch (p.kinds[k]) {
      case Detection::homodyne:
        for (std::size_t s = 0; s < p.steps; ++s) p.real[k].push_back(get<double>(is));
        break;
      case Detection::heterodyne:
        for (std::size_t s = 0; s < p.steps; ++s) {
          double re = get<double>(is);
          double im = get<double>(is);
          p.complex[k].emplace_back(re, im);
        }
        break;
      case Detection::photodetect:
        for (std::size_t s = 0; s < p.steps; ++s) p.jumps[k].push_back(get<std::uint8_t>(is));
        break;
      case Detection::unmonitored: break;
    }
  }
  return p;
}

NoisePath record_path(std::vector<NoiseStream>& streams, std::size_t steps, double dt,
                      const std::vector<Detection>& kinds) {
  if (streams.size() != kinds.size()) throw std::invalid_argument("record_path: one stream per mode required");
  NoisePath p;
  p.dt = dt;
  p.steps = steps;
  p.kinds = kinds;
  p.real.resize(kinds.size());
  p.complex.resize(kinds.size());
  p.jumps.resize(kinds.size());
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    switch (kinds[k]) {
      case Detection::homodyne:
        p.real[k].reserve(steps);
        for (std::size_t s = 0; s < steps; ++s) p.real[k].push_back(streams[k].wiener(dt));
        break;
      case Detection::heterodyne:
        p.complex[k].reserve(steps);
        for (std::size_t s = 0; s < steps; ++s) p.complex[k].push_back(streams[k].complex_wiener(dt));
        break;
      case Detection::photodetect: p.jumps[k].assign(steps, 0); break;
      case Detection::unmonitored: break;
    }
  }
  return p;
}

ThresholdJumpDriver::ThresholdJumpDriver(std::vector<NoiseStream>* streams, const std::vector<Detection>& kinds)
    : streams_(streams), integral_(kinds.size(), 0.0), threshold_(kinds.size(), 0.0), flags_(kinds.size()) {
  for (std::size_t k = 0; k < kinds.size(); ++k)
    if (kinds[k] == Detection::photodetect) threshold_[k] = (*streams_)[k].exp_threshold();
}

bool ThresholdJumpDriver::decide(std::size_t mode, double rate, double dt, std::size_t step) {
  auto& f = flags_[mode];
  if (f.size() <= step) f.resize(step + 1, 0);
  integral_[mode] += std::max(rate, 0.0) * dt;
  if (!jump_decision(integral_[mode], threshold_[mode])) return false;
  integral_[mode] = 0.0;
  threshold_[mode] = (*streams_)[mode].exp_threshold();
  f[step] = 1;
  return true;
}

bool RecordedJumpDriver::decide(std::size_t mode, double, double, std::size_t step) {
  const auto& f = path_.jumps.at(mode);
  return step < f.size() && f[step] != 0;
}

}  // namespace cheom
