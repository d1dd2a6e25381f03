#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <string_view>

#include "npi/observation.hpp"

namespace npi {

// Symbolic camera pose on a 15-degree grid plus a read-only target pad.
// Azimuth wraps modulo 24; elevation is clamped to [kMinElevation, kMaxElevation].
class PoseState {
 public:
  static constexpr int kGrid = 24;
  static constexpr int kMinElevation = 0;   // 0 degrees
  static constexpr int kMaxElevation = 4;   // 60 degrees
  static constexpr int kFeatureWidth = 4 * kGrid + 2 + 3 * kArgVocab;
  static constexpr int kObservationLength = 6;

  PoseState() = default;

  static PoseState reset(int azimuth, int elevation, int target_azimuth, int target_elevation) {
    for (int el : {elevation, target_elevation})
      if (el < kMinElevation || el > kMaxElevation)
        throw InputError("pose: elevation index " + std::to_string(el) + " outside the legal band");
    PoseState s;
    s.azimuth_ = wrap(azimuth);
    s.elevation_ = elevation;
    s.target_azimuth_ = wrap(target_azimuth);
    s.target_elevation_ = target_elevation;
    return s;
  }

  static int wrap(int az) { return ((az % kGrid) + kGrid) % kGrid; }
  static int degrees(int index) { return index * 15; }

  int azimuth() const { return azimuth_; }
  int elevation() const { return elevation_; }
  int target_azimuth() const { return target_azimuth_; }
  int target_elevation() const { return target_elevation_; }
  bool at_target() const { return azimuth_ == target_azimuth_ && elevation_ == target_elevation_; }

  void step(const Arguments& args) {
    switch (args[1]) {
      case action::kLeft: azimuth_ = wrap(azimuth_ - 1); break;
      case action::kRight: azimuth_ = wrap(azimuth_ + 1); break;
      case action::kUp: elevation_ = std::min(kMaxElevation, elevation_ + 1); break;
      case action::kDown: elevation_ = std::max(kMinElevation, elevation_ - 1); break;
      default:
        throw EnvironmentError("pose: unsupported action code " + std::to_string(args[1]));
    }
  }

  Observation observe() const {
    Observation o;
    o.env = EnvKind::pose;
    o.values = {azimuth_, elevation_, target_azimuth_, target_elevation_,
                elevation_ == kMinElevation ? 1 : 0, elevation_ == kMaxElevation ? 1 : 0};
    return o;
  }

  static Vec features(const Observation& obs, const Arguments& args) {
    if (obs.env != EnvKind::pose || obs.values.size() != kObservationLength)
      throw ConfigError("pose features: malformed observation");
    Vec f = Vec::Zero(kFeatureWidth);
    for (int k = 0; k < 4; ++k) f[k * kGrid + obs.values[k]] = 1.0;
    f[4 * kGrid] = obs.values[4];
    f[4 * kGrid + 1] = obs.values[5];
    append_arguments(f, 4 * kGrid + 2, args);
    return f;
  }

  // "az,el>target_az,target_el" in grid indices.
  std::string describe() const {
    return std::to_string(azimuth_) + "," + std::to_string(elevation_) + ">" +
           std::to_string(target_azimuth_) + "," + std::to_string(target_elevation_);
  }

  static PoseState parse(std::string_view text) {
    int a = 0, e = 0, ta = 0, te = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%d,%d>%d,%d", &a, &e, &ta, &te) != 4)
      throw InputError("pose: cannot parse '" + s + "' (expected az,el>az,el)");
    return reset(a, e, ta, te);
  }

  friend bool operator==(const PoseState&, const PoseState&) = default;

 private:
  int azimuth_ = 0;
  int elevation_ = 0;
  int target_azimuth_ = 0;
  int target_elevation_ = 0;
};

}  // namespace npi
