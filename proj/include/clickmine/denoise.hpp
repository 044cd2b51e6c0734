#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clickmine/ingest.hpp"

namespace clickmine {

struct DenoiseConfig {
  double combine_window_s = 5.0;
  double pause_gap_s = 1200.0;
  /// Threshold for gaps while playing; unset means "the video length".
  std::optional<double> play_gap_s;

  void validate() const;
};

/// Collapses each maximal run of same-type clicks whose successive gaps are
/// below the combine window into a single click carrying the run's first
/// timestamp and its last position, state and rate.
std::vector<RawClick> combine_events(const std::vector<RawClick>& clicks, const DenoiseConfig& cfg);

/// masked[i] is true when no play/pause state may be inferred between
/// clicks i and i + 1: they lie on different physical videos, or the gap
/// exceeds the pause or play threshold for the state left by click i.
std::vector<bool> gap_mask(const std::vector<RawClick>& clicks, const DenoiseConfig& cfg, double video_length_s);

/// A denoised UV pair, ready for either encoding.
struct Trajectory {
  std::string user_id;
  std::string video_id;
  int cfa = -1;
  double length_s = 0.0;
  std::vector<RawClick> clicks;
  std::vector<bool> mask;  // size clicks.size() - 1
};

Trajectory denoise(const UVPair& uv, const DenoiseConfig& cfg, double video_length_s);

}  // namespace clickmine
