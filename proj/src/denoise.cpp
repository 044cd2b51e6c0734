#include "clickmine/denoise.hpp"

namespace clickmine {

void DenoiseConfig::validate() const {
  if (!(combine_window_s > 0.0)) throw Error("combine window must be positive");
  if (!(pause_gap_s > 0.0)) throw Error("pause gap must be positive");
  if (play_gap_s && !(*play_gap_s > 0.0)) throw Error("play gap must be positive");
}

std::vector<RawClick> combine_events(const std::vector<RawClick>& clicks, const DenoiseConfig& cfg) {
  std::vector<RawClick> out;
  out.reserve(clicks.size());
  std::size_t i = 0;
  while (i < clicks.size()) {
    std::size_t last = i;
    while (last + 1 < clicks.size() && clicks[last + 1].type == clicks[i].type &&
           clicks[last + 1].timestamp_s - clicks[last].timestamp_s < cfg.combine_window_s)
      ++last;
    RawClick merged = clicks[last];
    merged.type = clicks[i].type;
    merged.timestamp_s = clicks[i].timestamp_s;
    out.push_back(std::move(merged));
    i = last + 1;
  }
  return out;
}

std::vector<bool> gap_mask(const std::vector<RawClick>& clicks, const DenoiseConfig& cfg, double video_length_s) {
  const double play_gap = cfg.play_gap_s.value_or(video_length_s);
  std::vector<bool> masked(clicks.empty() ? 0 : clicks.size() - 1, false);
  for (std::size_t i = 0; i + 1 < clicks.size(); ++i) {
    const auto& a = clicks[i];
    const auto& b = clicks[i + 1];
    const double gap = b.timestamp_s - a.timestamp_s;
    if (a.video_id != b.video_id)
      masked[i] = true;
    else if (a.state == PlayerState::paused)
      masked[i] = gap > cfg.pause_gap_s;
    else
      masked[i] = gap > play_gap;
  }
  return masked;
}

Trajectory denoise(const UVPair& uv, const DenoiseConfig& cfg, double video_length_s) {
  Trajectory t;
  t.user_id = uv.user_id;
  t.video_id = uv.video_id;
  t.cfa = uv.cfa;
  t.length_s = video_length_s;
  t.clicks = combine_events(uv.clicks, cfg);
  t.mask = gap_mask(t.clicks, cfg, video_length_s);
  return t;
}

}  // namespace clickmine
