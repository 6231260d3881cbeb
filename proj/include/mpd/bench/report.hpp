#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mpd/bench/experiment.hpp"

namespace mpd::bench {

/// Across-seed statistics of average optimize steps for one group of runs.
struct Aggregate {
  std::size_t seeds = 0;
  std::size_t failed = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double success_rate = 0.0;
};

Aggregate aggregate(const std::vector<RunRecord>& records);
/// Records of one variant at one scenario, in seed order.
std::vector<RunRecord> select(const std::vector<RunRecord>& records, const std::string& variant,
                              const Scenario& scenario);

struct Verdict {
  std::string table;
  std::string check;
  /// "PASS", "FAIL", "INFO" (reported, not gated) or "MISSING".
  std::string verdict;
};

/// Writes aggregate/tableV.csv (one row per variant and scenario present)
/// and tableVI-VIII.csv for the ablation scenario, whose trailing rows hold
/// the ordering verdicts. Returns the verdicts.
std::vector<Verdict> write_tables(const std::vector<RunRecord>& records, const Scenario& ablation,
                                  const std::filesystem::path& out_dir);

/// Per (variant, scenario): a trajectory plot (width and thickness against
/// step, min/max band across seeds, mean line, target and tolerance guides)
/// and a learning-curve plot. Returns the written paths.
std::vector<std::filesystem::path> write_plots(const std::vector<RunRecord>& records, const env::EpisodeConfig& episode,
                                               const std::filesystem::path& out_dir);

}  // namespace mpd::bench
