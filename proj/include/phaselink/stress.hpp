#pragma once

#include <optional>
#include <vector>

#include "phaselink/aggregate.hpp"
#include "phaselink/eval.hpp"
#include "phaselink/gridassoc.hpp"
#include "phaselink/linker.hpp"
#include "phaselink/parallel.hpp"
#include "phaselink/synth.hpp"

namespace phaselink {

inline const std::vector<double> kStressGaps = {10, 12, 16, 20, 24, 32, 64, 128};

struct StressOptions {
  std::vector<double> max_gaps = kStressGaps;
  StressConfig sequence;       // n_events and error model; max_gap_s is overwritten per gap
  PipelineOptions pipeline;
  GridParams grid;
  bool run_grid = true;
  std::uint64_t seed = 7;
};

struct StressRow {
  double max_gap_s = 0.0;
  double mean_gap_s = 0.0;
  std::size_t n_picks = 0;
  MetricsReport phaselink;
  MetricsReport grid;
};

/// Sweeps sequence density. Sequence k is drawn from RNG stream (seed, k). With
/// no model the oracle linker is used, which isolates aggregation from learning.
inline std::vector<StressRow> stress_test(const std::optional<LinkerModel>& model,
                                          const Network& net, const LayeredModel& velocity,
                                          const TravelTimeGrid* grid, const StressOptions& opt) {
  std::vector<StressRow> rows;
  for (std::size_t k = 0; k < opt.max_gaps.size(); ++k) {
    StressConfig cfg = opt.sequence;
    cfg.max_gap_s = opt.max_gaps[k];
    Rng rng = Rng::stream(opt.seed, k);
    const PickStream seq = generate_stress_sequence(cfg, net, velocity, rng);
    const auto truth = truth_sets(seq.truth);

    StressRow row;
    row.max_gap_s = cfg.max_gap_s;
    row.mean_gap_s = mean_origin_gap(seq.truth).value_or(0.0);
    row.n_picks = seq.picks.size();
    PipelineResult assoc;
    if (model) assoc = run_association(seq.picks, net.unit, ModelLinker(*model), opt.pipeline);
    else assoc = run_association(seq.picks, net.unit, OracleLinker(seq.picks), opt.pipeline);
    row.phaselink = score(cluster_sets(assoc.clusters), truth);
    if (opt.run_grid && grid) {
      const auto events = grid_associate(seq.picks, *grid, opt.grid);
      row.grid = score(cluster_sets(grid_clusters(events)), truth);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace phaselink
