// Scaled acceptance run. One PASS/FAIL line per criterion; exit code 1 if any fail.
// Usage: phaselink_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phaselink/io.hpp"
#include "phaselink/phaselink.hpp"
#include "support/desk.hpp"
#include "support/generator_stats.hpp"
#include "support/gradcheck.hpp"
#include "support/random_models.hpp"
#include "support/traveltime_oracle.hpp"

using namespace phaselink;
namespace pt = phaselink::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SynthConfig desk_synth(std::uint64_t seed) {
  SynthConfig c;
  c.n_p = 50;
  c.seed = seed;
  return c;
}

// Shared between criteria 5, 6, 8 and 9.
struct DeskModel {
  LinkerModel model;
  TrainResult result;
  double train_seconds = 0.0;
  std::size_t n_train = 0;
};

const DeskModel& desk_model() {
  static const DeskModel dm = [] {
    DeskModel d;
    const Dataset ds =
        generate_dataset(desk_synth(11), pt::desk_network(), pt::desk_model(), 50000, default_workers());
    d.n_train = ds.n_train;
    TrainConfig tc;
    tc.hidden = 32;
    tc.epochs = 20;
    tc.seed = 11;
    Timer t;
    d.result = train(ds, tc, [](const EpochStats& s) {
      std::fprintf(stderr, "  epoch %d val_loss %.4f acc %.4f\n", s.epoch, s.val_loss,
                   s.val_accuracy_real);
    });
    d.train_seconds = t.seconds();
    d.model = d.result.best;
    return d;
  }();
  return dm;
}

// 1
Outcome travel_time_oracle() {
  Timer t;
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = pt::random_case(rng);
    const double ours = travel_time(c.model, c.depth, c.dist, c.phase);
    const double ref = pt::oracle_travel_time(c.model, c.depth, c.dist, c.phase, 200'000);
    worst = std::max(worst, std::abs(ours - ref));
  }
  const double secs = t.seconds();
  return {worst <= 1e-4 && secs < 60.0,
          fmt("1000 triples, max |diff| %.2e s, %.1f s", worst, secs)};
}

// 2
Outcome gradient() {
  double worst = 0.0;
  std::string name;
  const auto checks = pt::gradient_check(3, 4, 2, 17);
  for (const auto& c : checks)
    if (c.rel_error >= worst) worst = c.rel_error, name = c.name;
  return {worst < 1e-4 && !checks.empty(),
          fmt("%zu tensors, worst rel error %.2e (%s)", checks.size(), worst, name.c_str())};
}

// 3
Outcome generator() {
  SynthConfig cfg;  // full rule set, default n_p
  cfg.seed = 31;
  const auto res = pt::generator_statistics(cfg, pt::desk_network(), pt::desk_model(), 100000);
  bool ok = true;
  std::string d = "1e5 samples;";
  for (const auto& r : res) {
    ok = ok && r.p_value > 0.001;
    d += fmt(" %s p=%.3f", r.name.c_str(), r.p_value);
  }
  return {ok, d};
}

// 4
Outcome aggregation() {
  Timer t;
  StressConfig sc;
  sc.n_events = 500;
  sc.max_gap_s = 128.0;
  Rng rng = Rng::stream(41, 0);
  const PickStream s = generate_stress_sequence(sc, pt::desk_network(), pt::desk_model(), rng);
  const auto r = run_association(s.picks, pt::desk_network().unit, OracleLinker(s.picks), {});
  const auto m = score(cluster_sets(r.clusters), truth_sets(s.truth));
  const double secs = t.seconds();
  const double mean_gap = mean_origin_gap(s.truth).value_or(0.0);
  return {m.event_precision >= 0.99 && m.event_recall >= 0.95 && secs < 600.0,
          fmt("mean gap %.1f s, precision %.4f, recall %.4f, %.1f s", mean_gap, m.event_precision,
              m.event_recall, secs)};
}

// 5
Outcome learning() {
  const auto& dm = desk_model();
  const Dataset test =
      generate_dataset(desk_synth(12), pt::desk_network(), pt::desk_model(), 10000, default_workers());
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (!test.summaries[i].empty) all.push_back(i);
  const auto m = evaluate_linker(dm.model, test, all);
  return {m.accuracy_real >= 0.95 && dm.train_seconds < 7200.0 && !dm.result.diverged,
          fmt("n_p 50, H 32, %zu training records, held-out accuracy %.4f (%.4f incl. pads), "
              "training %.0f s",
              dm.n_train, m.accuracy_real, m.accuracy, dm.train_seconds)};
}

StressOptions stress_options() {
  StressOptions opt;
  opt.sequence.n_events = 500;
  opt.pipeline.n_p = 50;
  opt.seed = 61;
  return opt;
}

// 6
Outcome trend() {
  StressOptions opt = stress_options();
  opt.run_grid = false;
  auto rows = stress_test(desk_model().model, pt::desk_network(), pt::desk_model(), nullptr, opt);
  std::sort(rows.begin(), rows.end(),
            [](const StressRow& a, const StressRow& b) { return a.mean_gap_s < b.mean_gap_s; });
  bool monotone = true;
  using Get = double (*)(const MetricsReport&);
  const std::pair<const char*, Get> metrics[] = {
      {"event_precision", [](const MetricsReport& m) { return m.event_precision; }},
      {"event_recall", [](const MetricsReport& m) { return m.event_recall; }},
      {"phase_precision", [](const MetricsReport& m) { return m.phase_precision; }},
      {"phase_recall", [](const MetricsReport& m) { return m.phase_recall; }}};
  std::string broken;
  for (const auto& [name, get] : metrics)
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (get(rows[i].phaselink) < get(rows[i - 1].phaselink) - 0.05) {
        monotone = false;
        broken += fmt(" %s drops at mean gap %.1f;", name, rows[i].mean_gap_s);
      }
  const double hard = rows.front().phaselink.event_recall;
  const double easy = rows.back().phaselink.event_recall;
  const double ratio = easy > 0 ? hard / easy : 1.0;
  std::string d = fmt("recall ratio %.3f (%.3f at %.1f s / %.3f at %.1f s); recall by mean gap:",
                      ratio, hard, rows.front().mean_gap_s, easy, rows.back().mean_gap_s);
  for (const auto& r : rows) d += fmt(" %.1f:%.3f", r.mean_gap_s, r.phaselink.event_recall);
  if (!monotone) d += " |" + broken;
  return {monotone && ratio < 0.5, d};
}

// 7
Outcome baseline() {
  const auto grid = build_grid(pt::kDeskRegion, {2.0, 8.0, 14.0, 20.0}, 5.0, pt::desk_network(),
                               pt::desk_model(), kDefaultGridMemoryCap, default_workers());
  const auto rows = stress_test(std::nullopt, pt::desk_network(), pt::desk_model(), &grid,
                                stress_options());
  bool ok = true;
  std::string d = "max gap: oracle/grid recall";
  for (const auto& r : rows) {
    ok = ok && r.phaselink.event_recall > r.grid.event_recall;
    d += fmt(" %g:%.3f/%.3f", r.max_gap_s, r.phaselink.event_recall, r.grid.event_recall);
  }
  return {ok, d};
}

// 8
Outcome pr_monotone() {
  StressConfig sc;
  sc.n_events = 500;
  sc.max_gap_s = 32.0;
  Rng rng = Rng::stream(81, 0);
  const PickStream s = generate_stress_sequence(sc, pt::desk_network(), pt::desk_model(), rng);
  const auto truth = truth_sets(s.truth);
  PipelineOptions opt;
  opt.n_p = 50;
  bool ok = true;
  std::string d;
  for (int k = 0; k < 2; ++k) {
    const auto r = k == 0 ? run_association(s.picks, pt::desk_network().unit,
                                            ModelLinker(desk_model().model), opt)
                          : run_association(s.picks, pt::desk_network().unit,
                                            OracleLinker(s.picks), opt);
    const auto rows = pr_sweep(r.unfiltered, truth);
    for (std::size_t i = 1; i < rows.size(); ++i)
      ok = ok && rows[i].metrics.event_recall <= rows[i - 1].metrics.event_recall;
    d += fmt("%s%s recall %.3f -> %.3f, precision %.3f -> %.3f over n_min 8..20", k ? "; " : "",
             k == 0 ? "model" : "oracle", rows.front().metrics.event_recall,
             rows.back().metrics.event_recall, rows.front().metrics.event_precision,
             rows.back().metrics.event_precision);
    ok = ok && rows.size() == 13;
  }
  return {ok, d};
}

// 9
Outcome determinism() {
  auto dataset_bytes = [](unsigned workers) {
    const Dataset ds =
        generate_dataset(desk_synth(91), pt::desk_network(), pt::desk_model(), 3000, workers);
    std::ostringstream out;
    write_dataset(out, ds);
    return std::pair{out.str(), ds};
  };
  const auto [a, ds] = dataset_bytes(1);
  const auto [b, ds_b] = dataset_bytes(1);
  const auto [c, ds_c] = dataset_bytes(default_workers() + 1);
  const bool same_data = a == b && a == c;

  TrainConfig tc;
  tc.hidden = 16;
  tc.epochs = 3;
  tc.seed = 92;
  const auto h1 = train(ds, tc);
  const auto h2 = train(ds_b, tc);
  bool same_curve = h1.history.size() == h2.history.size();
  for (std::size_t i = 0; same_curve && i < h1.history.size(); ++i)
    same_curve = h1.history[i].train_loss == h2.history[i].train_loss &&
                 h1.history[i].val_loss == h2.history[i].val_loss;

  StressConfig sc;
  sc.n_events = 100;
  sc.max_gap_s = 32.0;
  auto catalog = [&](const LinkerModel& m) {
    Rng rng = Rng::stream(93, 0);
    const PickStream s = generate_stress_sequence(sc, pt::desk_network(), pt::desk_model(), rng);
    PipelineOptions opt;
    opt.n_p = 50;
    const auto r = run_association(s.picks, pt::desk_network().unit, ModelLinker(m), opt);
    std::ostringstream out;
    write_catalog(out, r.clusters, s.picks, pt::desk_network());
    return out.str();
  };
  const bool same_catalog = catalog(h1.best) == catalog(h2.best) &&
                            catalog(desk_model().model) == catalog(desk_model().model);
  return {same_data && same_curve && same_catalog,
          fmt("dataset bytes %s (%zu B, workers 1 vs %u), loss curve %s, catalog %s",
              same_data ? "identical" : "DIFFER", a.size(), default_workers() + 1,
              same_curve ? "identical" : "DIFFERS", same_catalog ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"travel-time oracle equivalence", travel_time_oracle},
      {"gradient correctness", gradient},
      {"generator fidelity", generator},
      {"aggregation correctness (oracle links)", aggregation},
      {"desk-scale learning", learning},
      {"end-to-end density trend", trend},
      {"oracle beats grid baseline", baseline},
      {"PR sweep monotonicity", pr_monotone},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Timer t;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s (%.0f s)\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first,
                o.detail.c_str(), t.seconds());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
