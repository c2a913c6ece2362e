#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "phaselink/config.hpp"
#include "phaselink/io.hpp"
#include "phaselink/phaselink.hpp"

namespace fs = std::filesystem;
using namespace phaselink;

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  // path shortcuts, mapped onto paths.* keys
  std::map<std::string, std::string> paths;
  std::string out;  // output file of the chosen command
  bool oracle = false;
  bool quiet = false;
  std::optional<double> max_gap;
  std::optional<int> events;
  std::optional<std::size_t> n_samples;
  std::string unfiltered_out;
  bool sweep = false;
  std::string title;
};

RunConfig build_config(const Cli& cli) {
  RunConfig cfg;
  if (!cli.config_path.empty()) load_config(cli.config_path, cfg);
  apply_overrides(cfg, cli.overrides);
  std::vector<std::string> path_overrides;
  for (const auto& [k, v] : cli.paths)
    if (!v.empty()) path_overrides.push_back("paths." + k + "=" + v);
  apply_overrides(cfg, path_overrides);
  if (cli.seed) cfg.seed = *cli.seed;
  if (cli.workers) cfg.workers = *cli.workers;
  if (cli.n_samples) cfg.n_samples = *cli.n_samples;
  cfg.synth.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

Network load_network(const RunConfig& cfg) {
  return Network(load_stations(cfg.paths.stations), cfg.region);
}

std::string output_path(const Cli& cli, const RunConfig& cfg, const std::string& fallback) {
  if (!cli.out.empty()) return cli.out;
  return (fs::path(cfg.paths.output_dir) / fallback).string();
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void log(const Cli& cli, const std::string& msg) {
  if (!cli.quiet) std::cerr << msg << '\n';
}

void csv_header(std::ostream& out, const RunConfig& cfg) {
  for (const auto& [k, v] : config_entries(cfg)) out << "# " << k << " = " << v << '\n';
}

nlohmann::json metrics_json(const MetricsReport& m) {
  return {{"event_precision", m.event_precision}, {"event_recall", m.event_recall},
          {"phase_precision", m.phase_precision}, {"phase_recall", m.phase_recall},
          {"d", m.d}, {"c", m.c}, {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined}};
}

void metrics_rows(std::ostream& out, const std::string& prefix, const MetricsReport& m) {
  out << prefix << "event_precision," << m.event_precision << '\n'
      << prefix << "event_recall," << m.event_recall << '\n'
      << prefix << "phase_precision," << m.phase_precision << '\n'
      << prefix << "phase_recall," << m.phase_recall << '\n';
}

// ---- commands ----

int cmd_synth(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  validate_config(cfg, {.stations = true, .velocity_model = true});
  const Network net = load_network(cfg);
  const LayeredModel model = load_model(cfg.paths.velocity_model);
  const std::string path = cli.out.empty() ? cfg.paths.dataset : cli.out;
  if (path.empty()) throw ConfigError({"paths.dataset is not set (or pass --out)"});
  Dataset ds = generate_dataset(cfg.synth, net, model, cfg.n_samples, cfg.workers);
  ds.header["run_config"] = config_json(cfg);
  ds.header["run_config"].erase("workers");  // output does not depend on it
  ensure_parent(path);
  save_dataset(path, ds);
  log(cli, "wrote " + std::to_string(ds.size()) + " sub-sequences to " + path);
  return 0;
}

int cmd_simulate(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  validate_config(cfg, {.stations = true, .velocity_model = true});
  const Network net = load_network(cfg);
  const LayeredModel model = load_model(cfg.paths.velocity_model);
  StressConfig sc;
  sc.n_events = cli.events.value_or(cfg.stress_events);
  sc.max_gap_s = cli.max_gap.value_or(128.0);
  Rng rng(cfg.seed);
  const PickStream s = generate_stress_sequence(sc, net, model, rng);
  const std::string path = output_path(cli, cfg, "picks.csv");
  auto out = open_out(path);
  write_picks_csv(out, s.picks, net);
  log(cli, "wrote " + std::to_string(s.picks.size()) + " picks of " +
               std::to_string(s.truth.events.size()) + " events to " + path);
  return 0;
}

int cmd_train(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  const bool have_ckpt_path = !cfg.paths.checkpoint.empty() || !cli.out.empty();
  validate_config(cfg, {.dataset = true});
  if (!have_ckpt_path) throw ConfigError({"paths.checkpoint is not set (or pass --out)"});
  const Dataset ds = load_dataset(cfg.paths.dataset);
  TrainConfig tc = cfg.train;
  tc.checkpoint_path = cli.out.empty() ? cfg.paths.checkpoint : cli.out;
  tc.log_path = (fs::path(cfg.paths.output_dir) / "train_log.csv").string();
  ensure_parent(tc.checkpoint_path);
  ensure_parent(tc.log_path);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(ds, tc, [&](const EpochStats& s) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << "epoch " << s.epoch << " train " << s.train_loss << " val " << s.val_loss << " acc "
        << s.val_accuracy << " acc_real " << s.val_accuracy_real << " (" << secs << " s)";
    log(cli, msg.str());
  });
  if (r.diverged) {
    std::cerr << "training diverged; best finite checkpoint kept at " << tc.checkpoint_path
              << '\n';
    return 1;
  }
  log(cli, "best epoch " + std::to_string(r.best_epoch) + ", checkpoint " + tc.checkpoint_path);
  return 0;
}

int cmd_associate(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  validate_config(cfg, {.stations = true, .checkpoint = !cli.oracle, .picks = true});
  const Network net = load_network(cfg);
  const auto picks = load_picks(cfg.paths.picks, net);
  std::unique_ptr<Linker> linker;
  if (cli.oracle) {
    linker = std::make_unique<OracleLinker>(picks);
  } else {
    nlohmann::json header;
    linker = std::make_unique<ModelLinker>(load_checkpoint(cfg.paths.checkpoint, &header),
                                           cfg.threshold);
  }
  const PipelineResult r = run_association(picks, net.unit, *linker, cfg.pipeline());
  const std::string path = output_path(cli, cfg, "catalog.jsonl");
  nlohmann::json meta = {{"method", cli.oracle ? "oracle" : "model"},
                         {"n_picks", picks.size()},
                         {"shared_picks", r.shared_picks},
                         {"config", config_json(cfg)}};
  auto out = open_out(path);
  write_catalog(out, r.clusters, picks, net, meta);
  if (!cli.unfiltered_out.empty()) {
    auto uf = open_out(cli.unfiltered_out);
    write_catalog(uf, r.unfiltered, picks, net, meta);
  }
  if (r.shared_picks > 0)
    log(cli, "warning: " + std::to_string(r.shared_picks) + " picks appear in two clusters");
  log(cli, "wrote " + std::to_string(r.clusters.size()) + " events to " + path);
  return 0;
}

TravelTimeGrid make_grid(const RunConfig& cfg, const Network& net, const LayeredModel& model) {
  return build_grid(cfg.region, cfg.grid_depths, cfg.grid_spacing_km, net, model,
                    cfg.grid_memory_cap, cfg.workers);
}

int cmd_grid(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  validate_config(cfg, {.stations = true, .velocity_model = true, .picks = true});
  const Network net = load_network(cfg);
  const LayeredModel model = load_model(cfg.paths.velocity_model);
  const auto picks = load_picks(cfg.paths.picks, net);
  const auto grid = make_grid(cfg, net, model);
  const auto events = grid_associate(picks, grid, cfg.grid);
  const std::string path = output_path(cli, cfg, "grid_catalog.jsonl");
  auto out = open_out(path);
  out << nlohmann::json{{"header", {{"method", "grid"}, {"n_nodes", grid.size()},
                                    {"config", config_json(cfg)}}}}
             .dump()
      << '\n';
  for (std::size_t k = 0; k < events.size(); ++k) {
    auto j = catalog_entry(k, events[k].cluster, picks, net);
    const auto& node = grid.nodes[events[k].node];
    j["origin_time"] = events[k].origin_time;
    j["node"] = {{"lat", node.epicenter.lat}, {"lon", node.epicenter.lon},
                 {"depth_km", node.depth_km}};
    out << j.dump() << '\n';
  }
  log(cli, "wrote " + std::to_string(events.size()) + " events to " + path);
  return 0;
}

int cmd_eval(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  const bool truth_from_own = cfg.paths.truth.empty();
  validate_config(cfg, {.stations = true, .picks = truth_from_own, .catalog = true,
                        .truth = !truth_from_own});
  const Network net = load_network(cfg);
  const auto picks = load_picks(truth_from_own ? cfg.paths.picks : cfg.paths.truth, net);
  const auto truth = truth_sets(truth_from_picks(picks));
  const auto catalog = load_catalog(cfg.paths.catalog);
  const MetricsReport m = score(cluster_sets(catalog), truth);
  const std::string path = output_path(cli, cfg, "metrics.json");
  nlohmann::json j = metrics_json(m);
  j["config"] = config_json(cfg);
  std::vector<SweepRow> sweep;
  if (cli.sweep) {
    sweep = pr_sweep(catalog, truth);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : sweep) rows.push_back({{"n_min", r.n_min}, {"metrics", metrics_json(r.metrics)}});
    j["sweep"] = rows;
  }
  open_out(path) << j.dump(2) << '\n';
  const std::string csv = fs::path(path).replace_extension(".csv").string();
  auto out = open_out(csv);
  csv_header(out, cfg);
  out << "n_min,metric,value\n";
  if (sweep.empty()) metrics_rows(out, std::to_string(cfg.agg.n_min) + ",", m);
  for (const auto& r : sweep) metrics_rows(out, std::to_string(r.n_min) + ",", r.metrics);
  std::cout << "event_precision " << m.event_precision << " event_recall " << m.event_recall
            << " phase_precision " << m.phase_precision << " phase_recall " << m.phase_recall
            << " d " << m.d << " c " << m.c << '\n';
  return 0;
}

int cmd_stress(const Cli& cli) {
  RunConfig cfg = build_config(cli);
  const bool oracle = cli.oracle || cfg.stress_oracle;
  validate_config(cfg, {.stations = true, .velocity_model = true, .checkpoint = !oracle});
  const Network net = load_network(cfg);
  const LayeredModel model = load_model(cfg.paths.velocity_model);
  std::optional<LinkerModel> linker;
  if (!oracle) linker = load_checkpoint(cfg.paths.checkpoint);
  std::optional<TravelTimeGrid> grid;
  if (cfg.stress_grid) grid = make_grid(cfg, net, model);
  StressOptions opt;
  opt.max_gaps = cfg.stress_gaps;
  opt.sequence.n_events = cli.events.value_or(cfg.stress_events);
  opt.pipeline = cfg.pipeline();
  opt.grid = cfg.grid;
  opt.run_grid = cfg.stress_grid;
  opt.seed = cfg.seed;
  const auto rows = stress_test(linker, net, model, grid ? &*grid : nullptr, opt);
  const std::string path = output_path(cli, cfg, "stress.csv");
  auto out = open_out(path);
  csv_header(out, cfg);
  out << "max_gap_s,mean_gap_s,method,metric,value\n";
  nlohmann::json j = {{"config", config_json(cfg)}, {"rows", nlohmann::json::array()}};
  const std::string method = oracle ? "phaselink_oracle" : "phaselink";
  for (const auto& r : rows) {
    std::ostringstream pre;
    pre << r.max_gap_s << ',' << r.mean_gap_s << ',';
    metrics_rows(out, pre.str() + method + ",", r.phaselink);
    if (opt.run_grid) metrics_rows(out, pre.str() + "grid,", r.grid);
    nlohmann::json row = {{"max_gap_s", r.max_gap_s}, {"mean_gap_s", r.mean_gap_s},
                          {"n_picks", r.n_picks}, {method, metrics_json(r.phaselink)}};
    if (opt.run_grid) row["grid"] = metrics_json(r.grid);
    j["rows"].push_back(row);
    std::ostringstream msg;
    msg << "gap " << r.max_gap_s << " mean " << r.mean_gap_s << " recall " << r.phaselink.event_recall
        << " precision " << r.phaselink.event_precision;
    if (opt.run_grid) msg << " grid recall " << r.grid.event_recall;
    log(cli, msg.str());
  }
  open_out(fs::path(path).replace_extension(".json").string()) << j.dump(2) << '\n';
  return 0;
}

// Line plot of a tidy CSV (x column, series from the remaining key columns).
int cmd_plot(const Cli& cli, const std::string& input, const std::string& x_col,
             const std::string& metric) {
  std::ifstream in(input);
  if (!in) throw ConfigError({"cannot open plot input: " + input});
  std::vector<std::string> header;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = detail::split_csv(line);
    if (header.empty()) {
      header = f;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < f.size() && i < header.size(); ++i) row[header[i]] = f[i];
    if (row["metric"] != metric || !row.count(x_col)) continue;
    const std::string name = row.count("method") ? row["method"] : metric;
    series[name].emplace_back(std::stod(row[x_col]), std::stod(row["value"]));
  }
  if (series.empty()) throw ConfigError({"no rows with metric '" + metric + "' in " + input});
  double x0 = 1e300, x1 = -1e300;
  for (auto& [_, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (auto [x, y] : pts) x0 = std::min(x0, x), x1 = std::max(x1, x);
  }
  if (x1 == x0) x1 = x0 + 1;
  const double W = 640, H = 400, L = 60, R = 20, T = 30, B = 50;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return T + (1.0 - y) * (H - T - B); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">"
      << (cli.title.empty() ? metric : cli.title) << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << sy(0) << "\" x2=\"" << W - R << "\" y2=\"" << sy(0)
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << sy(0) << "\" x2=\"" << L << "\" y2=\"" << sy(1)
      << "\" stroke=\"black\"/>\n";
  for (double y = 0; y <= 1.0001; y += 0.25)
    svg << "<text x=\"" << L - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << y
        << "</text>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << x_col
      << "</text>\n";
  int k = 0;
  for (const auto& [name, pts] : series) {
    const char* c = colors[k % 5];
    svg << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : pts) svg << sx(x) << ',' << sy(y) << ' ';
    svg << "\"/>\n";
    for (auto [x, y] : pts)
      svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\"" << c
          << "\"/>\n";
    svg << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 16 + 16 * k << "\" text-anchor=\"end\" fill=\""
        << c << "\">" << name << "</text>\n";
    ++k;
  }
  svg << "</svg>\n";
  const std::string path = cli.out.empty() ? fs::path(input).replace_extension(".svg").string() : cli.out;
  open_out(path) << svg.str();
  log(cli, "wrote " + path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  CLI::App app{"Seismic phase association with a recurrent pick linker"};
  app.require_subcommand(1);
  app.add_option("--config", cli.config_path, "Configuration file (key = value)");
  app.add_option("--set", cli.overrides, "Override a configuration key: key=value")->take_all();
  app.add_option("--seed", cli.seed, "Random seed");
  app.add_option("--workers", cli.workers, "Worker threads");
  app.add_flag("-q,--quiet", cli.quiet, "No progress messages");
  auto add_path = [&](CLI::App* sub, const std::string& key, const std::string& help) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    sub->add_option("--" + flag, cli.paths[key], help);
  };

  auto* synth = app.add_subcommand("synth", "Generate a labeled training dataset");
  add_path(synth, "stations", "Station CSV");
  add_path(synth, "velocity_model", "Velocity model file");
  synth->add_option("-n,--samples", cli.n_samples, "Number of sub-sequences");
  synth->add_option("-o,--out", cli.out, "Dataset file");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic pick stream with event ids");
  add_path(simulate, "stations", "Station CSV");
  add_path(simulate, "velocity_model", "Velocity model file");
  simulate->add_option("--events", cli.events, "Number of events");
  simulate->add_option("--max-gap", cli.max_gap, "Maximum inter-event gap in seconds");
  simulate->add_option("-o,--out", cli.out, "Pick CSV");

  auto* trn = app.add_subcommand("train", "Train the linker");
  add_path(trn, "dataset", "Dataset file");
  trn->add_option("-o,--out", cli.out, "Checkpoint file");

  auto* assoc = app.add_subcommand("associate", "Associate a pick stream into events");
  add_path(assoc, "stations", "Station CSV");
  add_path(assoc, "checkpoint", "Model checkpoint");
  add_path(assoc, "picks", "Pick file (CSV or JSON-lines)");
  assoc->add_flag("--oracle", cli.oracle, "Link with ground-truth event ids instead of a model");
  assoc->add_option("--unfiltered", cli.unfiltered_out, "Also write clusters before the size filter");
  assoc->add_option("-o,--out", cli.out, "Catalog file (JSON-lines)");

  auto* grid = app.add_subcommand("grid", "Associate with the travel-time grid baseline");
  add_path(grid, "stations", "Station CSV");
  add_path(grid, "velocity_model", "Velocity model file");
  add_path(grid, "picks", "Pick file (CSV or JSON-lines)");
  grid->add_option("-o,--out", cli.out, "Catalog file (JSON-lines)");

  auto* eval = app.add_subcommand("eval", "Score a catalog against ground truth");
  add_path(eval, "stations", "Station CSV");
  add_path(eval, "picks", "Pick file with event ids");
  add_path(eval, "catalog", "Catalog file");
  add_path(eval, "truth", "Separate truth pick file");
  eval->add_flag("--sweep", cli.sweep, "Sweep n_min over 8..20 (catalog should be unfiltered)");
  eval->add_option("-o,--out", cli.out, "Metrics JSON (a CSV is written alongside)");

  auto* stress = app.add_subcommand("stress", "Sweep event density on synthetic sequences");
  add_path(stress, "stations", "Station CSV");
  add_path(stress, "velocity_model", "Velocity model file");
  add_path(stress, "checkpoint", "Model checkpoint");
  stress->add_flag("--oracle", cli.oracle, "Use ground-truth links instead of a model");
  stress->add_option("--events", cli.events, "Events per sequence");
  stress->add_option("-o,--out", cli.out, "Stress CSV (a JSON summary is written alongside)");

  std::string plot_in, plot_x = "mean_gap_s", plot_metric = "event_recall";
  auto* plot = app.add_subcommand("plot", "Render a stress or sweep CSV as SVG");
  plot->add_option("input", plot_in, "Tidy CSV from stress or eval")->required();
  plot->add_option("--x", plot_x, "X column");
  plot->add_option("--metric", plot_metric, "Metric to plot");
  plot->add_option("--title", cli.title, "Plot title");
  plot->add_option("-o,--out", cli.out, "SVG file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(cli);
    if (simulate->parsed()) return cmd_simulate(cli);
    if (trn->parsed()) return cmd_train(cli);
    if (assoc->parsed()) return cmd_associate(cli);
    if (grid->parsed()) return cmd_grid(cli);
    if (eval->parsed()) return cmd_eval(cli);
    if (stress->parsed()) return cmd_stress(cli);
    if (plot->parsed()) return cmd_plot(cli, plot_in, plot_x, plot_metric);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
