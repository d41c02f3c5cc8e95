#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "iob/cluster/dbscan.hpp"
#include "iob/crypto/group.hpp"
#include "iob/harness/config.hpp"
#include "iob/harness/dataset.hpp"
#include "iob/harness/experiments.hpp"
#include "iob/sim/cost_model.hpp"

using namespace iob;

namespace {

int do_ingest(const std::string& input, const std::string& bbox, const std::string& out, const std::string& cap,
              std::uint64_t seed) {
  harness::Config c;
  c.set("cap", cap);
  auto range = c.get_double_list("cap");
  if (range.size() != 2) throw std::invalid_argument("--capability needs lo,hi");
  auto r = harness::ingest_file(input, harness::parse_bbox(bbox), {range[0], range[1]}, seed);
  if (r.stats.malformed) std::cerr << "warning: skipped " << r.stats.malformed << " malformed rows\n";
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  cluster::write_nodes_csv(f, r.nodes);
  std::cerr << r.nodes.size() << " nodes from " << r.stats.rows << " rows (" << r.stats.outside
            << " outside the bbox, " << r.stats.duplicates << " repeat check-ins)\n";
  return 0;
}

int do_synth(const std::string& bbox, const std::string& out, std::uint64_t seed, harness::SyntheticParams p) {
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  harness::write_synthetic(f, harness::parse_bbox(bbox), p, seed);
  return 0;
}

int do_cluster(const std::string& nodes_path, cluster::DbscanParams p, const std::string& metric, double ca_fraction,
               const std::string& out) {
  if (metric == "planar") p.metric = cluster::GeoMetric::planar;
  else if (metric != "haversine") throw std::invalid_argument("--metric must be haversine or planar");
  std::ifstream in(nodes_path);
  if (!in) throw std::runtime_error("cannot open " + nodes_path);
  auto nodes = cluster::read_nodes_csv(in);
  auto a = cluster::cluster(nodes, p);
  cluster::assign_roles(nodes, a, ca_fraction);
  if (out.empty() || out == "-") {
    cluster::write_assignment_csv(std::cout, nodes, a);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    cluster::write_assignment_csv(f, nodes, a);
  }
  std::cerr << a.cluster_count << " clusters, " << a.noise_count() << " noise, largest " << a.max_cluster_size()
            << " of " << nodes.size() << "\n";
  return 0;
}

int do_exp(const std::string& name, const std::string& config, const std::vector<std::string>& sets,
           std::optional<std::uint64_t> seed, const std::string& out) {
  auto cfg = harness::default_config();
  if (!config.empty()) cfg.merge(harness::Config::load(config));
  harness::Config extra;
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + s);
    extra.set(s.substr(0, eq), s.substr(eq + 1));
  }
  cfg.merge(extra);
  const std::uint64_t sd = seed ? *seed : cfg.get_u64("sim.seed");
  auto result = harness::run_experiment(name, cfg, sd);
  harness::write_output(result, out);
  std::cout << result.csv;
  return 0;
}

int do_calibrate(const std::string& backend, int rounds) {
  auto g = crypto::make_group(backend);
  auto c = sim::measure(*g, rounds);
  std::cout << "# measured on this machine, backend " << backend << " (ns)\n";
  for (const auto& [k, v] : c.to_map()) std::cout << k << " = " << v << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iob: clustered blockchain identity and access experiments"};
  app.require_subcommand(1);

  std::string input, bbox = "39.433333,41.05,115.416666,117.5", out, cap = "1,10";
  std::uint64_t seed = 1;
  auto* ingest = app.add_subcommand("ingest", "Gowalla check-ins -> node CSV (id,lat,lon,capability)");
  ingest->add_option("--input", input, "tab-separated check-in file")->required();
  ingest->add_option("--bbox", bbox, "lat1,lat2,lon1,lon2");
  ingest->add_option("--out", out, "node CSV to write")->required();
  ingest->add_option("--capability", cap, "uniform capability range lo,hi");
  ingest->add_option("--seed", seed, "capability draw seed");

  harness::SyntheticParams sp;
  auto* synth = app.add_subcommand("synth", "write synthetic check-ins in the Gowalla layout");
  synth->add_option("--bbox", bbox, "lat1,lat2,lon1,lon2");
  synth->add_option("--out", out, "file to write")->required();
  synth->add_option("--seed", seed);
  synth->add_option("--locations", sp.locations);
  synth->add_option("--centers", sp.centers);
  synth->add_option("--spread", sp.spread_m, "Gaussian std-dev, metres");
  synth->add_option("--background", sp.background, "fraction of uniform locations");

  std::string nodes_path, metric = "haversine";
  cluster::DbscanParams dp;
  double ca_fraction = 0.25;
  auto* clus = app.add_subcommand("cluster", "dual-metric DBSCAN -> node_id,cluster_id,role");
  clus->add_option("--nodes", nodes_path, "node CSV from ingest")->required();
  clus->add_option("--eps1", dp.eps1_m, "spatial radius, metres")->required();
  clus->add_option("--eps2", dp.eps2, "capability radius")->required();
  clus->add_option("--minpts", dp.minpts)->required();
  clus->add_option("--metric", metric, "haversine or planar");
  clus->add_option("--ca-fraction", ca_fraction);
  clus->add_option("--out", out, "assignment CSV (default stdout)");

  std::string exp_name, config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> exp_seed;
  auto* exp = app.add_subcommand("exp", "run an experiment");
  exp->add_option("experiment", exp_name, "consensus | auth | auth-multiuser | access")
      ->required()
      ->check(CLI::IsMember({"consensus", "auth", "auth-multiuser", "access"}));
  exp->add_option("--config", config, "key = value file");
  exp->add_option("--set", sets, "override one key: key=value");
  exp->add_option("--seed", exp_seed, "root seed (default sim.seed)");
  exp->add_option("--out", out, "output directory")->required();

  std::string backend = "prod";
  int rounds = 7;
  auto* cal = app.add_subcommand("calibrate", "time crypto primitives; prints cost.* config lines");
  cal->add_option("--backend", backend);
  cal->add_option("--rounds", rounds);

  app.add_subcommand("config", "print the default experiment config");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ingest) return do_ingest(input, bbox, out, cap, seed);
    if (*synth) return do_synth(bbox, out, seed, sp);
    if (*clus) return do_cluster(nodes_path, dp, metric, ca_fraction, out);
    if (*exp) return do_exp(exp_name, config, sets, exp_seed, out);
    if (*cal) return do_calibrate(backend, rounds);
    for (const auto& [k, v] : harness::default_config().values()) std::cout << k << " = " << v << "\n";
    return 0;
  } catch (const harness::ExperimentCheckFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
