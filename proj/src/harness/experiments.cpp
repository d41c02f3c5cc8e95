#include "iob/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "iob/auth/protocol.hpp"
#include "iob/consensus/pbft.hpp"
#include "iob/consensus/run.hpp"
#include "iob/fss/protocol.hpp"

namespace iob::harness {

using nlohmann::json;

namespace {

sim::NodeInfo info(const NodeRecord& r) { return {r.lat, r.lon, r.capability}; }

void check(Context& ctx, bool ok, const std::string& what) {
  if (!ok) throw ExperimentCheckFailed("protocol check failed: " + what);
  ctx.checks.push_back(what);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Nearest-rank percentile.
double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::size_t nearest(std::span<const NodeRecord> nodes, const std::vector<std::size_t>& among, const NodeRecord& to) {
  std::size_t best = among.front();
  double d = 1e300;
  for (auto i : among) {
    const double x = cluster::haversine_m(nodes[i].lat, nodes[i].lon, to.lat, to.lon);
    if (x < d) {
      d = x;
      best = i;
    }
  }
  return best;
}

consensus::PbftConfig pbft_config(const Context& ctx) {
  consensus::PbftConfig pc;
  pc.view_timeout = from_seconds(ctx.cfg.get_double("consensus.view_timeout"));
  pc.sign_cost = ctx.costs.sign;
  pc.verify_cost = ctx.costs.verify;
  return pc;
}

// One PBFT round among `members` (indices into nodes) with nodes[proposer]
// as primary and a client co-located with it; seconds to the last commit.
consensus::RoundReport cluster_round(Context& ctx, std::span<const NodeRecord> nodes,
                                     const std::vector<std::size_t>& members, std::size_t proposer,
                                     std::uint64_t seed) {
  consensus::RoundSetup rs;
  for (auto i : members) rs.replicas.push_back(info(nodes[i]));
  rs.client = info(nodes[proposer]);
  rs.latency = ctx.latency;
  rs.seed = seed;
  rs.leader_offset = static_cast<std::size_t>(std::find(members.begin(), members.end(), proposer) - members.begin());
  rs.pbft = pbft_config(ctx);
  rs.payload_size = ctx.cfg.get_u64("consensus.payload_size");
  auto r = consensus::run_pbft(rs);
  check(ctx, r.client_done && r.all_executed && r.safe && r.chains_equal,
        "pbft round n=" + std::to_string(members.size()) + " committed safely");
  return r;
}

}  // namespace

Context make_context(const Config& cfg, std::uint64_t seed) {
  Context ctx;
  ctx.cfg = cfg;
  ctx.seed = seed;
  ctx.backend = cfg.get("crypto.backend");
  crypto::make_group(ctx.backend);  // rejects unknown backends early

  ctx.latency.base_s = cfg.get_double("sim.base_latency");
  ctx.latency.prop_s_per_km = cfg.get_double("sim.prop_coeff");
  ctx.latency.jitter_s = cfg.get_double("sim.jitter");
  ctx.latency.service_base_s = cfg.get_double("sim.service_base");
  ctx.latency.bandwidth_Bps = cfg.get_double("sim.bandwidth");
  if (ctx.latency.base_s <= 0) throw std::invalid_argument("sim.base_latency must be positive");
  if (ctx.latency.prop_s_per_km < 0 || ctx.latency.jitter_s < 0 || ctx.latency.service_base_s < 0 ||
      ctx.latency.bandwidth_Bps < 0)
    throw std::invalid_argument("sim.* latency terms must be nonnegative");
  ctx.costs.apply(cfg.values());

  ctx.dbscan.eps2 = cfg.get_double("cluster.eps2");
  ctx.dbscan.minpts = static_cast<std::uint32_t>(cfg.get_u64("cluster.minpts"));
  const auto& metric = cfg.get("cluster.metric");
  if (metric == "haversine") ctx.dbscan.metric = cluster::GeoMetric::haversine;
  else if (metric == "planar") ctx.dbscan.metric = cluster::GeoMetric::planar;
  else throw std::invalid_argument("cluster.metric must be haversine or planar");
  cluster::validate(ctx.dbscan);
  ctx.ca_fraction = cfg.get_double("cluster.ca_fraction");
  if (!(ctx.ca_fraction > 0 && ctx.ca_fraction <= 1)) throw std::invalid_argument("cluster.ca_fraction must be in (0, 1]");
  auto band = cfg.get_double_list("cluster.band");
  if (band.size() != 2 || !(0 < band[0] && band[0] <= band[1] && band[1] <= 1))
    throw std::invalid_argument("cluster.band must be lo,hi with 0 < lo <= hi <= 1");
  ctx.band_lo = band[0];
  ctx.band_hi = band[1];

  ctx.gossip.fanout = cfg.get_u64("gossip.fanout");
  ctx.gossip.ttl = static_cast<std::uint32_t>(cfg.get_u64("gossip.ttl"));
  ctx.gossip.eps3_m = cfg.get_double("gossip.eps3");
  ctx.gossip.form = gossip::parse_weight_form(cfg.get("gossip.weight_form"));
  ctx.gossip.probe_timeout = from_seconds(cfg.get_double("gossip.probe_timeout"));
  if (ctx.gossip.fanout == 0 || ctx.gossip.ttl == 0) throw std::invalid_argument("gossip.fanout and gossip.ttl must be positive");

  const Bbox box = parse_bbox(cfg.get("dataset.bbox"));
  auto cap = cfg.get_double_list("dataset.capability");
  if (cap.size() != 2 || !(cap[0] > 0 && cap[1] >= cap[0]))
    throw std::invalid_argument("dataset.capability must be lo,hi with 0 < lo <= hi");
  const CapabilityRange range{cap[0], cap[1]};
  const auto cap_seed = derive_seed(seed, "capability");
  IngestResult in;
  if (const auto& path = cfg.get("dataset.path"); !path.empty()) {
    ctx.dataset_mode = "gowalla";
    in = ingest_file(path, box, range, cap_seed);
  } else {
    ctx.dataset_mode = "synthetic";
    SyntheticParams sp;
    sp.locations = cfg.get_u64("synthetic.locations");
    sp.centers = cfg.get_u64("synthetic.centers");
    sp.spread_m = cfg.get_double("synthetic.spread_m");
    sp.background = cfg.get_double("synthetic.background");
    std::stringstream rows;
    write_synthetic(rows, box, sp, derive_seed(seed, "synthetic"));
    in = ingest(rows, box, range, cap_seed);
  }
  ctx.pool = std::move(in.nodes);
  ctx.ingest = in.stats;
  return ctx;
}

std::vector<ConsensusPoint> exp_consensus(Context& ctx) {
  std::vector<ConsensusPoint> out;
  const auto trials = ctx.cfg.get_u64("consensus.trials");
  const auto samples = ctx.cfg.get_u64("consensus.samples");
  if (trials == 0 || samples == 0) throw std::invalid_argument("consensus.trials and consensus.samples must be positive");
  for (auto n : ctx.cfg.get_u64_list("consensus.node_counts")) {
    if (n == 0) throw std::invalid_argument("consensus.node_counts entries must be positive");
    ConsensusPoint pt;
    pt.n = n;
    for (std::uint64_t smp = 0; smp < samples; ++smp) {
      const auto nodes = sample(ctx.pool, n, derive_seed(ctx.seed, "consensus-sample", {n, smp}));
      auto cal = calibrate_band(nodes, ctx.dbscan, ctx.band_lo, ctx.band_hi);
      auto tagged = nodes;
      const auto roles = cluster::assign_roles(tagged, cal.assignment, ctx.ca_fraction);
      const auto members = cal.assignment.members();
      SampleCalibration sc;
      sc.eps1_m = cal.params.eps1_m;
      sc.eps2 = cal.params.eps2;
      sc.max_fraction = cal.max_fraction;
      sc.clusters = cal.assignment.cluster_count;
      sc.noise = cal.assignment.noise_count();
      sc.single_cluster = sc.clusters <= 1;
      pt.samples.push_back(sc);

      std::vector<std::size_t> clustered;
      for (std::size_t i = 0; i < n; ++i)
        if (cal.assignment.labels[i] != cluster::kNoise) clustered.push_back(i);
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0);

      gossip::LeaderDirectory dir;
      if (sc.clusters > 0) {
        std::vector<gossip::LeaderInfo> li;
        for (int c = 0; c < sc.clusters; ++c) {
          const auto& l = nodes[roles.leader[static_cast<std::size_t>(c)]];
          li.push_back({static_cast<sim::NodeId>(c), c, l.lat, l.lon, l.capability});
        }
        dir = gossip::LeaderDirectory(std::move(li));
      }
      auto gp = ctx.gossip;
      if (gp.eps3_m <= 0) gp.eps3_m = 2 * cal.params.eps1_m;

      Rng pick(derive_seed(ctx.seed, "consensus-proposer", {n, smp}));
      const std::size_t first = pt.flat_time.size();
      for (std::uint64_t trial = 0; trial < trials; ++trial) {
        const auto& from = clustered.empty() ? all : clustered;
        const std::size_t proposer = from[pick() % from.size()];
        const auto round_seed = derive_seed(ctx.seed, "consensus-round", {n, smp, trial});

        auto flat = cluster_round(ctx, nodes, all, proposer, round_seed);
        pt.flat_time.push_back(to_seconds(flat.last_commit));
        pt.flat_msgs.push_back(static_cast<double>(flat.protocol_messages));

        if (clustered.empty()) {
          pt.clustered_time.push_back(pt.flat_time.back());
          pt.clustered_msgs.push_back(pt.flat_msgs.back());
          pt.global_time.push_back(pt.flat_time.back());
          pt.global_msgs.push_back(pt.flat_msgs.back());
          continue;
        }
        const int home = cal.assignment.labels[proposer];
        auto local = cluster_round(ctx, nodes, members[static_cast<std::size_t>(home)], proposer, round_seed);
        pt.clustered_time.push_back(to_seconds(local.last_commit));
        pt.clustered_msgs.push_back(static_cast<double>(local.protocol_messages));

        // every other cluster: gossip to its leader, then a local round led by it
        auto rep = gossip::disseminate(dir, static_cast<std::size_t>(home), gp, ctx.latency,
                                       derive_seed(ctx.seed, "consensus-gossip", {n, smp, trial}));
        check(ctx, rep.complete(), "gossip reached every leader (n=" + std::to_string(n) + ")");
        SimTime tail = 0;
        double msgs = static_cast<double>(local.protocol_messages + rep.messages);
        for (int c = 0; c < sc.clusters; ++c) {
          if (c == home) continue;
          const auto cu = static_cast<std::size_t>(c);
          auto r = cluster_round(ctx, nodes, members[cu], roles.leader[cu],
                                 derive_seed(ctx.seed, "consensus-remote", {n, smp, trial, cu}));
          tail = std::max(tail, rep.receipt_time[cu] + r.last_commit);
          msgs += static_cast<double>(r.protocol_messages);
        }
        pt.global_time.push_back(to_seconds(local.last_commit + tail));
        pt.global_msgs.push_back(msgs);
      }
      if (sc.clusters == 1 && sc.noise == 0)
        check(ctx,
              std::equal(pt.clustered_time.begin() + static_cast<std::ptrdiff_t>(first), pt.clustered_time.end(),
                         pt.flat_time.begin() + static_cast<std::ptrdiff_t>(first)),
              "one cluster: clustered time equals flat time");
    }
    out.push_back(std::move(pt));
  }
  return out;
}

namespace {

struct AuthScene {
  std::vector<NodeRecord> nodes;
  std::size_t user = 0;
  Calibration cal;
  std::vector<std::size_t> cas;  // clustered verifiers, indices into nodes
  std::size_t cluster_size = 0;
  bool fallback = false;
};

AuthScene auth_scene(const Context& ctx, std::size_t n) {
  AuthScene s;
  s.nodes = sample(ctx.pool, n, derive_seed(ctx.seed, "auth-sample", {n}));
  Rng pick(derive_seed(ctx.seed, "auth-user", {n}));
  s.user = static_cast<std::size_t>(pick() % n);
  s.cal = calibrate_cluster_size(s.nodes, s.user, ctx.cfg.get_u64("auth.cluster_target"), ctx.dbscan);
  auto tagged = s.nodes;
  const auto roles = cluster::assign_roles(tagged, s.cal.assignment, ctx.ca_fraction);
  const auto& labels = s.cal.assignment.labels;
  int home = labels[s.user];
  if (home == cluster::kNoise && s.cal.assignment.cluster_count > 0) {
    std::vector<std::size_t> clustered;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] != cluster::kNoise) clustered.push_back(i);
    home = labels[nearest(s.nodes, clustered, s.nodes[s.user])];
  }
  if (home == cluster::kNoise) {
    s.fallback = true;
    s.cas.resize(n);
    std::iota(s.cas.begin(), s.cas.end(), 0);
    s.cluster_size = n;
  } else {
    s.cas = roles.ca[static_cast<std::size_t>(home)];
    std::sort(s.cas.begin(), s.cas.end());
    s.cluster_size = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), home));
  }
  return s;
}

auth::AuthSetup auth_setup(const Context& ctx, const AuthScene& s, const std::vector<std::size_t>& cas,
                           std::size_t n) {
  auth::AuthSetup a;
  a.backend = ctx.backend;
  for (auto i : cas) a.ca.push_back(info(s.nodes[i]));
  a.entry_ca = static_cast<std::size_t>(std::find(cas.begin(), cas.end(), nearest(s.nodes, cas, s.nodes[s.user])) -
                                        cas.begin());
  a.users.push_back({info(s.nodes[s.user]), 0, false});
  a.latency = ctx.latency;
  a.seed = derive_seed(ctx.seed, "auth-run", {n});
  a.costs = ctx.costs;
  a.pbft.sign_cost = ctx.costs.sign;
  a.pbft.verify_cost = ctx.costs.verify;
  a.token_validity = from_seconds(ctx.cfg.get_double("auth.token_validity"));
  return a;
}

void check_auth(Context& ctx, const auth::AuthReport& r, const std::string& what) {
  bool ok = r.quiescent && r.verdicts_agree && r.consensus_safe && r.registries_agree;
  for (const auto& u : r.users) ok = ok && u.done && u.verdict == auth::Verdict::accept;
  check(ctx, ok, what);
}

}  // namespace

std::vector<AuthPoint> exp_auth(Context& ctx) {
  std::vector<AuthPoint> out;
  for (auto n : ctx.cfg.get_u64_list("auth.node_counts")) {
    if (n == 0) throw std::invalid_argument("auth.node_counts entries must be positive");
    const auto scene = auth_scene(ctx, n);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (const char* mode : {"unclustered", "clustered"}) {
      const bool clustered = std::string_view(mode) == "clustered";
      auto setup = auth_setup(ctx, scene, clustered ? scene.cas : all, n);
      auto r = auth::run_auth(setup);
      check_auth(ctx, r, std::string("auth ") + mode + " n=" + std::to_string(n) + " accepted everywhere");
      AuthPoint p;
      p.n = n;
      p.mode = mode;
      p.time = to_seconds(r.users[0].latency);
      p.q = r.q;
      p.t = r.t;
      if (clustered) {
        p.eps1_m = scene.cal.params.eps1_m;
        p.cluster_size = scene.cluster_size;
        p.fallback = scene.fallback;
      }
      out.push_back(p);
    }
  }
  return out;
}

std::vector<MultiuserPoint> exp_auth_multiuser(Context& ctx) {
  std::vector<MultiuserPoint> out;
  const auto n = ctx.cfg.get_u64("auth_multiuser.n");
  if (n == 0) throw std::invalid_argument("auth_multiuser.n must be positive");
  const double spread = ctx.cfg.get_double("auth_multiuser.spread");
  if (spread < 0) throw std::invalid_argument("auth_multiuser.spread must be nonnegative");
  const auto scene = auth_scene(ctx, n);
  std::vector<std::size_t> members;
  const auto& labels = scene.cal.assignment.labels;
  const int home = scene.fallback ? cluster::kNoise : labels[scene.cas.front()];
  for (std::size_t i = 0; i < n; ++i)
    if (scene.fallback || labels[i] == home) members.push_back(i);

  double single = -1;
  for (auto u : ctx.cfg.get_u64_list("auth_multiuser.users")) {
    MultiuserPoint p;
    p.users = u;
    if (u == 0) {
      out.push_back(p);
      continue;
    }
    auto setup = auth_setup(ctx, scene, scene.cas, n);
    Rng pick(derive_seed(ctx.seed, "multiuser-users", {u}));
    for (std::uint64_t k = 1; k < u; ++k) {
      const auto& at = scene.nodes[members[pick() % members.size()]];
      setup.users.push_back({info(at), from_seconds(spread * uniform01(pick)), false});
    }
    auto r = auth::run_auth(setup);
    check_auth(ctx, r, "multiuser u=" + std::to_string(u) + " all accepted");
    for (const auto& o : r.users) p.times.push_back(to_seconds(o.latency));
    p.mean = mean(p.times);
    p.p95 = percentile(p.times, 0.95);
    if (u == 1) single = p.mean;
    if (single > 0)
      check(ctx, p.mean <= static_cast<double>(u) * single * (1 + 1e-9),
            "multiuser u=" + std::to_string(u) + " mean grows at most linearly");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<AccessPoint> exp_access(Context& ctx) {
  std::vector<AccessPoint> out;
  const auto n = ctx.cfg.get_u64("access.n");
  const auto servers = ctx.cfg.get_u64("access.servers");
  const auto threshold = static_cast<std::uint32_t>(ctx.cfg.get_u64("access.threshold"));
  const auto nodes = sample(ctx.pool, n, derive_seed(ctx.seed, "access-sample", {n}));
  auto cal = calibrate_band(nodes, ctx.dbscan, ctx.band_lo, ctx.band_hi);
  auto tagged = nodes;
  const auto roles = cluster::assign_roles(tagged, cal.assignment, ctx.ca_fraction);
  // the user sits at the leader of the largest cluster; its CA nodes verify
  std::size_t home = 0;
  const auto members = cal.assignment.members();
  for (std::size_t c = 1; c < members.size(); ++c)
    if (members[c].size() > members[home].size()) home = c;
  if (members.empty()) throw std::invalid_argument("access: no cluster found to host the verifiers");
  auto cas = roles.ca[home];
  if (servers > 0 && cas.size() > servers) cas.resize(servers);
  if (cas.size() < 2) throw std::invalid_argument("access: the user's cluster has fewer than two CA nodes");

  fss::AccessSetup base;
  base.backend = ctx.backend;
  base.user = info(nodes[roles.leader[home]]);
  for (auto i : cas) base.verifiers.push_back(info(nodes[i]));
  base.threshold = threshold;
  base.latency = ctx.latency;
  base.costs = ctx.costs;
  // one transport stream for every point, so curves differ only by their inputs
  base.seed = derive_seed(ctx.seed, "access-run");

  for (auto size : ctx.cfg.get_u64_list("access.item_sizes")) {
    for (auto N : ctx.cfg.get_u64_list("access.items")) {
      if (N == 0) throw std::invalid_argument("access.items entries must be positive");
      auto a = base;
      a.N = static_cast<std::uint32_t>(N);
      a.item_size = size;
      a.key_seed = derive_seed(ctx.seed, "access-keys", {N});
      Rng pick(derive_seed(ctx.seed, "access-category", {N}));
      a.category = 1 + static_cast<std::uint32_t>(pick() % N);
      auto r = fss::run_access(a);
      check(ctx, r.done && r.verdict == fss::AccessVerdict::accept && r.verifiers_agree,
            "access N=" + std::to_string(N) + " size=" + std::to_string(size) + " accepted");
      if (N >= 2) {
        a.wrong_key = true;
        auto w = fss::run_access(a);
        check(ctx, w.verdict == fss::AccessVerdict::reject && w.verifiers_agree,
              "access N=" + std::to_string(N) + " wrong key rejected");
      }
      out.push_back({a.N, size, to_seconds(r.overhead), to_seconds(r.keygen_time), to_seconds(r.round_time)});
    }
  }
  return out;
}

ExperimentOutput run_experiment(std::string_view name, const Config& cfg, std::uint64_t seed) {
  if (std::find(std::begin(kExperiments), std::end(kExperiments), name) == std::end(kExperiments))
    throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
  Context ctx = make_context(cfg, seed);
  const std::string hash = cfg.hash();
  const std::string tail = "," + hash + "," + std::to_string(seed) + "\n";

  json meta;
  meta["experiment"] = name;
  meta["seed"] = seed;
  meta["config_hash"] = hash;
  meta["config"] = cfg.values();
  meta["dataset"] = {{"mode", ctx.dataset_mode},
                     {"nodes", ctx.pool.size()},
                     {"rows", ctx.ingest.rows},
                     {"malformed", ctx.ingest.malformed},
                     {"outside_bbox", ctx.ingest.outside},
                     {"duplicate_checkins", ctx.ingest.duplicates}};
  meta["dbscan"] = {{"eps2", ctx.dbscan.eps2},
                    {"minpts", ctx.dbscan.minpts},
                    {"metric", ctx.dbscan.metric == cluster::GeoMetric::haversine ? "haversine" : "planar"},
                    {"ca_fraction", ctx.ca_fraction}};
  meta["gossip"] = {{"fanout", ctx.gossip.fanout},
                    {"ttl", ctx.gossip.ttl},
                    {"eps3_m", ctx.gossip.eps3_m > 0 ? json(ctx.gossip.eps3_m) : json("2*eps1")},
                    {"weight_form", gossip::to_string(ctx.gossip.form)}};
  meta["costs_ns"] = ctx.costs.to_map();

  std::ostringstream csv;
  if (name == "consensus") {
    auto pts = exp_consensus(ctx);
    csv << "n,mode,time,msg_count,config_hash,seed\n";
    json cal = json::array();
    for (const auto& p : pts) {
      const std::pair<const char*, std::pair<const std::vector<double>*, const std::vector<double>*>> modes[] = {
          {"flat", {&p.flat_time, &p.flat_msgs}},
          {"clustered", {&p.clustered_time, &p.clustered_msgs}},
          {"clustered_global", {&p.global_time, &p.global_msgs}}};
      for (const auto& [m, v] : modes)
        csv << p.n << ',' << m << ',' << fmt("%.9f", mean(*v.first)) << ',' << fmt("%.1f", mean(*v.second)) << tail;
      json smp = json::array();
      for (const auto& c : p.samples)
        smp.push_back({{"eps1_m", c.eps1_m},
                       {"eps2", c.eps2},
                       {"max_cluster_fraction", c.max_fraction},
                       {"clusters", c.clusters},
                       {"noise", c.noise},
                       {"single_cluster", c.single_cluster},
                       {"eps3_m", ctx.gossip.eps3_m > 0 ? ctx.gossip.eps3_m : 2 * c.eps1_m}});
      cal.push_back({{"n", p.n},
                     {"samples", smp},
                     {"clustered_over_flat", mean(p.clustered_time) / mean(p.flat_time)}});
    }
    meta["calibration"] = cal;
    meta["time_definition"] = "request at the proposer to the last commit in its cluster (flat: all nodes); "
                              "clustered_global adds gossip to every leader and each cluster's local round";
    meta["message_ratio_60pct"] = static_cast<double>(consensus::message_count(40)) /
                                  static_cast<double>(consensus::message_count(100));
  } else if (name == "auth") {
    auto pts = exp_auth(ctx);
    csv << "n,mode,time,config_hash,seed\n";
    json cal = json::array();
    for (const auto& p : pts) {
      csv << p.n << ',' << p.mode << ',' << fmt("%.9f", p.time) << tail;
      cal.push_back({{"n", p.n}, {"mode", p.mode}, {"q", p.q}, {"t", p.t}});
      if (p.mode == "clustered") {
        cal.back()["eps1_m"] = p.eps1_m;
        cal.back()["user_cluster_size"] = p.cluster_size;
        cal.back()["fallback_all_nodes"] = p.fallback;
      }
    }
    meta["calibration"] = cal;
    meta["time_definition"] = "user request to f+1 matching session tokens";
  } else if (name == "auth-multiuser") {
    auto pts = exp_auth_multiuser(ctx);
    csv << "users,mean_time,p95_time,config_hash,seed\n";
    for (const auto& p : pts) {
      if (p.users == 0) csv << "0,NA,NA" << tail;
      else csv << p.users << ',' << fmt("%.9f", p.mean) << ',' << fmt("%.9f", p.p95) << tail;
    }
    meta["time_definition"] = "per user: request to f+1 matching session tokens; all users share one cluster";
  } else {
    auto pts = exp_access(ctx);
    csv << "N,item_size,overhead,config_hash,seed\n";
    for (const auto& p : pts) csv << p.N << ',' << p.item_size << ',' << fmt("%.9f", p.overhead) << tail;
    meta["transport_delta_s_per_byte"] = ctx.latency.bandwidth_Bps > 0 ? 1.0 / ctx.latency.bandwidth_Bps : 0.0;
    meta["time_definition"] = "key ceremony compute plus request to verdict (and item) at the user";
  }
  meta["checks_passed"] = ctx.checks.size();
  return {std::string(name), csv.str(), meta.dump(2) + "\n"};
}

void write_output(const ExperimentOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& file, const std::string& text) {
    std::ofstream f(std::filesystem::path(dir) / file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + file + " in " + dir);
    f << text;
  };
  write(out.name + ".csv", out.csv);
  write(out.name + ".metadata.json", out.metadata);
}

}  // namespace iob::harness
