#include "iob/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "iob/crypto/hash.hpp"
#include "iob/sim/cost_model.hpp"

namespace iob::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, const std::string& v, const char* what) {
  throw std::invalid_argument(std::string(key) + ": '" + v + "' is not " + what);
}

double to_double(std::string_view key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  bad_value(key, v, "a number");
}

std::uint64_t to_u64(std::string_view key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a nonnegative integer");
  return x;
}

}  // namespace

Config Config::parse(std::istream& is, std::string_view origin) {
  Config c;
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const auto where = std::string(origin) + ":" + std::to_string(no);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected key = value");
    auto key = trim(std::string_view(t).substr(0, eq));
    auto value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw std::invalid_argument(where + ": empty key");
    if (!c.kv_.emplace(key, value).second) throw std::invalid_argument(where + ": repeated key " + key);
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  return parse(f, path);
}

const std::string& Config::get(std::string_view key) const {
  auto it = kv_.find(std::string(key));
  if (it == kv_.end()) throw std::out_of_range("missing config key " + std::string(key));
  return it->second;
}

double Config::get_double(std::string_view key) const { return to_double(key, get(key)); }

std::int64_t Config::get_int(std::string_view key) const {
  const auto& v = get(key);
  std::int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return x;
}

std::uint64_t Config::get_u64(std::string_view key) const { return to_u64(key, get(key)); }

std::vector<std::uint64_t> Config::get_u64_list(std::string_view key) const {
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(get(key))) out.push_back(to_u64(key, s));
  return out;
}

std::vector<double> Config::get_double_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& s : split_list(get(key))) out.push_back(to_double(key, s));
  return out;
}

void Config::merge(const Config& other, const std::vector<std::string>& open_prefixes) {
  for (const auto& [k, v] : other.kv_) {
    bool open = false;
    for (const auto& p : open_prefixes) open = open || k.rfind(p, 0) == 0;
    if (!open && !kv_.count(k)) throw std::invalid_argument("unknown config key " + k);
    kv_[k] = v;
  }
}

std::string Config::hash() const {
  crypto::Sha256 h;
  for (const auto& [k, v] : kv_) h.update(k).update("=").update(v).update("\n");
  return to_hex(h.finish());
}

Config default_config() {
  std::istringstream defaults(R"(
dataset.path =
dataset.bbox = 39.433333,41.05,115.416666,117.5
dataset.capability = 1,10
synthetic.locations = 5349
synthetic.centers = 23
synthetic.spread_m = 2500
synthetic.background = 0.1

crypto.backend = prod

sim.seed = 1
sim.base_latency = 0.001
sim.prop_coeff = 0.000005
sim.jitter = 0.0005
sim.service_base = 0.0001
sim.bandwidth = 12500000

cluster.eps2 = 0.5
cluster.minpts = 4
cluster.metric = haversine
cluster.ca_fraction = 0.25
cluster.band = 0.40,0.72

consensus.node_counts = 25,50,75,100,125
consensus.samples = 5
consensus.trials = 20
consensus.payload_size = 256
consensus.view_timeout = 0.5

gossip.fanout = 3
gossip.ttl = 10
gossip.eps3 = 0
gossip.weight_form = mean
gossip.probe_timeout = 0.05

auth.node_counts = 100,500,1000,2000
auth.cluster_target = 64
auth.token_validity = 86400

auth_multiuser.n = 500
auth_multiuser.users = 0,1,2,4,8,16,32
auth_multiuser.spread = 0

access.n = 100
access.items = 8,16,32,64,128,256,512,1024
access.item_sizes = 512,1024
access.servers = 4
access.threshold = 0
)");
  Config c = Config::parse(defaults, "defaults");
  for (const auto& [k, v] : sim::CostModel{}.to_map()) c.set(k, std::to_string(v));
  return c;
}

}  // namespace iob::harness
