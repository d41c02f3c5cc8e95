#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "iob/harness/config.hpp"
#include "iob/harness/dataset.hpp"
#include "iob/harness/experiments.hpp"

using namespace iob;
using namespace iob::harness;

namespace {

Config parse(const std::string& s) {
  std::istringstream is(s);
  return Config::parse(is, "test");
}

}  // namespace

TEST_CASE("config: parsing, errors, hash") {
  auto c = parse("# comment\n a = 1 \nb=x,y  # trailing\n\nlist = 1, 2,3\n");
  CHECK(c.get("a") == "1");
  CHECK(c.get("b") == "x,y");
  CHECK(c.get_u64_list("list") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK_THROWS_AS(parse("novalue\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(" = 3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("a = 1\na = 2\n"), std::invalid_argument);
  CHECK_THROWS_AS(c.get("missing"), std::out_of_range);
  CHECK_THROWS_AS(c.get_u64("b"), std::invalid_argument);
  CHECK_THROWS_AS(parse("x = -1\n").get_u64("x"), std::invalid_argument);
  CHECK(parse("x = -1\n").get_int("x") == -1);
  CHECK_THROWS_AS(parse("x = 1.5e\n").get_double("x"), std::invalid_argument);

  // hash is order-independent and sensitive to every value
  CHECK(parse("a=1\nb=2\n").hash() == parse("b=2\na=1\n").hash());
  CHECK(parse("a=1\nb=2\n").hash() != parse("a=1\nb=3\n").hash());
  CHECK(parse("a=1\n").hash().size() == 64);

  auto d = default_config();
  CHECK_THROWS_AS(d.merge(parse("no.such.key = 1\n")), std::invalid_argument);
  d.merge(parse("sim.seed = 9\n"));
  CHECK(d.get_u64("sim.seed") == 9);
  d.merge(parse("extra.thing = 1\n"), {"extra."});
  CHECK(d.has("extra.thing"));
}

TEST_CASE("ingest: filtering and counting") {
  Bbox box;
  std::istringstream rows(
      "1\t2010-10-19T23:55:27Z\t39.9\t116.4\t500\n"
      "2\t2010-10-20T01:00:00Z\t39.95\t116.45\t500\n"  // repeat location: first row wins
      "3\t2010-10-20T01:00:00Z\t40.0\t116.5\t20\n"
      "4\t2010-10-20T01:00:00Z\t35.0\t116.5\t21\n"     // outside the bbox
      "5\t2010-10-20T01:00:00Z\tabc\t116.5\t22\n"      // malformed
      "6\t2010-10-20T01:00:00Z\t39.9\t116.4\n"         // too few fields
      "7\t2010-10-20T01:00:00Z\t39.9\t116.4\tx\n"
      "\n");
  auto r = ingest(rows, box, {1, 10}, 3);
  CHECK(r.stats.rows == 7);
  CHECK(r.stats.malformed == 3);
  CHECK(r.stats.outside == 1);
  CHECK(r.stats.duplicates == 1);
  REQUIRE(r.nodes.size() == 2);
  CHECK(r.nodes[0].id == 20);
  CHECK(r.nodes[1].id == 500);
  CHECK(r.nodes[1].lat == 39.9);
  for (const auto& n : r.nodes) CHECK((n.capability >= 1 && n.capability <= 10));

  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(ingest(empty, box, {1, 10}, 1), "no nodes", std::runtime_error);
  std::istringstream outside("1\tt\t10\t10\t1\n");
  CHECK_THROWS_WITH_AS(ingest(outside, box, {1, 10}, 1), "no nodes", std::runtime_error);
  std::istringstream any("1\tt\t40\t116\t1\n");
  CHECK_THROWS_AS(ingest(any, box, {5, 1}, 1), std::invalid_argument);
}

TEST_CASE("bbox parsing") {
  auto b = parse_bbox("41.05,39.433333,117.5,115.416666");
  CHECK(b.lat_min == 39.433333);
  CHECK(b.lon_max == 117.5);
  CHECK_THROWS(parse_bbox("1,2,3"));
  CHECK_THROWS(parse_bbox("1,2,x,4"));
  CHECK_THROWS(parse_bbox("95,2,3,4"));
}

TEST_CASE("synthetic data: deterministic, inside the bbox, ingestible") {
  Bbox box;
  SyntheticParams p;
  p.locations = 400;
  std::ostringstream a, b, c;
  write_synthetic(a, box, p, 5);
  write_synthetic(b, box, p, 5);
  write_synthetic(c, box, p, 6);
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
  std::istringstream in(a.str());
  auto r = ingest(in, box, {1, 10}, 1);
  CHECK(r.nodes.size() == 400);
  CHECK(r.stats.malformed == 0);
  CHECK(r.stats.outside == 0);
  CHECK(r.stats.rows >= 400);
  CHECK(r.stats.duplicates == r.stats.rows - 400);
}

TEST_CASE("sample: distinct, ascending, reproducible") {
  std::vector<NodeRecord> pool;
  for (std::uint32_t i = 0; i < 50; ++i) pool.push_back({i * 2 + 1, 40, 116, 5});
  auto s = sample(pool, 20, 9);
  CHECK(s.size() == 20);
  CHECK(std::is_sorted(s.begin(), s.end(), [](const auto& x, const auto& y) { return x.id < y.id; }));
  std::set<std::uint32_t> ids;
  for (const auto& n : s) ids.insert(n.id);
  CHECK(ids.size() == 20);
  auto again = sample(pool, 20, 9);
  CHECK(std::equal(s.begin(), s.end(), again.begin(), [](const auto& x, const auto& y) { return x.id == y.id; }));
  CHECK(sample(pool, 50, 1).size() == 50);
  CHECK_THROWS_AS(sample(pool, 51, 1), std::invalid_argument);
}

TEST_CASE("calibration lands in the band and on the target size") {
  auto ctx = make_context(default_config(), 1);
  for (std::uint64_t sd = 1; sd <= 3; ++sd) {
    auto nodes = sample(ctx.pool, 100, sd);
    auto cal = calibrate_band(nodes, ctx.dbscan, 0.40, 0.72);
    CHECK(cal.max_fraction >= 0.40);
    CHECK(cal.max_fraction <= 0.72);
    CHECK(cal.max_fraction == doctest::Approx(double(cal.assignment.max_cluster_size()) / 100));
  }
  auto nodes = sample(ctx.pool, 500, 4);
  auto cal = calibrate_cluster_size(nodes, 0, 64, ctx.dbscan);
  const int label = cal.assignment.labels[0];
  if (label != cluster::kNoise)
    CHECK(cal.target_size == cal.assignment.members()[static_cast<std::size_t>(label)].size());
  CHECK(cal.target_size > 16);
  CHECK(cal.target_size < 256);
}

TEST_CASE("experiments: config validation and small runs") {
  auto cfg = default_config();
  CHECK_THROWS_AS(run_experiment("nope", cfg, 1), std::invalid_argument);

  auto bad = cfg;
  bad.set("consensus.trials", "0");
  CHECK_THROWS_AS(run_experiment("consensus", bad, 1), std::invalid_argument);
  bad = cfg;
  bad.set("cluster.metric", "manhattan");
  CHECK_THROWS_AS(make_context(bad, 1), std::invalid_argument);

  SUBCASE("single cluster makes clustered equal flat") {
    auto c = cfg;
    c.set("consensus.node_counts", "4");
    c.set("consensus.samples", "1");
    c.set("consensus.trials", "3");
    auto ctx = make_context(c, 1);
    auto pts = exp_consensus(ctx);
    REQUIRE(pts.size() == 1);
    REQUIRE(pts[0].samples.size() == 1);
    CHECK(pts[0].samples[0].single_cluster);
    CHECK(pts[0].clustered_time == pts[0].flat_time);
    CHECK(pts[0].global_time == pts[0].flat_time);
  }

  SUBCASE("multi-user: zero users gives an NA row") {
    auto c = cfg;
    c.set("auth_multiuser.n", "200");
    c.set("auth_multiuser.users", "0,1,4");
    auto out = run_experiment("auth-multiuser", c, 2);
    std::istringstream lines(out.csv);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header.rfind("users,mean_time,p95_time", 0) == 0);
    CHECK(first.rfind("0,NA,NA,", 0) == 0);
    CHECK(out.metadata.find("\"config_hash\"") != std::string::npos);
  }

  SUBCASE("every CSV row carries config hash and seed") {
    auto c = cfg;
    c.set("access.items", "8,16");
    auto out = run_experiment("access", c, 4);
    std::istringstream lines(out.csv);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
      ++rows;
      CHECK(line.find("," + c.hash() + ",4") != std::string::npos);
    }
    CHECK(rows == 4);
  }
}
