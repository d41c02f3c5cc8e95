#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "iob/cluster/dbscan.hpp"
#include "iob/util/rng.hpp"
#include "support/dbscan_oracle.hpp"

using namespace iob;
using namespace iob::cluster;
using namespace iob::testsupport;

TEST_CASE("haversine against a hand value") {
  CHECK(haversine_m(0, 0, 0, 1) == doctest::Approx(111194.93).epsilon(1e-7));
  CHECK(haversine_m(39.9, 116.4, 39.9, 116.4) == 0);
  CHECK(planar_m(0, 0, 0, 1) == doctest::Approx(111194.93).epsilon(1e-7));
  CHECK(haversine_m(39.43, 115.41, 41.05, 117.5) == doctest::Approx(oracle_haversine(39.43, 115.41, 41.05, 117.5)));
}

TEST_CASE("dual_neighborhood: trivial cases and brute-force oracle") {
  DbscanParams p{1000, 1.0, 2};
  std::vector<NodeRecord> one{{5, 40, 116, 3}};
  CHECK(dual_neighborhood(0, one, p) == std::vector<std::size_t>{0});

  std::vector<NodeRecord> pair{{1, 40, 116, 1}, {2, 40, 116, 3}};
  CHECK(dual_neighborhood(0, pair, p) == std::vector<std::size_t>{0});
  CHECK(dual_neighborhood(1, pair, p) == std::vector<std::size_t>{1});

  Rng rng(5);
  for (int inst = 0; inst < 20; ++inst) {
    auto v = random_nodes(rng, 50);
    auto q = random_params(rng);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::vector<std::size_t> want;
      for (std::size_t j = 0; j < v.size(); ++j)
        if (near(v[i], v[j], q)) want.push_back(j);
      auto got = dual_neighborhood(i, v, q);
      std::sort(got.begin(), got.end());
      CHECK(got == want);
      for (auto j : got) {
        auto back = dual_neighborhood(j, v, q);
        CHECK(std::find(back.begin(), back.end(), i) != back.end());
      }
    }
  }
}

TEST_CASE("cluster: trivial cases") {
  DbscanParams p{1000, 1.0, 3};
  auto a = iob::cluster::cluster({}, p);
  CHECK(a.cluster_count == 0);
  CHECK(a.labels.empty());

  std::vector<NodeRecord> same;
  for (std::uint32_t i = 0; i < 5; ++i) same.push_back({i, 40, 116, 2});
  a = iob::cluster::cluster(same, p);
  CHECK(a.cluster_count == 1);
  CHECK(a.noise_count() == 0);
  CHECK(a.max_cluster_size() == 5);
}

TEST_CASE("cluster: three planted blobs in distinct capability bands") {
  Rng rng(17);
  std::normal_distribution<double> nd(0, 0.004);
  std::vector<NodeRecord> v;
  const double centre[3][2] = {{39.9, 116.3}, {40.2, 116.6}, {39.6, 116.9}};
  for (std::uint32_t i = 0; i < 200; ++i) {
    const int b = static_cast<int>(i % 3);
    v.push_back({i, centre[b][0] + nd(rng), centre[b][1] + nd(rng), 2.0 + 3.0 * b + 0.5 * uniform01(rng)});
  }
  DbscanParams p{1500, 1.0, 4};
  auto a = iob::cluster::cluster(v, p);
  CHECK(a.cluster_count == 3);
  CHECK(same_partition(a.labels, reference(v, p)));
}

TEST_CASE("cluster matches the reference on 50 random instances up to 200 nodes") {
  Rng rng(23);
  for (int inst = 0; inst < 50; ++inst) {
    auto v = random_nodes(rng, 1 + rng() % 200);
    auto p = random_params(rng);
    auto a = iob::cluster::cluster(v, p);
    auto ref = reference(v, p);
    CHECK(same_partition(a.labels, ref));
    CHECK(a.labels == ref);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (a.is_core[i]) CHECK(dual_neighborhood(i, v, p).size() >= p.minpts);
    for (int l : a.labels) CHECK(l < a.cluster_count);
  }
}

TEST_CASE("partition invariant under input permutation") {
  Rng rng(29);
  for (int inst = 0; inst < 5; ++inst) {
    auto v = random_nodes(rng, 150);
    auto p = random_params(rng);
    auto base = iob::cluster::cluster(v, p);
    std::map<std::uint32_t, int> by_id;
    for (std::size_t i = 0; i < v.size(); ++i) by_id[v[i].id] = base.labels[i];
    for (int s = 0; s < 10; ++s) {
      auto w = v;
      std::shuffle(w.begin(), w.end(), rng);
      auto a = iob::cluster::cluster(w, p);
      std::vector<int> x, y;
      for (std::size_t i = 0; i < w.size(); ++i) {
        x.push_back(a.labels[i]);
        y.push_back(by_id[w[i].id]);
      }
      CHECK(x == y);
    }
  }
}

TEST_CASE("enlarging either radius never adds noise") {
  Rng rng(31);
  for (int inst = 0; inst < 20; ++inst) {
    auto v = random_nodes(rng, 120);
    auto p = random_params(rng);
    const auto base = iob::cluster::cluster(v, p).noise_count();
    auto p1 = p;
    p1.eps1_m *= 1.5;
    auto p2 = p;
    p2.eps2 *= 1.5;
    CHECK(iob::cluster::cluster(v, p1).noise_count() <= base);
    CHECK(iob::cluster::cluster(v, p2).noise_count() <= base);
  }
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate(NodeRecord{0, 91, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(NodeRecord{0, 0, 181, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(NodeRecord{0, 0, 0, -1}), std::invalid_argument);
  CHECK_NOTHROW(validate(NodeRecord{0, -90, 180, 0}));
  CHECK_THROWS_AS(validate(DbscanParams{0, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(DbscanParams{1, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(DbscanParams{1, 1, 0}), std::invalid_argument);
}

TEST_CASE("roles and CSV output") {
  std::vector<NodeRecord> v;
  for (std::uint32_t i = 0; i < 8; ++i) v.push_back({i, 40 + 0.0001 * i, 116, 1.0 + i * 0.1});
  v.push_back({100, 10, 10, 5});
  auto a = iob::cluster::cluster(v, DbscanParams{5000, 2.0, 3});
  auto roles = assign_roles(v, a);
  REQUIRE(roles.leader.size() == 1);
  CHECK(roles.ca[0].size() == 2);
  CHECK(v[8].role == Role::unassigned);
  int leaders = 0, cas = 0;
  for (auto& n : v) {
    leaders += n.role == Role::leader;
    cas += n.role == Role::ca;
  }
  CHECK(leaders == 1);
  CHECK(cas == 2);
  // highest capability non-leader members become CAs
  for (auto i : roles.ca[0]) CHECK(v[i].capability >= 1.5);

  std::ostringstream os;
  write_assignment_csv(os, v, a);
  const auto s = os.str();
  CHECK(s.rfind("node_id,cluster_id,role\n", 0) == 0);
  CHECK(s.find("100,-1,unassigned") != std::string::npos);

  std::ostringstream ns;
  write_nodes_csv(ns, v);
  std::istringstream in(ns.str());
  auto back = read_nodes_csv(in);
  REQUIRE(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(back[i].id == v[i].id);
    CHECK(back[i].lat == doctest::Approx(v[i].lat));
    CHECK(back[i].capability == doctest::Approx(v[i].capability));
  }
}
