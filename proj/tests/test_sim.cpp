#include <doctest.h>

#include <sstream>

#include "iob/consensus/pbft.hpp"
#include "iob/consensus/run.hpp"
#include "iob/sim/cost_model.hpp"
#include "iob/sim/simulator.hpp"

using namespace iob;
using namespace iob::sim;

namespace {

PayloadPtr sig(std::string_view k, std::size_t size = 0, std::uint64_t v = 0) {
  return std::make_shared<Signal>(k, size, v);
}

LatencyModel quiet() {
  LatencyModel m;
  m.jitter_s = 0;
  return m;
}

// A few nodes bouncing messages around with random targets and sizes.
Simulator chatter(std::uint64_t seed, int nodes, int hops) {
  Simulator s(LatencyModel{}, seed);
  for (int i = 0; i < nodes; ++i) {
    s.add_node({39.9 + 0.01 * i, 116.3 + 0.02 * i, 1.0 + i}, [nodes](Simulator& sim, const Delivery& d) {
      auto* p = static_cast<const Signal*>(d.payload.get());
      if (p->value == 0) return;
      const auto to = static_cast<NodeId>(sim.rng()() % nodes);
      sim.charge(static_cast<SimTime>(sim.rng()() % 5000));
      sim.send(d.dst, to, sig("HOP", 64 + sim.rng()() % 512, p->value - 1));
    });
  }
  for (int i = 0; i < nodes; ++i) s.send(i, (i + 1) % nodes, sig("HOP", 100, hops));
  return s;
}

}  // namespace

TEST_CASE("zero distance, infinite capability, no jitter: delivery after base latency") {
  Simulator s(quiet(), 1);
  SimTime got = -1;
  auto a = s.add_node({});
  auto b = s.add_node({}, [&](Simulator& sim, const Delivery&) { got = sim.now(); });
  s.send(a, b, sig("X"));
  s.run_until_quiescent();
  CHECK(got == from_seconds(0.001));
}

TEST_CASE("analytic delivery time: propagation, transmission, service") {
  Simulator s(quiet(), 1);
  SimTime got = -1;
  auto a = s.add_node({0, 0, 5});
  auto b = s.add_node({0, 1, 2}, [&](Simulator& sim, const Delivery&) { got = sim.now(); });
  s.send(a, b, sig("X", 125));
  s.run_until_quiescent();
  // one degree of longitude on the equator is 111194.93 m
  const double expect = 0.001 + 5e-6 * 111.19493 + 125 / 12.5e6 + 1e-4 / 2;
  CHECK(to_seconds(got) == doctest::Approx(expect).epsilon(1e-6));
  CHECK(s.latency().transit(s.node(a), s.node(b), 125) > 0);
}

TEST_CASE("drop rate 1.0 never delivers") {
  FaultModel f;
  f.link_drop_rate = 1.0;
  Simulator s(LatencyModel{}, 3, f);
  int got = 0;
  auto a = s.add_node({});
  auto b = s.add_node({}, [&](Simulator&, const Delivery&) { ++got; });
  for (int i = 0; i < 100; ++i) s.send(a, b, sig("X"));
  s.run_until_quiescent();
  CHECK(got == 0);
  CHECK(s.dropped() == 100);
  CHECK(s.trace().empty());
}

TEST_CASE("unknown node ids throw") {
  Simulator s(LatencyModel{}, 1);
  s.add_node({});
  CHECK_THROWS_AS(s.send(0, 1, sig("X")), std::out_of_range);
  CHECK_THROWS_AS(s.send(7, 0, sig("X")), std::out_of_range);
  CHECK_THROWS_AS(s.set_timer(3, 0, sig("T")), std::out_of_range);
}

TEST_CASE("empty queue and single self-message") {
  Simulator s(LatencyModel{}, 1);
  auto r = s.run_until_quiescent();
  CHECK(r.quiescent);
  CHECK(r.events == 0);
  CHECK(s.trace().empty());

  Simulator t(LatencyModel{}, 1);
  auto a = t.add_node({});
  t.send(a, a, sig("SELF", 8));
  t.run_until_quiescent();
  REQUIRE(t.trace().size() == 1);
  CHECK(t.trace()[0].src == a);
  CHECK(t.trace()[0].dst == a);
  CHECK(t.trace()[0].msg_type == "SELF");
  CHECK(t.count("SELF") == 1);
}

TEST_CASE("max_time cuts the run short and flags it") {
  Simulator s(quiet(), 1);
  auto a = s.add_node({}, [](Simulator& sim, const Delivery& d) { sim.send(d.dst, d.dst, d.payload); });
  s.send(a, a, sig("LOOP"));
  auto r = s.run_until_quiescent(from_seconds(0.0105));
  CHECK_FALSE(r.quiescent);
  CHECK(s.trace().size() == 10);
  CHECK(r.end_time <= from_seconds(0.0105));
}

TEST_CASE("golden trace: identical across runs, different across seeds") {
  auto render = [](std::uint64_t seed) {
    auto s = chatter(seed, 5, 40);
    s.run_until_quiescent();
    std::ostringstream os;
    s.write_trace_csv(os);
    return os.str();
  };
  const auto a = render(42);
  CHECK(a == render(42));
  CHECK(a != render(43));
  CHECK(a.rfind("fire_time,src,dst,msg_type,size\n", 0) == 0);
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 5 * 41);
}

TEST_CASE("causality and clock monotonicity") {
  auto s = chatter(7, 6, 60);
  s.run_until_quiescent();
  const auto& tr = s.trace();
  REQUIRE(!tr.empty());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr[i].fire_time > tr[i].sent_time);
    if (i) CHECK(tr[i - 1].fire_time <= tr[i].fire_time);
  }
}

TEST_CASE("a busy node serves its inbox in FIFO order") {
  Simulator s(quiet(), 1);
  std::vector<std::uint64_t> order;
  std::vector<SimTime> at;
  auto a = s.add_node({});
  auto b = s.add_node({0, 0, 1}, [&](Simulator& sim, const Delivery& d) {
    order.push_back(static_cast<const Signal*>(d.payload.get())->value);
    at.push_back(sim.now());
    sim.charge(from_seconds(0.01));
  });
  for (std::uint64_t i = 0; i < 4; ++i) s.send(a, b, sig("X", 0, i));
  s.run_until_quiescent();
  CHECK(order == std::vector<std::uint64_t>{0, 1, 2, 3});
  // each later message waits for the previous compute plus its own service time
  for (std::size_t i = 1; i < at.size(); ++i) CHECK(at[i] - at[i - 1] == from_seconds(0.01) + from_seconds(1e-4));
}

TEST_CASE("crashed nodes neither send nor receive") {
  FaultModel f;
  f.crash(1, from_seconds(0.5));
  Simulator s(quiet(), 1, f);
  int got = 0;
  auto a = s.add_node({});
  auto b = s.add_node({}, [&](Simulator&, const Delivery&) { ++got; });
  s.send(a, b, sig("X"));
  s.inject(a, from_seconds(1), sig("LATE"));
  s.set_handler(a, [&](Simulator& sim, const Delivery& d) {
    if (d.local) sim.send(a, b, sig("X"));
  });
  s.run_until_quiescent();
  CHECK(got == 1);
  CHECK(s.dropped() == 1);
}

TEST_CASE("PBFT n=4 fault-free round sends message_count(4) == 31 messages") {
  CHECK(consensus::message_count(4) == 31);
  consensus::RoundSetup rs;
  rs.replicas.assign(4, NodeInfo{39.9, 116.4, 5});
  rs.client = {39.95, 116.45, 5};
  rs.seed = 11;
  rs.record_trace = true;
  auto r = consensus::run_pbft(rs);
  CHECK(r.client_done);
  CHECK(r.protocol_messages == 31);
  std::uint64_t traced = 0;
  for (const auto& e : r.trace)
    if (e.msg_type == "PRE_PREPARE" || e.msg_type == "PREPARE" || e.msg_type == "COMMIT" || e.msg_type == "REPLY")
      ++traced;
  CHECK(traced == 31);
}

TEST_CASE("cost model: formulas and key=value overrides") {
  CostModel c;
  CHECK(c.ca_verify(1) > c.base_mul + c.scalar_mul);
  CHECK(c.ca_verify(500) > c.ca_verify(100));
  CHECK(c.share(10, 3) == 120 * c.scalar_op);
  CHECK(c.local_verify(0) == c.base_mul);
  c.apply({{"cost.base_mul", "7"}, {"unrelated", "x"}});
  CHECK(c.base_mul == 7);
  CHECK(c.to_map().at("cost.base_mul") == 7);
  CHECK_THROWS(c.apply({{"cost.hash", "-1"}}));
  CHECK_THROWS(c.apply({{"cost.hash", "12ns"}}));
}
