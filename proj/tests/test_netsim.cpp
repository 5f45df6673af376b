#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vpmu/codec.hpp"
#include "vpmu/error.hpp"
#include "vpmu/netsim.hpp"

using namespace vpmu;

namespace {
Message msg(double sent_at = 0.0, std::size_t bytes = 10) {
  return {"a", "b", std::vector<std::uint8_t>(bytes, 1), sent_at, 0.0};
}
std::vector<LatencyRecord> records_ms(std::initializer_list<double> ms) {
  std::vector<LatencyRecord> out;
  for (double x : ms) out.push_back({0.0, x / 1000.0});
  return out;
}
}  // namespace

TEST_SUITE("netsim") {
  TEST_CASE("event loop ordering") {
    Simulator sim;
    std::vector<int> order;
    sim.schedule(2.0, [&] { order.push_back(3); });
    sim.schedule(1.0, [&] { order.push_back(1); });
    sim.schedule(1.0, [&] {
      order.push_back(2);
      sim.schedule_in(0.0, [&] { order.push_back(25); });
    });
    sim.run();
    CHECK(order == std::vector<int>{1, 2, 25, 3});
    CHECK(sim.now() == 2.0);
    CHECK(sim.executed() == 4);
  }

  TEST_CASE("constant link") {
    Simulator sim;
    Channel ch({"l", ConstantDelay{0.005}, 0, 0.0, true}, 1);
    double got = -1;
    send(sim, ch, msg(), [&](const Message&) { got = sim.now(); });
    sim.run();
    CHECK(got == doctest::Approx(0.005));
  }

  TEST_CASE("lossy link drops everything at p = 1") {
    Channel ch({"l", ConstantDelay{0.005}, 0, 1.0, true}, 1);
    for (int i = 0; i < 100; ++i) CHECK_FALSE(ch.transmit(msg()));
    CHECK(ch.stats().dropped == 100);
    CHECK(ch.stats().delivered == 0);
  }

  TEST_CASE("FIFO clamping") {
    Channel fifo({"l", ConstantDelay{}, 0, 0.0, true}, 1);
    CHECK(*fifo.transmit(msg(0.0), 0.010) == doctest::Approx(0.010));
    CHECK(*fifo.transmit(msg(0.001), 0.003) == doctest::Approx(0.010));
    Channel free({"l", ConstantDelay{}, 0, 0.0, false}, 1);
    CHECK(*free.transmit(msg(0.0), 0.010) == doctest::Approx(0.010));
    CHECK(*free.transmit(msg(0.001), 0.003) == doctest::Approx(0.004));
  }

  TEST_CASE("FIFO link never reorders") {
    Channel ch({"l", UniformDelay{0.001, 0.050}, 0, 0.0, true}, 77);
    double last = 0;
    for (int i = 0; i < 2000; ++i) {
      const double at = *ch.transmit(msg(i * 0.001));
      CHECK(at >= last);
      CHECK(at >= i * 0.001 + 0.001);
      last = at;
    }
  }

  TEST_CASE("byte accounting") {
    Channel ch({"l", ConstantDelay{0.001}, 210, 0.0, true}, 1);
    ch.transmit(msg(0.0, 106));
    ch.transmit(msg(0.02, 106));
    CHECK(ch.stats().payload_bytes == 212);
    CHECK(ch.stats().wire_bytes == 2 * 316);
  }

  TEST_CASE("delay model means") {
    auto rng = make_rng(1, "delay-mean");
    const DelayModel m = ShiftedLognormalDelay{0.045, std::log(0.0025), 1.1};
    double s = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double d = sample_delay(m, rng);
      CHECK_FALSE(d < 0.045);
      s += d;
    }
    CHECK(s / n == doctest::Approx(mean_delay(m)).epsilon(0.01));
    CHECK(mean_delay(UniformDelay{0.01, 0.03}) == doctest::Approx(0.02));
  }

  TEST_CASE("bandwidth arithmetic") {
    CHECK(stream_bandwidth(106, 50, 210, 1) == 126400);
    CHECK(stream_bandwidth(74, 50, 210, 3) == 340800);
    CHECK(stream_bandwidth(500, 0, 210, 3) == 0);
    CHECK(bandwidth_saving(126400, 307200) == doctest::Approx(58.9));
    CHECK(bandwidth_saving(230, 342) == doctest::Approx(32.7));
    CHECK(bandwidth_saving(1000, 1000) == 0.0);
  }

  TEST_CASE("node bandwidths from frame sizes") {
    const auto& want = oracle::frozen::kNodeBandwidth;
    std::size_t i = 0;
    for (std::size_t per : {6u, 12u})
      for (auto fmt : {NumberFormat::fixed16, NumberFormat::float32}) {
        const auto local = stream_bandwidth(data_frame_size(3, per, fmt), 50, 210, 1);
        const auto remote = stream_bandwidth(data_frame_size(1, per, fmt), 50, 210, 3);
        CHECK(local == want[i]);
        CHECK(remote == want[i + 1]);
        CHECK(bandwidth_saving(double(local), double(remote)) == oracle::frozen::kNodeSavings[i / 2]);
        i += 2;
      }
  }

  TEST_CASE("210 B is the one overhead consistent with every bandwidth row") {
    const auto& want = oracle::frozen::kNodeBandwidth;
    std::size_t i = 0;
    for (std::size_t per : {6u, 12u})
      for (auto fmt : {NumberFormat::fixed16, NumberFormat::float32}) {
        const auto local_frame = data_frame_size(3, per, fmt);
        const auto remote_frame = data_frame_size(1, per, fmt);
        const double oh_local = double(want[i]) / (8.0 * 50 * 1) - double(local_frame);
        const double oh_remote = double(want[i + 1]) / (8.0 * 50 * 3) - double(remote_frame);
        CHECK(oh_local == 210.0);
        CHECK(oh_remote == 210.0);
        i += 2;
      }
  }

  TEST_CASE("empirical CDF and dependability") {
    const EmpiricalCdf cdf({0.010, 0.020, 0.030});
    CHECK(cdf(0.020) == doctest::Approx(2.0 / 3.0));
    CHECK(cdf(0.005) == 0.0);
    CHECK(cdf(0.030) == 1.0);
    CHECK(cdf.quantile(0.5) == 0.020);
    CHECK(cdf.mean() == doctest::Approx(0.020));
    const EmpiricalCdf one({0.042});
    CHECK(one(0.041) == 0.0);
    CHECK(one(0.042) == 1.0);
    CHECK(one.points().size() == 1);
    CHECK(dependability(records_ms({10, 10, 10}), 0.5) == 100.0);
    CHECK(dependability(records_ms({40, 60}), 0.05) == 50.0);
    CHECK_THROWS(EmpiricalCdf({}));
  }

  TEST_CASE("link config files") {
    const auto cal = load_network_config(test::data_path("links_calibrated.json"));
    CHECK(cal.links.size() == 5);
    CHECK(cal.link("wan").per_message_overhead == 210);
    CHECK(cal.wait_timeout.value() == 1.0);
    CHECK(mean_delay(cal.link("wan").delay) == doctest::Approx(0.0496).epsilon(0.01));
    CHECK_THROWS_AS(cal.link("satellite"), ConfigError);
    CHECK_NOTHROW(load_network_config(test::data_path("links_constant.json")));
    CHECK_THROWS_AS(parse_network_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_network_config(R"({"links":{"x":{"delay":{"model":"warp"}}}})"), ConfigError);
    CHECK_THROWS_AS(parse_network_config(R"({"links":{"x":{"delay":{"model":"constant","d":0},"loss":2}}})"),
                    ConfigError);
  }
}
