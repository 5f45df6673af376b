#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vpmu/error.hpp"
#include "vpmu/rng.hpp"
#include "vpmu/virtual_object.hpp"

using namespace vpmu;

namespace {

DataFrame frame_at(std::int64_t us, double freq = 0.0, double rocof = 0.0, std::uint16_t id = 1) {
  DataFrame f;
  f.idcode = id;
  f.timestamp = Timestamp::from_micros(us);
  PmuBlock b;
  b.phasors = {{1.0, -0.1}, {0.2, 0.3}};
  b.freq_dev = freq;
  b.rocof = rocof;
  f.blocks = {b};
  return f;
}

Trigger periodic(double period, double anchor = 0.0) {
  Trigger t;
  t.id = "p";
  t.kind = Trigger::Kind::periodic;
  t.period = period;
  t.anchor = anchor;
  t.destination = "/collector";
  return t;
}

Trigger rocof_above(double bound) {
  Trigger t;
  t.id = "r";
  t.kind = Trigger::Kind::threshold;
  t.field = "rocof";
  t.comparator = Comparator::gt;
  t.bound = bound;
  t.destination = "REGION_1/ZONE_1/Node_2/alarm";
  return t;
}

std::vector<std::int64_t> buffered(const VirtualObject& vo) {
  std::vector<std::int64_t> out;
  for (const auto& f : vo.buffer()) out.push_back(f.timestamp.micros());
  return out;
}

}  // namespace

TEST_SUITE("virtual_object") {
  TEST_CASE("buffer ordering, dedup and eviction") {
    VirtualObject vo("vo-1", 1, 2);
    vo.ingest(frame_at(1'000'000));
    vo.ingest(frame_at(2'000'000));
    vo.ingest(frame_at(3'000'000));
    CHECK(buffered(vo) == std::vector<std::int64_t>{2'000'000, 3'000'000});

    VirtualObject r("vo-1", 1);
    CHECK(r.ingest(frame_at(2)));
    CHECK(r.ingest(frame_at(1)));
    CHECK_FALSE(r.ingest(frame_at(2)));
    CHECK(buffered(r) == std::vector<std::int64_t>{1, 2});
    CHECK_FALSE(r.ingest(frame_at(3, 0, 0, 42)));
    CHECK(r.audit_log().size() == 1);
  }

  TEST_CASE("ingest keeps order under any arrival permutation") {
    auto rng = make_rng(5, "vo-perm");
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::int64_t> ts(40);
      std::iota(ts.begin(), ts.end(), 0);
      for (auto& t : ts) t *= 20000;
      std::shuffle(ts.begin(), ts.end(), rng);
      VirtualObject vo("vo-1", 1, 25);
      for (auto t : ts) vo.ingest(frame_at(t));
      const auto got = buffered(vo);
      CHECK(std::is_sorted(got.begin(), got.end()));
      CHECK(std::adjacent_find(got.begin(), got.end()) == got.end());
      CHECK(got.size() == 25);
    }
  }

  TEST_CASE("resource projection") {
    VirtualObject vo("vo-1", 1);
    CHECK_THROWS_AS(vo.get_resource({"rocof"}), NoDataError);
    for (int k = 0; k < 4; ++k) vo.ingest(frame_at(k * 20000, k < 2 ? 10.0 : 20.0));
    CHECK(vo.get_resource({"freq"}).at("freq") == 20.0);
    CHECK(vo.get_resource({"freq"}, 4).at("freq") == 15.0);
    CHECK_THROWS_AS(vo.get_resource({"freq"}, 5), SelectorError);
    CHECK_THROWS_AS(vo.get_resource({"volts"}), SelectorError);
    const auto r = vo.get_resource({"phasor.1.re", "soc", "fracsec"}, 3);
    CHECK(r.at("phasor.1.re") == doctest::Approx(0.2));
    CHECK(r.at("fracsec") == 60000);
  }

  TEST_CASE("projection soundness") {
    auto rng = make_rng(8, "vo-proj");
    std::uniform_real_distribution<double> u(-100, 100);
    VirtualObject vo("vo-1", 1, 16);
    std::vector<DataFrame> frames;
    for (int k = 0; k < 30; ++k) {
      frames.push_back(frame_at(k * 20000, u(rng), u(rng)));
      vo.ingest(frames.back());
    }
    const auto latest = vo.get_resource({"freq", "rocof"});
    CHECK(latest.at("freq") == frames.back().blocks[0].freq_dev);
    for (std::size_t n = 1; n <= 16; ++n) {
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += frames[frames.size() - 1 - i].blocks[0].rocof;
      CHECK(vo.get_resource({"rocof"}, n).at("rocof") == doctest::Approx(sum / n).epsilon(1e-12));
    }
  }

  TEST_CASE("threshold trigger is strict") {
    VirtualObject vo("vo-1", 1);
    vo.register_trigger(rocof_above(0.5));
    CHECK(vo.receive(frame_at(0, 0, 0.7)).size() == 1);
    CHECK(vo.receive(frame_at(20000, 0, 0.5)).empty());
    CHECK(vo.receive(frame_at(40000, 0, 0.2)).empty());
    const auto push = vo.receive(frame_at(60000, 0, 0.9));
    REQUIRE(push.size() == 1);
    CHECK(push[0].to_topic);
    CHECK_THROWS_AS(vo.register_trigger(rocof_above(1.0)), ValidationError);
    CHECK(vo.remove_trigger("r"));
    CHECK_FALSE(vo.remove_trigger("r"));
  }

  TEST_CASE("periodic trigger fires on minute boundaries") {
    VirtualObject vo("vo-1", 1);
    vo.register_trigger(periodic(60.0));
    int fired = 0;
    std::int64_t at = -1;
    for (std::int64_t us : {59'980'000, 60'000'000, 60'020'000}) {
      const auto p = vo.receive(frame_at(us));
      if (!p.empty()) {
        ++fired;
        at = us;
        CHECK_FALSE(p[0].to_topic);
      }
    }
    CHECK(fired == 1);
    CHECK(at == 60'000'000);
  }

  TEST_CASE("periodic trigger count matches elapsed periods") {
    auto rng = make_rng(2, "vo-periodic");
    for (int trial = 0; trial < 200; ++trial) {
      const double period = std::uniform_int_distribution<int>(1, 50)(rng) * 0.02;
      const auto period_us = std::llround(period * 1e6);
      VirtualObject vo("vo-1", 1, 8);
      vo.register_trigger(periodic(period, 0.04));
      std::int64_t t = std::uniform_int_distribution<std::int64_t>(40000, 5'000'000)(rng) / 20000 * 20000;
      const std::int64_t first = t;
      int fired = 0;
      for (int k = 0; k < 300; ++k) {
        fired += static_cast<int>(vo.receive(frame_at(t)).size());
        t += std::uniform_int_distribution<std::int64_t>(1, period_us / 20000)(rng) * 20000;
      }
      const auto idx = [&](std::int64_t x) { return (x - 40000) / period_us; };
      const std::int64_t final_ts = vo.buffer().back().timestamp.micros();
      const int expected = static_cast<int>(idx(final_ts) - idx(first)) + ((first - 40000) % period_us == 0);
      CHECK(fired == expected);
    }
  }

  TEST_CASE("key-value wire form round trips") {
    const auto r = to_key_values(frame_at(123456, 12.5, -0.25, 9));
    CHECK(parse_key_values(format_key_values(r)) == r);
    CHECK(r.at("idcode") == 9);
    CHECK(r.at("phasor.0.im") == -0.1);
  }

  TEST_CASE("trigger document round trips") {
    const auto t = periodic(60.0, 0.5);
    const auto back = parse_trigger(format_trigger(t));
    CHECK(back.id == t.id);
    CHECK(back.period == t.period);
    CHECK(back.anchor == t.anchor);
    CHECK(back.destination == t.destination);
    CHECK_THROWS_AS(parse_trigger("id=x\n"), ValidationError);
  }

  TEST_CASE("resource interface") {
    VirtualObject vo("vo-3", 3);
    CHECK(serve(vo, {"GET", "/vo/vo-3/measurements?fields=freq", ""}).status == 503);
    vo.ingest(frame_at(0, 12.0, 0.0, 3));
    const auto ok = serve(vo, {"GET", "/vo/vo-3/measurements?fields=freq", ""});
    CHECK(ok.status == 200);
    CHECK(parse_key_values(ok.body).at("freq") == 12.0);
    CHECK(serve(vo, {"GET", "/vo/vo-3/measurements?fields=bogus", ""}).status == 400);
    CHECK(serve(vo, {"GET", "/vo/vo-9/measurements", ""}).status == 404);
    CHECK(serve(vo, {"PUT", "/vo/vo-3/measurements", ""}).status == 405);
    const std::string doc = "id=alarm\nkind=threshold\nfield=rocof\nop=>\nbound=0.5\ndestination=a/b\n";
    CHECK(serve(vo, {"POST", "/vo/vo-3/triggers", doc}).status == 201);
    CHECK(serve(vo, {"POST", "/vo/vo-3/triggers", doc}).status == 409);
    CHECK(serve(vo, {"POST", "/vo/vo-3/triggers", "kind=nope\n"}).status == 400);
    CHECK(serve(vo, {"DELETE", "/vo/vo-3/triggers/alarm", ""}).status == 204);
    CHECK(serve(vo, {"DELETE", "/vo/vo-3/triggers/alarm", ""}).status == 404);
  }
}
