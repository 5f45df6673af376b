#include <doctest.h>

#include <algorithm>
#include <set>

#include "generators.hpp"
#include "vpmu/cvo.hpp"
#include "vpmu/error.hpp"

using namespace vpmu;

namespace {

DataFrame member_frame(std::uint16_t id, std::int64_t us, double rocof = 0.0, std::size_t phasors = 6,
                       NumberFormat fmt = NumberFormat::float32) {
  DataFrame f;
  f.idcode = id;
  f.timestamp = Timestamp::from_micros(us);
  f.format = fmt;
  PmuBlock b;
  for (std::size_t k = 0; k < phasors; ++k) b.phasors.push_back({0.25 * id + 0.125 * k, -0.1 * k});
  b.freq_dev = 3.0 * id;
  b.rocof = rocof;
  f.blocks = {b};
  return f;
}

CvoConfig three_members(NumberFormat fmt = NumberFormat::float32) {
  CvoConfig c;
  c.id = "cvo";
  c.idcode = 100;
  c.members = {"A", "B", "C"};
  c.wait_timeout = 0.04;
  for (const auto& m : c.members) c.member_layouts[m] = FrameLayout::uniform(1, 6, fmt);
  return c;
}

}  // namespace

TEST_SUITE("cvo") {
  TEST_CASE("complete set") {
    Cvo cvo(three_members());
    CHECK_FALSE(cvo.ingest("A", member_frame(1, 0), 0.001));
    CHECK_FALSE(cvo.ingest("B", member_frame(2, 0), 0.002));
    const auto set = cvo.ingest("C", member_frame(3, 0), 0.003);
    REQUIRE(set);
    CHECK(set->complete);
    CHECK(set->absent.empty());
    CHECK(set->contributions.size() == 3);
    CHECK(cvo.pending() == 0);
  }

  TEST_CASE("partial set after timeout") {
    Cvo cvo(three_members());
    cvo.ingest("A", member_frame(1, 0), 0.0);
    cvo.ingest("B", member_frame(2, 0), 0.01);
    CHECK(cvo.next_deadline().value() == doctest::Approx(0.04));
    CHECK(cvo.expire(0.039).empty());
    const auto sets = cvo.expire(0.04);
    REQUIRE(sets.size() == 1);
    CHECK_FALSE(sets[0].complete);
    CHECK(sets[0].absent == std::vector<std::string>{"C"});

    CHECK_FALSE(cvo.ingest("C", member_frame(3, 0), 0.05));
    CHECK(cvo.pending() == 0);

    const auto frame = cvo.compose_frame(sets[0]);
    REQUIRE(frame.blocks.size() == 3);
    CHECK(frame.blocks[2].stat == kStatDataInvalid);
    CHECK(frame.blocks[2].phasors.size() == 6);
    CHECK_THROWS_AS(cvo.compose_aggregate_frame(sets[0]), ValidationError);
  }

  TEST_CASE("non-members and duplicates are rejected") {
    Cvo cvo(three_members());
    CHECK_FALSE(cvo.ingest("D", member_frame(4, 0), 0.0));
    CHECK(cvo.pending() == 0);
    cvo.ingest("A", member_frame(1, 0), 0.0);
    CHECK_FALSE(cvo.ingest("A", member_frame(1, 0), 0.0));
    CHECK(cvo.audit_log().size() == 2);
  }

  TEST_CASE("aggregate frame sizes") {
    for (auto [fmt, size] : {std::pair{NumberFormat::float32, 190u}, std::pair{NumberFormat::fixed16, 106u}}) {
      Cvo cvo(three_members(fmt));
      cvo.ingest("A", member_frame(1, 0, 0, 6, fmt), 0);
      cvo.ingest("B", member_frame(2, 0, 0, 6, fmt), 0);
      const auto set = cvo.ingest("C", member_frame(3, 0, 0, 6, fmt), 0);
      REQUIRE(set);
      const auto out = cvo.forward(*set);
      CHECK(out.payload.size() == size);
      CHECK(out.destination == "app");
    }
  }

  TEST_CASE("single member aggregation equals the member encoding up to idcode") {
    CvoConfig c;
    c.id = "solo";
    c.idcode = 500;
    c.members = {"A"};
    c.member_layouts["A"] = FrameLayout::uniform(1, 6, NumberFormat::float32);
    Cvo cvo(c);
    const auto f = member_frame(1, 40000);
    const auto set = cvo.ingest("A", f, 0.0);
    REQUIRE(set);
    auto expected = f;
    expected.idcode = 500;
    CHECK(cvo.forward(*set).payload == encode_data_frame(expected));
  }

  TEST_CASE("aggregation conserves member values bit for bit") {
    auto rng = make_rng(21, "cvo-conserve");
    for (int trial = 0; trial < 300; ++trial) {
      CvoConfig c;
      c.id = "cvo";
      c.idcode = 7;
      const int n = std::uniform_int_distribution<int>(1, 5)(rng);
      std::vector<DataFrame> frames;
      for (int m = 0; m < n; ++m) {
        auto r = gen::random_frame(rng, NumberFormat::float32);
        r.frame.blocks.resize(1);
        r.layout.blocks.resize(1);
        r.frame.timestamp = {1000, 20000};
        const auto id = "m" + std::to_string(m);
        c.members.push_back(id);
        c.member_layouts[id] = r.layout;
        frames.push_back(r.frame);
      }
      Cvo cvo(c);
      std::optional<AlignedSet> set;
      for (int m = 0; m < n; ++m) set = cvo.ingest(c.members[static_cast<std::size_t>(m)], frames[static_cast<std::size_t>(m)], 0.0);
      REQUIRE(set);
      const auto agg = cvo.compose_aggregate_frame(*set);
      const auto decoded = decode_data_frame(cvo.forward(*set).payload, cvo.output_layout());
      REQUIRE(decoded.blocks.size() == static_cast<std::size_t>(n));
      for (int m = 0; m < n; ++m) {
        CHECK(agg.blocks[static_cast<std::size_t>(m)] == frames[static_cast<std::size_t>(m)].blocks[0]);
        CHECK(decoded.blocks[static_cast<std::size_t>(m)] == frames[static_cast<std::size_t>(m)].blocks[0]);
      }
    }
  }

  TEST_CASE("sets are emitted once per timestamp with equal timestamps") {
    auto rng = make_rng(9, "cvo-once");
    Cvo cvo(three_members());
    std::set<std::int64_t> seen;
    double now = 0;
    std::vector<std::pair<std::string, std::int64_t>> arrivals;
    for (std::int64_t k = 0; k < 200; ++k)
      for (const char* m : {"A", "B", "C"})
        if (std::uniform_int_distribution<int>(0, 9)(rng) > 0) arrivals.emplace_back(m, k * 20000);
    std::shuffle(arrivals.begin(), arrivals.end(), rng);
    auto check = [&](const AlignedSet& s) {
      CHECK(seen.insert(s.timestamp.micros()).second);
      for (const auto& [src, rec] : s.contributions) CHECK(record_timestamp(rec) == s.timestamp);
    };
    for (const auto& [m, us] : arrivals) {
      now += 0.001;
      for (auto& s : cvo.expire(now)) check(s);
      if (auto s = cvo.ingest(m, member_frame(1, us), now)) check(*s);
    }
    for (auto& s : cvo.expire(now + 1.0)) check(s);
  }

  TEST_CASE("threshold actions are deduplicated per rule") {
    auto c = three_members();
    c.thresholds = {{"rocof", Comparator::gt, 0.5, "REGION_1/ZONE_1/Node_2/rate", "rate=50"}};
    Cvo cvo(c);
    auto run = [&](double a, double b, double cc, std::int64_t us) {
      cvo.ingest("A", member_frame(1, us, a), 0);
      cvo.ingest("B", member_frame(2, us, b), 0);
      return cvo.check_thresholds(*cvo.ingest("C", member_frame(3, us, cc), 0));
    };
    const auto one = run(0.8, 0.1, 0.0, 0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].topic == "REGION_1/ZONE_1/Node_2/rate");
    CHECK(one[0].payload == "rate=50");
    CHECK(run(0.1, 0.2, 0.3, 20000).empty());
    CHECK(run(0.9, 0.7, 0.0, 40000).size() == 1);
    CHECK(run(0.5, 0.5, 0.5, 60000).empty());
  }

  TEST_CASE("key-value output") {
    auto c = three_members();
    c.output_mode = OutputMode::key_value;
    c.parent = "cvo-cloud";
    Cvo cvo(c);
    cvo.ingest("A", member_frame(1, 0), 0);
    cvo.ingest("B", member_frame(2, 0), 0);
    const auto out = cvo.forward(*cvo.ingest("C", member_frame(3, 0), 0));
    CHECK(out.destination == "cvo-cloud");
    const auto doc = parse_aligned_set(std::string(out.payload.begin(), out.payload.end()));
    CHECK(doc.complete);
    CHECK(doc.values.at("B.freq") == 6.0);
    CHECK(doc.values.at("C.phasor.2.im") == -0.2);

    Cvo partial(three_members());
    partial.ingest("A", member_frame(1, 0), 0);
    const auto sets = partial.expire(1.0);
    REQUIRE(sets.size() == 1);
    const auto pdoc = parse_aligned_set(format_aligned_set(sets[0]));
    CHECK_FALSE(pdoc.complete);
    CHECK(pdoc.absent == std::vector<std::string>{"B", "C"});
    CHECK_THROWS_AS(parse_aligned_set("soc=1\nfracsec=2\n"), ParseError);
    CHECK(parse_rate_action("rate=25") == 25);
    CHECK_FALSE(parse_rate_action("rate=fast"));
    CHECK_FALSE(parse_rate_action("mode=off"));
  }
}
