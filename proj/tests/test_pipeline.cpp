#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "vpmu/pipeline.hpp"

using namespace vpmu;

namespace {

PipelineConfig base(const std::set<BusId>& buses, CvoPlacement mode, const std::string& links,
                    std::size_t periods = 100) {
  PipelineConfig c;
  c.grid = &test::ieee14();
  c.scenario = test::scenario14();
  c.placement = build_placement(test::ieee14(), buses, 2);
  c.mode = mode;
  c.network = load_network_config(test::data_path(links));
  c.periods = periods;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("every reporting instant yields one complete set per CVO") {
    for (auto mode : {CvoPlacement::local, CvoPlacement::remote}) {
      auto c = base({2, 6, 7, 9}, mode, "links_constant.json", 50);
      c.capture = true;
      const auto r = run_pipeline(c);
      CHECK(r.deliveries.size() == 50);
      for (const auto& [id, n] : r.cvo_sets) {
        INFO(id);
        CHECK(n.complete == 50);
        CHECK(n.partial == 0);
      }
      CHECK(r.cvo_sets.size() == (mode == CvoPlacement::local ? 5u : 1u));
      for (const auto& d : r.deliveries) CHECK(d.complete);
      CHECK(r.audit_log.empty());
    }
  }

  TEST_CASE("aggregate frames equal the concatenated member blocks") {
    auto c = base({2}, CvoPlacement::local, "links_constant.json", 50);
    c.capture = true;
    const auto r = run_pipeline(c);
    REQUIRE(r.captures.size() == 50);
    for (const auto& cap : r.captures) {
      REQUIRE(cap.member_bytes.size() == 3);
      DataFrame expected{node_cvo_idcode(2), cap.timestamp, {}, NumberFormat::float32};
      FrameLayout layout{NumberFormat::float32, {}};
      for (std::size_t i = 0; i < 3; ++i) {
        const auto member_layout = FrameLayout::uniform(1, r.devices[i].channels.size() * 3, NumberFormat::float32);
        const auto f = decode_data_frame(cap.member_bytes[i], member_layout);
        expected.blocks.push_back(f.blocks[0]);
        layout = i ? FrameLayout::concat(layout, member_layout) : member_layout;
      }
      CHECK(cap.output_bytes == encode_data_frame(expected, layout));
      CHECK(cap.output_bytes.size() == data_frame_size(layout));
    }
  }

  TEST_CASE("aggregated latency is never below a member arrival") {
    auto c = base({2}, CvoPlacement::remote, "links_calibrated.json", 300);
    c.capture = true;
    c.network.cvo_processing = 0.0005;
    const auto r = run_pipeline(c);
    for (const auto& cap : r.captures) {
      double last = 0.0;
      for (double a : cap.member_arrivals)
        if (!std::isnan(a)) last = std::max(last, a);
      CHECK(cap.emitted_at >= last + 0.0005 - 1e-12);
      if (cap.complete) CHECK(cap.emitted_at == doctest::Approx(last + 0.0005));
    }
    for (std::size_t i = 0; i < r.latencies.size(); ++i)
      CHECK(r.latencies[i].receipt_time >= r.captures[i].emitted_at);
  }

  TEST_CASE("WAN message counts per period") {
    auto local = base({2}, CvoPlacement::local, "links_constant.json", 100);
    const auto rl = run_pipeline(local);
    CHECK(rl.link_stats.at("wan").sent == 100);
    CHECK(rl.link_stats.count("wan_stream") == 0);

    auto remote = base({2}, CvoPlacement::remote, "links_constant.json", 100);
    const auto rr = run_pipeline(remote);
    CHECK(rr.link_stats.at("wan_stream").sent == 300);
    CHECK(rr.link_stats.count("wan") == 0);

    // Bus 2 has five channels, so its third PMU carries one channel: 6 + 6 + 3 phasors.
    auto one_second = base({2}, CvoPlacement::local, "links_calibrated.json", 50);
    one_second.format = NumberFormat::fixed16;
    const auto r1 = run_pipeline(one_second);
    CHECK(data_frame_size(r1.app_layout) == 94);
    CHECK(r1.link_stats.at("wan").wire_bytes * 8 == stream_bandwidth(94, 50, 210, 1));
  }

  TEST_CASE("constant links give one latency value") {
    const auto r = run_pipeline(base({2}, CvoPlacement::local, "links_constant.json", 100));
    const auto cdf = latency_cdf(r.latencies);
    CHECK(cdf.max() - cdf.min() < 1e-12);
  }

  TEST_CASE("key-value output") {
    auto c = base({2}, CvoPlacement::local, "links_constant.json", 20);
    c.output_mode = OutputMode::key_value;
    const auto r = run_pipeline(c);
    REQUIRE(r.deliveries.size() == 20);
    for (const auto& d : r.deliveries) {
      CHECK_FALSE(d.frame);
      const auto doc = parse_aligned_set(d.document);
      CHECK(doc.complete);
      CHECK(doc.timestamp == d.timestamp);
      CHECK(doc.absent.empty());
      // idcode, soc, fracsec, freq, rocof per source plus re/im of 6 + 6 + 3 phasors.
      CHECK(doc.values.size() == 3 * 5 + 2 * 15);
    }
  }

  TEST_CASE("identical seeds give identical event logs") {
    auto c = base({2, 7}, CvoPlacement::local, "links_calibrated.json", 200);
    c.log_events = true;
    c.noise.phasor_rel = 0.01;
    const auto a = run_pipeline(c);
    const auto b = run_pipeline(c);
    CHECK(a.event_log == b.event_log);
    CHECK_FALSE(a.event_log.empty());
    REQUIRE(a.deliveries.size() == b.deliveries.size());
    for (std::size_t i = 0; i < a.deliveries.size(); ++i) {
      CHECK(a.deliveries[i].frame == b.deliveries[i].frame);
      CHECK(a.deliveries[i].receipt == b.deliveries[i].receipt);
    }
    c.seed = 8;
    CHECK(run_pipeline(c).event_log != a.event_log);
  }

  TEST_CASE("short timeout yields partial sets flagged invalid") {
    auto c = base({2}, CvoPlacement::remote, "links_calibrated.json", 200);
    c.wait_timeout = 0.002;
    const auto r = run_pipeline(c);
    const auto& n = r.cvo_sets.at("cvo-cloud");
    CHECK(n.partial > 0);
    CHECK(n.complete + n.partial == 200);
    for (const auto& d : r.deliveries) {
      if (d.complete) continue;
      const auto invalid = std::count_if(d.frame->blocks.begin(), d.frame->blocks.end(),
                                         [](const PmuBlock& b) { return b.stat & kStatDataInvalid; });
      CHECK(invalid > 0);
    }
  }

  TEST_CASE("ROCOF alarm raises the reporting rate through the broker") {
    auto c = base({2}, CvoPlacement::local, "links_constant.json", 150);
    c.rate = 10;
    c.scenario = test::scenario14();
    c.scenario.freq_profile = {{0.0, 0.0, 0.0}, {1.0, -40.0, -0.8}};
    c.thresholds = {{"rocof", Comparator::lt, -0.5, "REGION_1/ZONE_1/{node}/rate", "rate=50"}};
    const auto r = run_pipeline(c);
    REQUIRE_FALSE(r.actions.empty());
    CHECK(r.actions.front().topic == "REGION_1/ZONE_1/Node_2/rate");
    CHECK(r.actions.front().timestamp.micros() - c.start_soc * std::int64_t{1'000'000} == 1'000'000);
    REQUIRE(r.rate_changes.size() == 3);
    for (const auto& rc : r.rate_changes) CHECK(rc.rate == 50);
    // 10 fps for the first second, 50 fps afterwards.
    std::size_t before = 0, after = 0;
    for (const auto& d : r.deliveries) (d.timestamp.micros() - c.start_soc * std::int64_t{1'000'000} < 1'000'000 ? before : after)++;
    CHECK(before == 10);
    CHECK(after > 40);
  }
}
