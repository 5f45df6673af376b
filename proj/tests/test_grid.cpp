#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vpmu/error.hpp"
#include "vpmu/grid.hpp"

using namespace vpmu;

TEST_SUITE("grid") {
  TEST_CASE("archive 14-bus case parses to 14 buses and 20 branches") {
    const auto g = test::ieee14();
    CHECK(g.buses().size() == 14);
    CHECK(g.branches().size() == 20);
    CHECK(g.bus(1).type == 3);
    CHECK(g.bus(9).name.find("Bus 9") != std::string::npos);
  }

  TEST_CASE("parsing is idempotent") {
    const auto text = test::read_file(test::data_path("ieee14cdf.txt"));
    CHECK(parse_cdf(text) == parse_cdf(text));
  }

  TEST_CASE("missing branch section is a parse error") {
    const auto text = test::read_file(test::data_path("ieee14cdf.txt"));
    const auto cut = text.find("BRANCH DATA");
    REQUIRE(cut != std::string::npos);
    CHECK_THROWS_AS(parse_cdf(text.substr(0, cut)), ParseError);
  }

  TEST_CASE("dangling branch endpoint is a validation error") {
    const std::vector<Bus> buses{{1, "A", 0, 3, 1, 0}, {2, "B", 0, 0, 1, 0}};
    CHECK_THROWS_AS(GridModel(buses, {{2, 99, 0.0, 0.1, 0.0, 1.0}}), ValidationError);
  }

  TEST_CASE("branch admittance") {
    SUBCASE("pure reactance") {
      const auto y = branch_admittance({1, 2, 0.0, 0.1, 0.0, 1.0});
      CHECK(y.series.real() == doctest::Approx(0.0));
      CHECK(y.series.imag() == doctest::Approx(-10.0));
      CHECK(std::abs(y.shunt_from) == 0.0);
      CHECK(std::abs(y.shunt_to) == 0.0);
    }
    SUBCASE("14-bus branch 1-2 series term") {
      const auto y = branch_admittance({1, 2, 0.01938, 0.05917, 0.0528, 1.0});
      CHECK(std::abs(y.series - oracle::frozen::kSeries12) < 1e-12);
      CHECK(y.shunt_from.imag() == doctest::Approx(0.0264));
      CHECK(y.shunt_to == y.shunt_from);
    }
    SUBCASE("unit tap is symmetric in from/to") {
      const auto g = test::ieee14();
      for (const auto& b : g.branches()) {
        if (b.tap != 1.0) continue;
        Branch flipped = b;
        std::swap(flipped.from, flipped.to);
        const auto y1 = branch_admittance(b), y2 = branch_admittance(flipped);
        CHECK(y1.series == y2.series);
        CHECK(y1.shunt_from == y2.shunt_to);
        CHECK(y1.shunt_to == y2.shunt_from);
      }
    }
    SUBCASE("off-nominal tap reproduces the two-port admittance matrix") {
      const Branch b{4, 7, 0.0, 0.20912, 0.0, 0.978};
      const auto y = branch_admittance(b);
      const Complex ys = 1.0 / Complex(b.r, b.x);
      // Y_ff = ys/t^2, Y_ft = -ys/t, Y_tt = ys
      CHECK(std::abs((y.series + y.shunt_from) - ys / (b.tap * b.tap)) < 1e-12);
      CHECK(std::abs(y.series - ys / b.tap) < 1e-12);
      CHECK(std::abs((y.series + y.shunt_to) - ys) < 1e-12);
    }
  }

  TEST_CASE("incident branches") {
    const auto g = test::ieee14();
    const auto at7 = incident_branches(g, 7);
    REQUIRE(at7.size() == 3);
    CHECK((at7[0].from == 4 && at7[0].to == 7));
    CHECK((at7[1].from == 7 && at7[1].to == 8));
    CHECK((at7[2].from == 7 && at7[2].to == 9));
    CHECK(incident_branches(g, 2).size() == 4);

    const GridModel two({{1, "A", 0, 3, 1, 0}, {2, "B", 0, 0, 1, 0}}, {});
    CHECK(incident_branches(two, 2).empty());
  }

  TEST_CASE("placement") {
    const auto g = test::ieee14();
    SUBCASE("monitored {2,6,7,9}, two channels") {
      const auto p = build_placement(g, {2, 6, 7, 9}, 2);
      CHECK(p.assignments.at(2).size() == 3);
      CHECK(p.assignments.at(6).size() == 3);
      CHECK(p.assignments.at(7).size() == 2);
      CHECK(p.assignments.at(9).size() == 3);
      CHECK(p.pmu_count() == 11);
    }
    SUBCASE("node 7 with four channels fits one device") {
      const auto p = build_placement(g, {7}, 4);
      REQUIRE(p.pmu_count() == 1);
      CHECK(p.devices()[0].channels.size() == 4);
    }
    SUBCASE("node 2 with one channel") { CHECK(build_placement(g, {2}, 1).pmu_count() == 5); }
    SUBCASE("descriptor round trip and device count for every node and width") {
      for (const auto& bus : g.buses()) {
        for (int ch = 1; ch <= 5; ++ch) {
          const auto p = build_placement(g, {bus.id}, ch);
          const auto idx = incident_branch_indices(g, bus.id);
          std::vector<Descriptor> expected{Descriptor::voltage(bus.id)};
          for (auto b : idx) expected.push_back(Descriptor::current(bus.id, b));
          CHECK(p.descriptors() == expected);
          const auto degree = idx.size();
          CHECK(p.pmu_count() == (1 + degree + ch - 1) / ch);
        }
      }
    }
    SUBCASE("unknown bus") { CHECK_THROWS_AS(build_placement(g, {99}, 2), ValidationError); }
  }

  TEST_CASE("bus list parsing") {
    CHECK(parse_bus_list("2,6,7,9") == std::set<BusId>{2, 6, 7, 9});
    CHECK(parse_bus_list(" 9 , 2 ") == std::set<BusId>{2, 9});
    CHECK_THROWS(parse_bus_list("2,x"));
    CHECK_THROWS(parse_bus_list(""));
  }
}
