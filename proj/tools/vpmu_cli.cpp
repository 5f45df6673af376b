#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "vpmu/error.hpp"
#include "vpmu/experiments.hpp"

namespace fs = std::filesystem;
using namespace vpmu;

namespace {

constexpr int kUsage = 2;
constexpr int kUnobservable = 3;

struct Options {
  std::string grid = "data/ieee14cdf.txt";
  std::string scenario, placement, config, format, mode, links, out;
  std::size_t trials = 2500;
  std::uint64_t seed = 1;
  std::size_t overhead = 210;
  int rate = 50;
  double noise = 0.0;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--grid", o.grid, "IEEE common data format case");
  sub->add_option("--scenario", o.scenario, "operating point CSV (default: solved case in --grid)");
  sub->add_option("--placement", o.placement, "monitored buses, e.g. 2,6,7,9");
  sub->add_option("--config", o.config, "frame config")->check(CLI::IsMember({"A", "B"}));
  sub->add_option("--format", o.format, "number format")->check(CLI::IsMember({"fixed", "float"}));
  sub->add_option("--mode", o.mode, "CVO placement")->check(CLI::IsMember({"local", "remote"}));
  sub->add_option("--links", o.links, "link config JSON");
  sub->add_option("--trials", o.trials, "reporting periods to simulate")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "root seed");
  sub->add_option("--overhead", o.overhead, "per-message protocol overhead, bytes");
  sub->add_option("--rate", o.rate, "reporting rate, fps")->check(CLI::IsMember({10, 25, 50}));
  sub->add_option("--noise", o.noise, "relative phasor noise")->check(CLI::NonNegativeNumber);
  sub->add_option("--out", o.out, "directory for CSV reports");
}

ExperimentConfig to_config(const Options& o) {
  ExperimentConfig c;
  c.grid = o.grid;
  if (!o.scenario.empty()) c.scenario = o.scenario;
  if (!o.placement.empty()) c.placement = o.placement;
  if (!o.config.empty()) c.config = o.config == "A" ? FrameConfig::A : FrameConfig::B;
  if (!o.format.empty()) c.format = o.format == "fixed" ? NumberFormat::fixed16 : NumberFormat::float32;
  if (!o.mode.empty()) c.mode = o.mode == "local" ? CvoPlacement::local : CvoPlacement::remote;
  if (!o.links.empty()) c.links = o.links;
  c.trials = o.trials;
  c.seed = o.seed;
  c.overhead = o.overhead;
  c.rate = o.rate;
  c.noise = o.noise;
  if (!o.out.empty()) c.out = o.out;
  return c;
}

template <typename Writer>
void write_report(const ExperimentConfig& c, const std::string& name, Writer&& w) {
  if (!c.out) return;
  fs::create_directories(*c.out);
  const auto path = *c.out / name;
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  w(os);
}

int run_bandwidth(const ExperimentConfig& c) {
  const auto rows = cmd_bandwidth(c);
  print_bandwidth_table(std::cout, rows);
  write_report(c, "bandwidth.csv", [&](std::ostream& os) { write_bandwidth_csv(os, rows); });
  return 0;
}

int run_latency_cmd(ExperimentConfig c) {
  if (!c.links) c.links = "data/links_calibrated.json";
  const auto reports = cmd_latency(c);
  print_latency_table(std::cout, reports);
  for (const auto& r : reports) {
    const auto m = to_string(r.mode);
    write_report(c, "latency_" + m + ".csv", [&](std::ostream& os) { write_latency_csv(os, r); });
    write_report(c, "cdf_" + m + ".csv", [&](std::ostream& os) { write_cdf_csv(os, r); });
  }
  write_report(c, "latency_summary.csv", [&](std::ostream& os) { write_latency_summary_csv(os, reports); });
  return 0;
}

int run_se(const ExperimentConfig& c) {
  const auto r = cmd_se(c);
  print_se_report(std::cout, r);
  write_report(c, "estimate.csv", [&](std::ostream& os) { write_estimate_csv(os, r); });
  write_report(c, "timing.csv", [&](std::ostream& os) { write_timing_csv(os, r); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtualized PMU deployment simulator"};
  app.require_subcommand(1);
  Options o;

  auto* bw = app.add_subcommand("bandwidth", "node bandwidth for local vs remote concentration");
  auto* lat = app.add_subcommand("latency", "end-to-end latency campaign");
  auto* se = app.add_subcommand("se", "state estimation on delivered aggregates");
  auto* dump = app.add_subcommand("dump-grid", "write buses.csv and branches.csv");
  for (auto* s : {bw, lat, se, dump}) add_common(s, o);

  auto* topics = app.add_subcommand("topics", "check a topic name against a filter");
  std::string filter, name;
  topics->add_option("filter", filter, "topic filter")->required();
  topics->add_option("name", name, "topic name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*topics) {
      const bool hit = cmd_topics(filter, name);
      std::cout << (hit ? "true" : "false") << '\n';
      return hit ? 0 : 1;
    }
    const auto c = to_config(o);
    if (*bw) return run_bandwidth(c);
    if (*lat) return run_latency_cmd(c);
    if (*se) return run_se(c);
    if (*dump) {
      cmd_dump_grid(c, c.out.value_or("."));
      return 0;
    }
  } catch (const UnobservableError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnobservable;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
