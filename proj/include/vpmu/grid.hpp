#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vpmu {

using BusId = int;
using Complex = std::complex<double>;

struct Bus {
  BusId id = 0;
  std::string name;
  /// 0 when the source file leaves the base voltage unspecified.
  double base_kv = 0.0;
  int type = 0;
  double v_mag = 1.0;
  double v_angle_deg = 0.0;
};

struct Branch {
  BusId from = 0;
  BusId to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_total = 0.0;
  double tap = 1.0;

  bool operator==(const Branch&) const = default;
};

/// Pi-model terms of a branch. The current leaving bus `from` is
/// series * (V_from - V_to) + shunt_from * V_from, and symmetrically for `to`.
struct BranchAdmittance {
  Complex series;
  Complex shunt_from;
  Complex shunt_to;
};

BranchAdmittance branch_admittance(const Branch& b);

/// Bus/branch network, 100 MVA per-unit base. Immutable once built.
class GridModel {
 public:
  GridModel() = default;
  GridModel(std::vector<Bus> buses, std::vector<Branch> branches);

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }

  bool has_bus(BusId id) const { return index_.count(id) != 0; }
  /// Position of `id` in buses(); throws ValidationError when unknown.
  std::size_t bus_index(BusId id) const;
  const Bus& bus(BusId id) const { return buses_[bus_index(id)]; }

  bool operator==(const GridModel& other) const;

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::map<BusId, std::size_t> index_;
};

/// Parses the bus and branch sections of an IEEE Common Data Format case.
GridModel parse_cdf(std::string_view text);
GridModel load_cdf(const std::filesystem::path& path);

/// Indices into g.branches() touching `node`, sorted by (from, to).
std::vector<std::size_t> incident_branch_indices(const GridModel& g, BusId node);
std::vector<Branch> incident_branches(const GridModel& g, BusId node);

/// A single measured quantity: the voltage at `node`, or the current on
/// `branch` observed at the `node` end.
struct Descriptor {
  enum class Kind { voltage, current };

  Kind kind = Kind::voltage;
  BusId node = 0;
  std::size_t branch = 0;

  static Descriptor voltage(BusId node) { return {Kind::voltage, node, 0}; }
  static Descriptor current(BusId node, std::size_t branch) {
    return {Kind::current, node, branch};
  }

  auto operator<=>(const Descriptor&) const = default;
};

std::string describe(const GridModel& g, const Descriptor& d);

struct PmuAssignment {
  BusId node = 0;
  std::vector<Descriptor> channels;
};

struct PmuPlacement {
  std::set<BusId> monitored;
  int channels_per_pmu = 2;
  std::map<BusId, std::vector<PmuAssignment>> assignments;

  std::size_t pmu_count() const;
  /// All PMUs in node order, then device order within a node.
  std::vector<PmuAssignment> devices() const;
  /// All descriptors in device order.
  std::vector<Descriptor> descriptors() const;
};

/// Packs each monitored node's voltage and incident branch currents (voltage
/// first, branches by (from, to)) greedily into devices of `channels_per_pmu`.
PmuPlacement build_placement(const GridModel& g, const std::set<BusId>& monitored,
                             int channels_per_pmu);

/// Parses "2,6,7,9" into a bus set.
std::set<BusId> parse_bus_list(std::string_view text);

void write_buses_csv(const GridModel& g, const std::filesystem::path& path);
void write_branches_csv(const GridModel& g, const std::filesystem::path& path);

}  // namespace vpmu
