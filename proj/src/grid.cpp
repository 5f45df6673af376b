#include "vpmu/grid.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vpmu/error.hpp"

namespace vpmu {

namespace {

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& s, std::size_t line, const char* field) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + field + " '" + s + "'", line);
  }
}

int to_int(const std::string& s, std::size_t line, const char* field) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(std::string("bad ") + field + " '" + s + "'", line);
  return v;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool is_terminator(std::string_view line) {
  auto t = trim(line);
  return t.size() >= 3 && t.rfind("-99", 0) == 0 &&
         std::all_of(t.begin() + 1, t.end(), [](char c) { return c == '9'; });
}

// Columns 1-4 bus number, 6-17 name; the numeric fields after column 18 are
// whitespace separated in every archive file we read.
Bus parse_bus_record(std::string_view line, std::size_t lineno) {
  if (line.size() < 19) throw ParseError("bus record too short", lineno);
  Bus b;
  b.id = to_int(trim(line.substr(0, 4)), lineno, "bus number");
  b.name = trim(line.substr(5, 12));
  auto tok = split_ws(line.substr(18));
  if (tok.size() < 10) throw ParseError("bus record has too few fields", lineno);
  b.type = to_int(tok[2], lineno, "bus type");
  b.v_mag = to_double(tok[3], lineno, "voltage");
  b.v_angle_deg = to_double(tok[4], lineno, "angle");
  b.base_kv = to_double(tok[9], lineno, "base kV");
  return b;
}

Branch parse_branch_record(std::string_view line, std::size_t lineno) {
  auto tok = split_ws(line);
  if (tok.size() < 15) throw ParseError("branch record has too few fields", lineno);
  Branch br;
  br.from = to_int(tok[0], lineno, "tap bus");
  br.to = to_int(tok[1], lineno, "z bus");
  br.r = to_double(tok[6], lineno, "resistance");
  br.x = to_double(tok[7], lineno, "reactance");
  br.b_total = to_double(tok[8], lineno, "charging");
  br.tap = to_double(tok[14], lineno, "turns ratio");
  if (br.tap == 0.0) br.tap = 1.0;
  return br;
}

}  // namespace

BranchAdmittance branch_admittance(const Branch& b) {
  if (b.r == 0.0 && b.x == 0.0) throw ValidationError("branch has zero impedance");
  if (!(b.tap > 0.0)) throw ValidationError("branch tap must be positive");
  const Complex ys = 1.0 / Complex(b.r, b.x);
  const Complex half_charging(0.0, b.b_total / 2.0);
  const double t = b.tap;
  // Off-nominal ratio t:1 on the from side. Terminal currents:
  //   I_from = (ys + jb/2)/t^2 V_from - ys/t V_to
  //   I_to   = -ys/t V_from + (ys + jb/2) V_to
  BranchAdmittance a;
  a.series = ys / t;
  a.shunt_from = ys * (1.0 - t) / (t * t) + half_charging / (t * t);
  a.shunt_to = ys * (1.0 - 1.0 / t) + half_charging;
  return a;
}

GridModel::GridModel(std::vector<Bus> buses, std::vector<Branch> branches)
    : buses_(std::move(buses)), branches_(std::move(branches)) {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto& b = buses_[i];
    if (b.id <= 0) throw ValidationError("bus id must be positive");
    if (b.base_kv < 0.0) throw ValidationError("bus " + std::to_string(b.id) + " has negative base kV");
    if (!index_.emplace(b.id, i).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
  }
  for (const auto& br : branches_) {
    if (!has_bus(br.from) || !has_bus(br.to))
      throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                            " references an unknown bus");
    if (br.from == br.to) throw ValidationError("branch endpoints must differ");
    if (br.r == 0.0 && br.x == 0.0)
      throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                            " has zero impedance");
    if (!(br.tap > 0.0)) throw ValidationError("branch tap must be positive");
  }
}

std::size_t GridModel::bus_index(BusId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown bus " + std::to_string(id));
  return it->second;
}

bool GridModel::operator==(const GridModel& other) const {
  if (buses_.size() != other.buses_.size() || branches_ != other.branches_) return false;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto &a = buses_[i], &b = other.buses_[i];
    if (a.id != b.id || a.name != b.name || a.base_kv != b.base_kv || a.type != b.type ||
        a.v_mag != b.v_mag || a.v_angle_deg != b.v_angle_deg)
      return false;
  }
  return true;
}

GridModel parse_cdf(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(text)};
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
  }

  enum class Section { none, bus, branch, done } section = Section::none;
  bool saw_bus = false, saw_branch = false;
  std::vector<Bus> buses;
  std::vector<Branch> branches;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::size_t lineno = i + 1;
    switch (section) {
      case Section::none:
        if (starts_with(line, "BUS DATA FOLLOWS")) {
          section = Section::bus;
          saw_bus = true;
        } else if (starts_with(line, "BRANCH DATA FOLLOWS")) {
          if (!saw_bus) throw ParseError("branch section before bus section", lineno);
          section = Section::branch;
          saw_branch = true;
        }
        break;
      case Section::bus:
        if (is_terminator(line)) {
          section = Section::none;
        } else if (!trim(line).empty()) {
          buses.push_back(parse_bus_record(line, lineno));
        }
        break;
      case Section::branch:
        if (is_terminator(line)) {
          section = Section::done;
        } else if (!trim(line).empty()) {
          branches.push_back(parse_branch_record(line, lineno));
        }
        break;
      case Section::done:
        break;
    }
    if (section == Section::done) break;
  }

  if (!saw_bus) throw ParseError("missing bus section", lines.size());
  if (section == Section::bus) throw ParseError("unterminated bus section", lines.size());
  if (!saw_branch) throw ParseError("missing branch section", lines.size());
  if (section == Section::branch) throw ParseError("unterminated branch section", lines.size());
  return GridModel(std::move(buses), std::move(branches));
}

GridModel load_cdf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cdf(ss.str());
}

std::vector<std::size_t> incident_branch_indices(const GridModel& g, BusId node) {
  if (!g.has_bus(node)) throw ValidationError("unknown bus " + std::to_string(node));
  std::vector<std::size_t> out;
  const auto& br = g.branches();
  for (std::size_t i = 0; i < br.size(); ++i)
    if (br[i].from == node || br[i].to == node) out.push_back(i);
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(br[a].from, br[a].to) < std::pair(br[b].from, br[b].to);
  });
  return out;
}

std::vector<Branch> incident_branches(const GridModel& g, BusId node) {
  std::vector<Branch> out;
  for (auto i : incident_branch_indices(g, node)) out.push_back(g.branches()[i]);
  return out;
}

std::string describe(const GridModel& g, const Descriptor& d) {
  if (d.kind == Descriptor::Kind::voltage) return "V" + std::to_string(d.node);
  const auto& b = g.branches().at(d.branch);
  const BusId other = b.from == d.node ? b.to : b.from;
  return "I" + std::to_string(d.node) + "-" + std::to_string(other);
}

std::size_t PmuPlacement::pmu_count() const {
  std::size_t n = 0;
  for (const auto& [node, pmus] : assignments) n += pmus.size();
  return n;
}

std::vector<PmuAssignment> PmuPlacement::devices() const {
  std::vector<PmuAssignment> out;
  for (const auto& [node, pmus] : assignments) out.insert(out.end(), pmus.begin(), pmus.end());
  return out;
}

std::vector<Descriptor> PmuPlacement::descriptors() const {
  std::vector<Descriptor> out;
  for (const auto& dev : devices()) out.insert(out.end(), dev.channels.begin(), dev.channels.end());
  return out;
}

PmuPlacement build_placement(const GridModel& g, const std::set<BusId>& monitored,
                             int channels_per_pmu) {
  if (channels_per_pmu < 1) throw ValidationError("channels per PMU must be at least 1");
  PmuPlacement p;
  p.monitored = monitored;
  p.channels_per_pmu = channels_per_pmu;
  for (BusId node : monitored) {
    if (!g.has_bus(node)) throw ValidationError("unknown monitored bus " + std::to_string(node));
    std::vector<Descriptor> all{Descriptor::voltage(node)};
    for (auto bi : incident_branch_indices(g, node)) all.push_back(Descriptor::current(node, bi));

    auto& pmus = p.assignments[node];
    for (std::size_t i = 0; i < all.size(); i += static_cast<std::size_t>(channels_per_pmu)) {
      PmuAssignment dev{node, {}};
      const auto end = std::min(all.size(), i + static_cast<std::size_t>(channels_per_pmu));
      dev.channels.assign(all.begin() + static_cast<std::ptrdiff_t>(i),
                          all.begin() + static_cast<std::ptrdiff_t>(end));
      pmus.push_back(std::move(dev));
    }
  }
  return p;
}

std::set<BusId> parse_bus_list(std::string_view text) {
  std::set<BusId> out;
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  for (const auto& tok : split_ws(s)) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0)
      throw ConfigError("bad bus id '" + tok + "' in list");
    out.insert(v);
  }
  if (out.empty()) throw ConfigError("empty bus list");
  return out;
}

void write_buses_csv(const GridModel& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "id,name,base_kv,type,v_mag,v_angle_deg\n";
  for (const auto& b : g.buses())
    out << b.id << ',' << b.name << ',' << b.base_kv << ',' << b.type << ',' << b.v_mag << ','
        << b.v_angle_deg << '\n';
}

void write_branches_csv(const GridModel& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "from,to,r,x,b,tap\n";
  for (const auto& b : g.branches())
    out << b.from << ',' << b.to << ',' << b.r << ',' << b.x << ',' << b.b_total << ',' << b.tap
        << '\n';
}

}  // namespace vpmu
