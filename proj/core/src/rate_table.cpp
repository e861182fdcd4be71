#include <cmath>
#include <fstream>
#include <sstream>

#include "medguard/error.hpp"
#include "medguard/reliability.hpp"

namespace medguard::reliability {
namespace {

constexpr std::array<Edge, 15> kFailureEdges = {{
    {1, 2}, {1, 3}, {1, 4}, {1, 5}, {2, 8}, {2, 9}, {3, 6}, {3, 7},
    {5, 11}, {6, 10}, {7, 10}, {8, 11}, {9, 11}, {10, 12}, {11, 12},
}};

constexpr std::array<Edge, 10> kRecoveryEdges = {{
    {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 3}, {7, 3}, {8, 2}, {9, 2}, {11, 1}, {12, 1},
}};

std::string edge_name(RateKind kind, int from, int to) {
  return std::string(kind == RateKind::failure ? "lambda" : "mu") + "(" + std::to_string(from) + "," +
         std::to_string(to) + ")";
}

}  // namespace

std::span<const Edge> failure_edges() noexcept { return kFailureEdges; }
std::span<const Edge> recovery_edges() noexcept { return kRecoveryEdges; }

std::optional<RateKind> edge_kind(int from, int to) noexcept {
  const Edge e{from, to};
  for (const auto& f : kFailureEdges) {
    if (f == e) return RateKind::failure;
  }
  for (const auto& r : kRecoveryEdges) {
    if (r == e) return RateKind::recovery;
  }
  return std::nullopt;
}

void RateTable::set(RateKind kind, int from, int to, double rate) {
  if (edge_kind(from, to) != kind) {
    throw Error(Errc::unknown_edge, edge_name(kind, from, to) + " is not a transition of the model");
  }
  if (!std::isfinite(rate) || rate < 0.0) {
    throw Error(Errc::negative_rate, edge_name(kind, from, to) + " = " + std::to_string(rate));
  }
  rates_[Edge{from, to}] = rate;
}

void RateTable::set_failure(int from, int to, double rate) { set(RateKind::failure, from, to, rate); }
void RateTable::set_recovery(int from, int to, double rate) { set(RateKind::recovery, from, to, rate); }

double RateTable::rate(int from, int to) const noexcept {
  auto it = rates_.find(Edge{from, to});
  return it == rates_.end() ? 0.0 : it->second;
}

bool RateTable::is_set(int from, int to) const noexcept { return rates_.contains(Edge{from, to}); }

std::vector<Edge> RateTable::defaulted_edges() const {
  std::vector<Edge> out;
  for (const auto& e : kFailureEdges) {
    if (!is_set(e.from, e.to)) out.push_back(e);
  }
  for (const auto& e : kRecoveryEdges) {
    if (!is_set(e.from, e.to)) out.push_back(e);
  }
  return out;
}

RateTable RateTable::table_one() {
  RateTable t;
  t.set_failure(1, 2, 1.857e-9);
  t.set_failure(1, 3, 2.499e-7);
  t.set_failure(1, 4, 3.331e-7);
  t.set_failure(1, 5, 4.985e-7);
  t.set_failure(2, 8, 2.50e-7);
  t.set_failure(2, 9, 2.50e-7);
  t.set_failure(3, 6, 7.50e-3);
  t.set_failure(3, 7, 3.56e-5);
  t.set_failure(6, 10, 1.28e-2);
  t.set_failure(7, 10, 1.63e-2);
  t.set_failure(8, 11, 2.00e-4);
  t.set_failure(9, 11, 3.11e-5);
  t.set_failure(10, 12, 2.70e-3);
  t.set_failure(11, 12, 25.87e-3);

  t.set_recovery(2, 1, 99.57e-2);
  t.set_recovery(3, 1, 95.08e-2);
  t.set_recovery(4, 1, 98.76e-2);
  t.set_recovery(5, 1, 92.37e-2);
  t.set_recovery(6, 3, 2.12e-3);
  t.set_recovery(7, 3, 4.07e-3);
  t.set_recovery(8, 2, 4.20e-4);
  t.set_recovery(9, 2, 2.93e-4);
  t.set_recovery(11, 1, 1.23e-6);
  t.set_recovery(12, 1, 1.857e-8);
  return t;
}

RateTable RateTable::parse(std::string_view text) {
  RateTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string keyword;
    if (!(fields >> keyword)) continue;
    const std::string where = "rates line " + std::to_string(line_no) + ": ";
    if (keyword == "unit") {
      if (!(fields >> table.time_unit)) throw Error(Errc::invalid_argument, where + "unit needs a name");
      continue;
    }
    RateKind kind;
    if (keyword == "lambda") {
      kind = RateKind::failure;
    } else if (keyword == "mu") {
      kind = RateKind::recovery;
    } else {
      throw Error(Errc::invalid_argument, where + "unknown keyword '" + keyword + "'");
    }
    int from = 0, to = 0;
    std::string value_text, trailing;
    if (!(fields >> from >> to >> value_text) || (fields >> trailing)) {
      throw Error(Errc::invalid_argument, where + "expected '" + keyword + " <i> <j> <value>'");
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(value_text, &used);
      if (used != value_text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, where + "bad rate '" + value_text + "'");
    }
    if (table.is_set(from, to)) throw Error(Errc::invalid_argument, where + "duplicate rate");
    try {
      table.set(kind, from, to, value);
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  return table;
}

RateTable RateTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string RateTable::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "unit " << time_unit << '\n';
  for (const auto& [edge, rate] : rates_) {
    out << (edge_kind(edge.from, edge.to) == RateKind::failure ? "lambda " : "mu ") << edge.from << ' ' << edge.to << ' '
        << rate << '\n';
  }
  return out.str();
}

}  // namespace medguard::reliability
