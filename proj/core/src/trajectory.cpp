#include "h2blend/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "h2blend/errors.hpp"

namespace h2blend {

const char* edge_type_name(EdgeType type) {
  return type == EdgeType::compressor ? "compressor" : "pipe";
}

namespace {

template <class T, class Key>
const T& find_by(const std::vector<T>& items, const std::string& id, Key key, const char* what) {
  for (const T& item : items) {
    if (item.*key == id) return item;
  }
  throw std::out_of_range(std::string("trajectory has no ") + what + " " + id);
}

}  // namespace

const NodeSeries& SolutionTrajectory::node(const std::string& id) const {
  return find_by(nodes, id, &NodeSeries::id, "node");
}
const EdgeSeries& SolutionTrajectory::edge(const std::string& id) const {
  return find_by(edges, id, &EdgeSeries::id, "edge");
}
const TransferSeries& SolutionTrajectory::transfer(const std::string& id) const {
  return find_by(transfers, id, &TransferSeries::node, "transfer node");
}

SolutionTrajectory extract_trajectory(const NlpProblem& p, std::span<const double> x) {
  const VariableIndex& ix = p.index;
  if (static_cast<int>(x.size()) != ix.total()) {
    throw std::invalid_argument("extract_trajectory: vector has " + std::to_string(x.size()) +
                                " values, problem has " + std::to_string(ix.total()));
  }
  const Network& net = p.segnet.net;
  const double rho0 = p.scales.rho0;
  const double fs = p.flow_scale;
  const double es = p.energy_scale;
  const int steps = ix.steps;
  auto at = [&](int v) { return x[static_cast<std::size_t>(v)]; };

  SolutionTrajectory tr;
  tr.dt_h = p.grid.dt_h;
  tr.horizon_h = p.grid.horizon_h;
  tr.xi = p.scenario.xi;
  for (int t = 0; t < steps; ++t) tr.time_h.push_back(p.grid.time(t));

  for (int i = 0; i < ix.nodes; ++i) {
    NodeSeries s;
    s.id = net.nodes[static_cast<std::size_t>(i)].id;
    for (int t = 0; t < steps; ++t) {
      const NodeValues v{at(ix.rho_h2(i, t)), at(ix.rho_ng(i, t)), at(ix.eta(i, t))};
      s.rho_h2.push_back(v.rho_h2 * rho0);
      s.rho_ng.push_back(v.rho_ng * rho0);
      s.eta.push_back(v.eta);
      s.p.push_back(pressure_hat(v, p.gas) * p.scales.p0);
    }
    tr.nodes.push_back(std::move(s));
  }
  for (int k = 0; k < ix.segments; ++k) {
    const Pipe& pipe = net.pipes[static_cast<std::size_t>(k)];
    EdgeSeries e{pipe.id, EdgeType::pipe, pipe.from, pipe.to, {}, {}, {}, {}};
    for (int t = 0; t < steps; ++t) {
      e.f0.push_back(at(ix.f0(k, t)) * fs);
      e.fl.push_back(at(ix.fl(k, t)) * fs);
      e.gamma_l.push_back(at(ix.gamma_l(k, t)));
      e.alpha.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    tr.edges.push_back(std::move(e));
  }
  for (int c = 0; c < ix.compressors; ++c) {
    const Compressor& comp = net.compressors[static_cast<std::size_t>(c)];
    EdgeSeries e{comp.id, EdgeType::compressor, comp.from, comp.to, {}, {}, {}, {}};
    const int from = p.comp_from[static_cast<std::size_t>(c)];
    for (int t = 0; t < steps; ++t) {
      const double f = at(ix.fc(c, t)) * fs;
      e.f0.push_back(f);
      e.fl.push_back(f);
      e.gamma_l.push_back(at(ix.eta(from, t)));
      e.alpha.push_back(at(ix.alpha(c, t)));
    }
    tr.edges.push_back(std::move(e));
  }
  for (int i = 0; i < ix.nodes; ++i) {
    const Node& nd = net.nodes[static_cast<std::size_t>(i)];
    if (!nd.is_supply() && !nd.is_withdrawal()) continue;
    TransferSeries s;
    s.node = nd.id;
    for (int t = 0; t < steps; ++t) {
      s.eta_s.push_back(nd.is_supply() ? p.scenario.supply_fraction(nd.id, p.grid.time(t)) : 0.0);
      s.q_s.push_back(nd.is_supply() ? at(ix.qs(i, t)) * fs : 0.0);
      s.q_w.push_back(nd.is_withdrawal() ? at(ix.qw(i, t)) * fs : 0.0);
      s.g_e.push_back(nd.is_withdrawal() ? at(ix.ge(i, t)) * es : 0.0);
    }
    tr.transfers.push_back(std::move(s));
  }
  tr.objective = evaluate_objective(p, x);
  return tr;
}

std::vector<double> trajectory_variables(const NlpProblem& p, const SolutionTrajectory& tr) {
  const VariableIndex& ix = p.index;
  const Network& net = p.segnet.net;
  if (tr.steps() != ix.steps) {
    throw std::invalid_argument("trajectory has " + std::to_string(tr.steps()) +
                                " steps, problem has " + std::to_string(ix.steps));
  }
  if (static_cast<int>(tr.nodes.size()) != ix.nodes ||
      static_cast<int>(tr.edges.size()) != ix.segments + ix.compressors) {
    throw std::invalid_argument("trajectory entities do not match the problem");
  }
  auto check_len = [&](std::size_t n, const std::string& id) {
    if (static_cast<int>(n) != ix.steps) {
      throw std::invalid_argument("trajectory series of " + id + " has the wrong length");
    }
  };
  const double rho0 = p.scales.rho0;
  const double fs = p.flow_scale;
  const double es = p.energy_scale;
  std::vector<double> x(static_cast<std::size_t>(ix.total()), 0.0);
  auto set = [&](int v, double value) { x[static_cast<std::size_t>(v)] = value; };

  for (int i = 0; i < ix.nodes; ++i) {
    const NodeSeries& s = tr.node(net.nodes[static_cast<std::size_t>(i)].id);
    check_len(s.rho_h2.size(), s.id);
    check_len(s.rho_ng.size(), s.id);
    check_len(s.eta.size(), s.id);
    for (int t = 0; t < ix.steps; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      set(ix.rho_h2(i, t), s.rho_h2[ts] / rho0);
      set(ix.rho_ng(i, t), s.rho_ng[ts] / rho0);
      set(ix.eta(i, t), s.eta[ts]);
    }
  }
  for (int k = 0; k < ix.segments; ++k) {
    const EdgeSeries& e = tr.edge(net.pipes[static_cast<std::size_t>(k)].id);
    check_len(e.f0.size(), e.id);
    check_len(e.fl.size(), e.id);
    check_len(e.gamma_l.size(), e.id);
    for (int t = 0; t < ix.steps; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      set(ix.f0(k, t), e.f0[ts] / fs);
      set(ix.fl(k, t), e.fl[ts] / fs);
      set(ix.gamma_l(k, t), e.gamma_l[ts]);
    }
  }
  for (int c = 0; c < ix.compressors; ++c) {
    const EdgeSeries& e = tr.edge(net.compressors[static_cast<std::size_t>(c)].id);
    check_len(e.f0.size(), e.id);
    check_len(e.alpha.size(), e.id);
    for (int t = 0; t < ix.steps; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      set(ix.fc(c, t), e.f0[ts] / fs);
      set(ix.alpha(c, t), e.alpha[ts]);
    }
  }
  for (int i = 0; i < ix.nodes; ++i) {
    const Node& nd = net.nodes[static_cast<std::size_t>(i)];
    if (!nd.is_supply() && !nd.is_withdrawal()) continue;
    const TransferSeries& s = tr.transfer(nd.id);
    check_len(s.q_s.size(), s.node);
    check_len(s.q_w.size(), s.node);
    check_len(s.g_e.size(), s.node);
    for (int t = 0; t < ix.steps; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      if (nd.is_supply()) set(ix.qs(i, t), s.q_s[ts] / fs);
      if (nd.is_withdrawal()) {
        set(ix.qw(i, t), s.q_w[ts] / fs);
        set(ix.ge(i, t), s.g_e[ts] / es);
      }
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.precision(17);
  s << v;
  return s.str();
}

std::string field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

struct CsvTable {
  std::string file;
  std::vector<std::vector<std::string>> rows;  // data rows only
};

CsvTable read_csv(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open");
  CsvTable t;
  t.file = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(t.file, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ParseError(t.file, "unexpected header '" + line + "'");
  const std::size_t width = split_csv(header).size();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != width) {
      throw ParseError(t.file + ":" + std::to_string(lineno), "expected " +
                                                                 std::to_string(width) + " fields");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double parse_num(const std::string& text, const std::string& where) {
  if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(where, "not a number: '" + text + "'");
  }
  return v;
}

// Index of `id` in `order`, appending it on first sight.
std::size_t slot(std::map<std::string, std::size_t>& seen, std::vector<std::string>& order,
                 const std::string& id) {
  auto [it, inserted] = seen.try_emplace(id, order.size());
  if (inserted) order.push_back(id);
  return it->second;
}

constexpr const char* kNodesHeader = "time_h,node,rho_H2_kg_m3,rho_NG_kg_m3,eta,p_Pa,p_MPa";
constexpr const char* kEdgesHeader = "time_h,edge,type,from,to,f0_kg_s,fL_kg_s,gamma_L,alpha";
constexpr const char* kTransfersHeader = "time_h,node,eta_s,q_s_kg_s,q_w_kg_s,g_E_MJ_s";
constexpr const char* kObjectiveHeader = "R_e_usd,R_c_usd,total_usd,xi,horizon_h,dt_h";

}  // namespace

void write_solution(const SolutionTrajectory& tr, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  const auto steps = static_cast<std::size_t>(tr.steps());

  std::ofstream nodes = open_out(dir / "nodes.csv");
  nodes << kNodesHeader << '\n';
  for (std::size_t t = 0; t < steps; ++t) {
    for (const NodeSeries& s : tr.nodes) {
      nodes << num(tr.time_h[t]) << ',' << field(s.id) << ',' << num(s.rho_h2[t]) << ','
            << num(s.rho_ng[t]) << ',' << num(s.eta[t]) << ',' << num(s.p[t]) << ','
            << num(s.p[t] / 1e6) << '\n';
    }
  }

  std::ofstream edges = open_out(dir / "edges.csv");
  edges << kEdgesHeader << '\n';
  for (std::size_t t = 0; t < steps; ++t) {
    for (const EdgeSeries& e : tr.edges) {
      edges << num(tr.time_h[t]) << ',' << field(e.id) << ',' << edge_type_name(e.type) << ','
            << field(e.from) << ',' << field(e.to) << ',' << num(e.f0[t]) << ',' << num(e.fl[t])
            << ',' << num(e.gamma_l[t]) << ',' << num(e.alpha[t]) << '\n';
    }
  }

  std::ofstream transfers = open_out(dir / "transfers.csv");
  transfers << kTransfersHeader << '\n';
  for (std::size_t t = 0; t < steps; ++t) {
    for (const TransferSeries& s : tr.transfers) {
      transfers << num(tr.time_h[t]) << ',' << field(s.node) << ',' << num(s.eta_s[t]) << ','
                << num(s.q_s[t]) << ',' << num(s.q_w[t]) << ',' << num(s.g_e[t]) << '\n';
    }
  }

  std::ofstream obj = open_out(dir / "objective.csv");
  obj << kObjectiveHeader << '\n'
      << num(tr.objective.economic) << ',' << num(tr.objective.compression) << ','
      << num(tr.objective.total) << ',' << num(tr.xi) << ',' << num(tr.horizon_h) << ','
      << num(tr.dt_h) << '\n';
  for (std::ofstream* f : {&nodes, &edges, &transfers, &obj}) {
    f->flush();
    if (!*f) throw std::runtime_error("write failed in " + dir.string());
  }
}

SolutionTrajectory read_solution(const std::filesystem::path& dir) {
  SolutionTrajectory tr;

  const CsvTable obj = read_csv(dir / "objective.csv", kObjectiveHeader);
  if (obj.rows.size() != 1) throw ParseError(obj.file, "expected one data row");
  tr.objective.economic = parse_num(obj.rows[0][0], obj.file);
  tr.objective.compression = parse_num(obj.rows[0][1], obj.file);
  tr.objective.total = parse_num(obj.rows[0][2], obj.file);
  tr.xi = parse_num(obj.rows[0][3], obj.file);
  tr.horizon_h = parse_num(obj.rows[0][4], obj.file);
  tr.dt_h = parse_num(obj.rows[0][5], obj.file);

  // Time column: first appearance order in nodes.csv.
  std::map<std::string, std::size_t> time_seen;
  std::vector<std::string> time_order;
  auto time_slot = [&](const std::string& text) { return slot(time_seen, time_order, text); };

  const CsvTable nodes = read_csv(dir / "nodes.csv", kNodesHeader);
  std::map<std::string, std::size_t> node_seen;
  std::vector<std::string> node_order;
  for (const auto& r : nodes.rows) {
    time_slot(r[0]);
    const std::size_t k = slot(node_seen, node_order, r[1]);
    if (k == tr.nodes.size()) tr.nodes.push_back(NodeSeries{r[1], {}, {}, {}, {}});
    NodeSeries& s = tr.nodes[k];
    s.rho_h2.push_back(parse_num(r[2], nodes.file));
    s.rho_ng.push_back(parse_num(r[3], nodes.file));
    s.eta.push_back(parse_num(r[4], nodes.file));
    s.p.push_back(parse_num(r[5], nodes.file));
  }
  for (const std::string& t : time_order) tr.time_h.push_back(parse_num(t, nodes.file));

  const CsvTable edges = read_csv(dir / "edges.csv", kEdgesHeader);
  std::map<std::string, std::size_t> edge_seen;
  std::vector<std::string> edge_order;
  for (const auto& r : edges.rows) {
    const std::size_t k = slot(edge_seen, edge_order, r[1]);
    if (k == tr.edges.size()) {
      EdgeType type = EdgeType::pipe;
      if (r[2] == "compressor") {
        type = EdgeType::compressor;
      } else if (r[2] != "pipe") {
        throw ParseError(edges.file, "unknown edge type '" + r[2] + "'");
      }
      tr.edges.push_back(EdgeSeries{r[1], type, r[3], r[4], {}, {}, {}, {}});
    }
    EdgeSeries& e = tr.edges[k];
    e.f0.push_back(parse_num(r[5], edges.file));
    e.fl.push_back(parse_num(r[6], edges.file));
    e.gamma_l.push_back(parse_num(r[7], edges.file));
    e.alpha.push_back(parse_num(r[8], edges.file));
  }

  const CsvTable transfers = read_csv(dir / "transfers.csv", kTransfersHeader);
  std::map<std::string, std::size_t> tr_seen;
  std::vector<std::string> tr_order;
  for (const auto& r : transfers.rows) {
    const std::size_t k = slot(tr_seen, tr_order, r[1]);
    if (k == tr.transfers.size()) tr.transfers.push_back(TransferSeries{r[1], {}, {}, {}, {}});
    TransferSeries& s = tr.transfers[k];
    s.eta_s.push_back(parse_num(r[2], transfers.file));
    s.q_s.push_back(parse_num(r[3], transfers.file));
    s.q_w.push_back(parse_num(r[4], transfers.file));
    s.g_e.push_back(parse_num(r[5], transfers.file));
  }

  const std::size_t steps = tr.time_h.size();
  auto expect = [&](std::size_t n, const std::string& file, const std::string& id) {
    if (n != steps) throw ParseError(file, id + " has " + std::to_string(n) + " rows, expected " +
                                               std::to_string(steps));
  };
  for (const auto& s : tr.nodes) expect(s.eta.size(), nodes.file, s.id);
  for (const auto& e : tr.edges) expect(e.f0.size(), edges.file, e.id);
  for (const auto& s : tr.transfers) expect(s.q_s.size(), transfers.file, s.node);
  return tr;
}

}  // namespace h2blend
