#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gaugeflow/morse.hpp"
#include "gaugeflow/sphere.hpp"

namespace gaugeflow {

/// Shortest decimal that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw InvalidInput("not a number: '" + s + "'");
  return v;
}

/// Conventions every report carries so its numbers can be read in isolation.
inline std::string convention_block() {
  return "# loop_domain = [0, 2pi), t_j = 2 pi j / N_t\n"
         "# inner_product = -Re tr(XY); su(2) basis i sigma_a / sqrt2\n"
         "# E(x) = 1/2 int_0^{2pi} |x^-1 dx/dt|^2 dt\n"
         "# YM(u) = 1/2 int lambda^-1 |d_r u|^2 dr dt, lambda = sin r\n"
         "# energy_identity_C = 0.5  (YM = C E(Phi) + YM(m))\n";
}

/// '#' metadata + header + rows. Only appends; the caller owns the string.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  CsvWriter& meta(const std::string& key, const std::string& value) {
    meta_ += "# " + key + " = " + value + "\n";
    return *this;
  }
  CsvWriter& conventions() {
    meta_ += convention_block();
    return *this;
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw InvalidInput("CsvWriter: row width mismatch");
    for (size_t q = 0; q < cells.size(); ++q) body_ += (q ? "," : "") + cells[q];
    body_ += "\n";
  }

  std::string str() const {
    std::string head;
    for (size_t q = 0; q < columns_.size(); ++q) head += (q ? "," : "") + columns_[q];
    return meta_ + head + "\n" + body_;
  }

 private:
  std::vector<std::string> columns_;
  std::string meta_, body_;
};

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    throw InvalidInput("missing metadata '" + key + "'");
  }
  int column(const std::string& name) const {
    for (size_t q = 0; q < columns.size(); ++q)
      if (columns[q] == name) return static_cast<int>(q);
    throw InvalidInput("missing column '" + name + "'");
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) t.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      continue;
    }
    if (t.columns.empty()) t.columns = split(line);
    else t.rows.push_back(split(line));
  }
  return t;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot write '" + path + "'");
  f << content;
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace detail {

inline std::vector<std::string> matrix_columns(Group g) {
  std::vector<std::string> c;
  const int m = matrix_size(g);
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) {
      c.push_back("m" + std::to_string(p) + std::to_string(q) + "_re");
      c.push_back("m" + std::to_string(p) + std::to_string(q) + "_im");
    }
  return c;
}

inline void matrix_cells(const Matrix& mat, std::vector<std::string>& row) {
  for (int p = 0; p < mat.rows(); ++p)
    for (int q = 0; q < mat.cols(); ++q) {
      row.push_back(fmt(mat(p, q).real()));
      row.push_back(fmt(mat(p, q).imag()));
    }
}

}  // namespace detail

/// Field checkpoint: matrix entries per node plus the algebra coordinates,
/// which are what the reader restores (bit-exact).
inline std::string field_checkpoint(const RadialGaugeField& u, double s = 0.0, std::uint64_t seed = 0) {
  std::vector<std::string> cols{"i", "j"};
  for (const auto& c : detail::matrix_columns(u.group)) cols.push_back(c);
  for (int a = 0; a < u.dim(); ++a) cols.push_back("c" + std::to_string(a));
  CsvWriter w(cols);
  w.meta("kind", "radial_gauge_field")
      .meta("group", group_name(u.group))
      .meta("N_r", fmt(u.grid.n_r))
      .meta("N_t", fmt(u.grid.n_t))
      .meta("s", fmt(s))
      .meta("seed", std::to_string(seed))
      .conventions();
  for (int i = 0; i <= u.grid.n_r; ++i)
    for (int j = 0; j < u.grid.n_t; ++j) {
      std::vector<std::string> row{fmt(i), fmt(j)};
      detail::matrix_cells(u.element(i, j).matrix, row);
      for (int a = 0; a < u.dim(); ++a) row.push_back(fmt(u.at(i, j)[a]));
      w.row(row);
    }
  return w.str();
}

inline RadialGaugeField read_field_checkpoint(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.meta_value("kind") != "radial_gauge_field") throw InvalidInput("not a field checkpoint");
  const Group g = parse_group(t.meta_value("group"));
  const SphereGrid grid(static_cast<int>(parse_double(t.meta_value("N_r"))),
                        static_cast<int>(parse_double(t.meta_value("N_t"))));
  RadialGaugeField u(grid, g);
  if (t.rows.size() != static_cast<size_t>(grid.n_r + 1) * grid.n_t)
    throw InvalidInput("field checkpoint has the wrong number of rows");
  const int ci = t.column("i"), cj = t.column("j"), c0 = t.column("c0");
  for (const auto& row : t.rows) {
    const int i = static_cast<int>(parse_double(row.at(ci))), j = static_cast<int>(parse_double(row.at(cj)));
    if (i < 0 || i > grid.n_r || j < 0 || j >= grid.n_t) throw InvalidInput("node index out of range");
    for (int a = 0; a < u.dim(); ++a) u.at(i, j)[a] = parse_double(row.at(c0 + a));
  }
  return u;
}

inline std::string loop_checkpoint(const GroupLoop& x, double s = 0.0, std::uint64_t seed = 0) {
  std::vector<std::string> cols{"j"};
  for (const auto& c : detail::matrix_columns(x.group)) cols.push_back(c);
  CsvWriter w(cols);
  w.meta("kind", "group_loop")
      .meta("group", group_name(x.group))
      .meta("N_t", fmt(x.size()))
      .meta("s", fmt(s))
      .meta("seed", std::to_string(seed))
      .conventions();
  for (int j = 0; j < x.size(); ++j) {
    std::vector<std::string> row{fmt(j)};
    detail::matrix_cells(x.samples[j].matrix, row);
    w.row(row);
  }
  return w.str();
}

inline GroupLoop read_loop_checkpoint(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.meta_value("kind") != "group_loop") throw InvalidInput("not a loop checkpoint");
  const Group g = parse_group(t.meta_value("group"));
  const int n = static_cast<int>(parse_double(t.meta_value("N_t")));
  if (t.rows.size() != static_cast<size_t>(n)) throw InvalidInput("loop checkpoint has the wrong number of rows");
  GroupLoop x(g, n);
  const int m = matrix_size(g);
  for (const auto& row : t.rows) {
    const int j = static_cast<int>(parse_double(row.at(0)));
    if (j < 0 || j >= n) throw InvalidInput("sample index out of range");
    Matrix mat(m, m);
    int c = 1;
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q, c += 2) mat(p, q) = Complex(parse_double(row.at(c)), parse_double(row.at(c + 1)));
    x.samples[j] = GroupElement{g, mat};
  }
  x.based = x.samples[0].distance_to_identity() == 0.0;
  return x;
}

// ---------------------------------------------------------------------------
// Complexes as JSON: generator records and sparse F2 entries.

inline nlohmann::json generator_json(const Generator& g) {
  return {{"id", g.id},       {"name", g.name},     {"manifold", g.manifold}, {"ind_f", g.ind_f},
          {"ind_h", g.ind_h}, {"ind", g.ind()},     {"action", g.action},     {"h_value", g.h_value}};
}

inline nlohmann::json sparse_json(const F2Matrix& m) {
  nlohmann::json e = nlohmann::json::array();
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j)
      if (m(i, j)) e.push_back({i, j});
  return {{"rows", m.rows}, {"cols", m.cols}, {"entries", e}};
}

inline F2Matrix sparse_from_json(const nlohmann::json& j) {
  F2Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  for (const auto& e : j.at("entries")) m.set(e.at(0).get<int>(), e.at(1).get<int>(), 1);
  return m;
}

inline nlohmann::json complex_json(const ChainComplexMod2& c) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : c.generators) gens.push_back(generator_json(g));
  nlohmann::json deg = nlohmann::json::object();
  for (const auto& [k, list] : c.degree) {
    nlohmann::json ids = nlohmann::json::array();
    for (int pos : list) ids.push_back(c.generators[pos].id);
    deg[std::to_string(k)] = ids;
  }
  nlohmann::json bd = nlohmann::json::object();
  for (const auto& [k, m] : c.boundary) bd[std::to_string(k)] = sparse_json(m);
  return {{"generators", gens}, {"degrees", deg}, {"boundary", bd}};
}

inline ChainComplexMod2 complex_from_json(const nlohmann::json& j) {
  std::vector<Generator> gens;
  for (const auto& g : j.at("generators")) {
    Generator x;
    x.id = g.at("id").get<int>();
    x.name = g.at("name").get<std::string>();
    x.manifold = g.at("manifold").get<int>();
    x.ind_f = g.at("ind_f").get<int>();
    x.ind_h = g.at("ind_h").get<int>();
    x.action = g.at("action").get<double>();
    x.h_value = g.at("h_value").get<double>();
    gens.push_back(x);
  }
  ChainComplexMod2 c = boundary_from_counts(gens, {});
  for (const auto& [k, m] : j.at("boundary").items()) c.boundary[std::stoi(k)] = sparse_from_json(m);
  // Re-verify: a file is untrusted input.
  CascadeCountTable counts;
  for (const auto& [k, m] : c.boundary)
    for (int i = 0; i < m.rows; ++i)
      for (int q = 0; q < m.cols; ++q)
        if (m(i, q))
          counts.push_back({c.generators[c.degree.at(k)[q]].id, c.generators[c.degree.at(k - 1)[i]].id, 1, "file"});
  return boundary_from_counts(gens, counts);
}

inline nlohmann::json theta_json(const ThetaMatrix& t) {
  nlohmann::json blocks = nlohmann::json::object();
  for (const auto& [k, m] : t.blocks) blocks[std::to_string(k)] = sparse_json(m);
  nlohmann::json rows = nlohmann::json::object(), cols = nlohmann::json::object();
  for (const auto& [k, p] : t.row_order) rows[std::to_string(k)] = p;
  for (const auto& [k, p] : t.col_order) cols[std::to_string(k)] = p;
  return {{"blocks", blocks}, {"row_order", rows}, {"col_order", cols}};
}

inline ThetaMatrix theta_from_json(const nlohmann::json& j) {
  ThetaMatrix t;
  for (const auto& [k, m] : j.at("blocks").items()) t.blocks[std::stoi(k)] = sparse_from_json(m);
  if (j.contains("row_order"))
    for (const auto& [k, p] : j.at("row_order").items()) t.row_order[std::stoi(k)] = p.get<std::vector<int>>();
  if (j.contains("col_order"))
    for (const auto& [k, p] : j.at("col_order").items()) t.col_order[std::stoi(k)] = p.get<std::vector<int>>();
  return t;
}

/// Homology report: one row per degree.
inline std::string homology_csv(const ChainComplexMod2& c, const std::vector<int>& betti, const std::string& name) {
  CsvWriter w({"degree", "generators", "betti"});
  w.meta("complex", name).conventions();
  for (size_t k = 0; k < betti.size(); ++k) w.row({fmt(static_cast<int>(k)), fmt(c.rank(static_cast<int>(k))), fmt(betti[k])});
  return w.str();
}

}  // namespace gaugeflow
