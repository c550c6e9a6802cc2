//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/io.hpp"

#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fmdock/elements.hpp"

namespace fmdock {

// ---- files ---------------------------------------------------------------

std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open '" + path + "': " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string &path, std::string_view content) {
  const std::string tmp = path + ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw DataError("cannot write '" + tmp + "': " + std::strerror(errno));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out)
      throw DataError("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw DataError("cannot rename '" + tmp + "' to '" + path
                    + "': " + std::strerror(errno));
  }
}

// ---- JSON ------------------------------------------------------------------

namespace {

const json &field(const json &j, const char *key) {
  auto it = j.find(key);
  if (it == j.end())
    throw DataError(std::string("missing field '") + key + "'");
  return *it;
}

Vec3 vec3_from_json(const json &j) {
  if (!j.is_array() || j.size() != 3)
    throw DataError("expected a 3-vector");
  return Vec3(number_from_json(j[0]), number_from_json(j[1]),
              number_from_json(j[2]));
}

json vec3_to_json(const Vec3 &v) {
  return json::array({ number_to_json(v.x()), number_to_json(v.y()),
                       number_to_json(v.z()) });
}

ad::Matrix matrix_from_json(const json &j) {
  int rows = field(j, "rows").get<int>(), cols = field(j, "cols").get<int>();
  const json &d = field(j, "data");
  if (rows < 0 || cols < 0 || d.size() != static_cast<std::size_t>(rows) * cols)
    throw DataError("matrix data size mismatch");
  ad::Matrix m(rows, cols);
  std::size_t k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = number_from_json(d[k++]);
  return m;
}

json matrix_to_json(const ad::Matrix &m) {
  json d = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      d.push_back(number_to_json(m(r, c)));
  return { { "rows", m.rows() }, { "cols", m.cols() }, { "data", d } };
}

json params_to_json(const ad::ParameterSet &ps) {
  json out = json::array();
  for (const auto &p: ps) {
    json m = matrix_to_json(p.value);
    m["name"] = p.name;
    out.push_back(m);
  }
  return out;
}

void params_from_json(const json &j, ad::ParameterSet &ps) {
  if (!j.is_array() || static_cast<int>(j.size()) != ps.size())
    throw DataError("checkpoint parameter count mismatch");
  for (int i = 0; i < ps.size(); ++i) {
    const json &e = j[i];
    if (field(e, "name").get<std::string>() != ps[i].name)
      throw DataError("checkpoint parameter '"
                      + field(e, "name").get<std::string>()
                      + "' where '" + ps[i].name + "' was expected");
    ad::Matrix m = matrix_from_json(e);
    if (m.rows() != ps[i].value.rows() || m.cols() != ps[i].value.cols())
      throw DataError("checkpoint parameter '" + ps[i].name
                      + "' has the wrong shape");
    ps[i].value = std::move(m);
  }
}

void check_schema(const json &j, const char *kind) {
  if (!j.is_object())
    throw DataError(std::string("expected a JSON object for ") + kind);
  int v = field(j, "schema_version").get<int>();
  if (v != kSchemaVersion)
    throw DataError("unsupported schema_version " + std::to_string(v));
  if (field(j, "kind").get<std::string>() != kind)
    throw DataError("expected kind '" + std::string(kind) + "', got '"
                    + field(j, "kind").get<std::string>() + "'");
}

}  // namespace

json number_to_json(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json &j) {
  if (j.is_number())
    return j.get<double>();
  if (j.is_string()) {
    const auto &s = j.get_ref<const std::string &>();
    if (s == "inf")
      return std::numeric_limits<double>::infinity();
    if (s == "-inf")
      return -std::numeric_limits<double>::infinity();
    if (s == "nan")
      return std::numeric_limits<double>::quiet_NaN();
  }
  throw DataError("expected a number, got " + j.dump());
}

json coords_to_json(const Coords &x) {
  json out = json::array();
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    out.push_back(vec3_to_json(x.col(i)));
  return out;
}

Coords coords_from_json(const json &j) {
  if (!j.is_array())
    throw DataError("expected a coordinate array");
  Coords x(3, static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = vec3_from_json(j[i]);
  return x;
}

json pose_to_json(const PoseTransform &p) {
  json tor = json::array();
  for (const auto &t: p.tor)
    tor.push_back(json::array({ t.theta, t.period }));
  return { { "tr", vec3_to_json(p.tr) },
           { "rot", json::array({ p.rot.w(), p.rot.x(), p.rot.y(),
                                  p.rot.z() }) },
           { "tor", tor } };
}

PoseTransform pose_from_json(const json &j) {
  PoseTransform p;
  p.tr = vec3_from_json(field(j, "tr"));
  const json &q = field(j, "rot");
  if (!q.is_array() || q.size() != 4)
    throw DataError("rotation must be a quaternion [w, x, y, z]");
  p.rot = Rotation3::from_quaternion(q[0].get<double>(), q[1].get<double>(),
                                     q[2].get<double>(), q[3].get<double>());
  for (const auto &t: field(j, "tor"))
    p.tor.emplace_back(t.at(0).get<double>(), t.at(1).get<double>());
  return p;
}

json report_to_json(const ValidityReport &r) {
  return { { "min_dist_ok", r.min_dist_ok },
           { "max_dist_ok", r.max_dist_ok },
           { "volume_overlap_ok", r.volume_overlap_ok },
           { "internal_clash_ok", r.internal_clash_ok },
           { "pass_count", r.pass_count },
           { "min_distance_ratio", number_to_json(r.min_distance_ratio) },
           { "nearest_contact", number_to_json(r.nearest_contact) },
           { "overlap_fraction", number_to_json(r.overlap_fraction) },
           { "worst_internal_ratio", number_to_json(r.worst_internal_ratio) } };
}

ValidityReport report_from_json(const json &j, const FilterThresholds &t) {
  return ValidityReport::from_values(
      number_from_json(field(j, "min_distance_ratio")),
      number_from_json(field(j, "nearest_contact")),
      number_from_json(field(j, "overlap_fraction")),
      number_from_json(field(j, "worst_internal_ratio")), t);
}

json protein_to_json(const ProteinStructure &p) {
  json res = json::array();
  for (const auto &r: p.residues) {
    json atoms = json::array();
    for (std::size_t a = 0; a < r.atom_names.size(); ++a)
      atoms.push_back({ { "name", r.atom_names[a] },
                        { "element", r.elements[a] },
                        { "xyz", vec3_to_json(r.atoms.col(
                                     static_cast<Eigen::Index>(a))) } });
    res.push_back({ { "chain", r.chain },
                    { "number", r.number },
                    { "name", r.name },
                    { "ca", vec3_to_json(r.ca) },
                    { "label", r.label },
                    { "atoms", atoms } });
  }
  return { { "residues", res } };
}

ProteinStructure protein_from_json(const json &j) {
  ProteinStructure p;
  for (const auto &e: field(j, "residues")) {
    Residue r;
    r.chain = field(e, "chain").get<std::string>();
    r.number = field(e, "number").get<int>();
    r.name = field(e, "name").get<std::string>();
    r.ca = vec3_from_json(field(e, "ca"));
    r.label = e.value("label", -1);
    const json &atoms = field(e, "atoms");
    r.atoms.resize(3, static_cast<Eigen::Index>(atoms.size()));
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      r.atom_names.push_back(field(atoms[a], "name").get<std::string>());
      std::string el = field(atoms[a], "element").get<std::string>();
      if (!is_known_element(el))
        throw DataError("unknown element symbol: '" + el + "'");
      r.elements.push_back(normalize_element(el));
      r.atoms.col(static_cast<Eigen::Index>(a)) =
          vec3_from_json(field(atoms[a], "xyz"));
    }
    p.residues.push_back(std::move(r));
  }
  return p;
}

json ligand_to_json(const LigandConformer &l) {
  json bonds = json::array();
  for (const auto &b: l.bonds())
    bonds.push_back({ { "i", b.i }, { "j", b.j }, { "order", b.order },
                      { "amide", b.amide } });
  return { { "elements", l.elements() },
           { "coords", coords_to_json(l.coords()) },
           { "bonds", bonds },
           { "rotatable_rule", kRotatableRuleVersion } };
}

LigandConformer ligand_from_json(const json &j) {
  auto elements = field(j, "elements").get<std::vector<std::string>>();
  for (auto &e: elements) {
    if (!is_known_element(e))
      throw DataError("unknown element symbol: '" + e + "'");
    e = normalize_element(e);
  }
  std::vector<Bond> bonds;
  for (const auto &b: field(j, "bonds")) {
    Bond bd;
    bd.i = field(b, "i").get<int>();
    bd.j = field(b, "j").get<int>();
    bd.order = field(b, "order").get<int>();
    bd.amide = b.value("amide", false);
    bonds.push_back(bd);
  }
  return LigandConformer(std::move(elements),
                         coords_from_json(field(j, "coords")),
                         std::move(bonds));
}

json complex_to_json(const ComplexRecord &c) {
  json j = { { "schema_version", kSchemaVersion },
             { "kind", "complex" },
             { "id", c.id },
             { "protein", protein_to_json(c.protein) },
             { "ligand", ligand_to_json(c.ligand) },
             { "native", c.native ? coords_to_json(*c.native) : json() },
             { "pocket_center",
               c.pocket_center ? vec3_to_json(*c.pocket_center) : json() },
             { "metadata", c.metadata } };
  return j;
}

ComplexRecord complex_from_json(const json &j) {
  check_schema(j, "complex");
  ComplexRecord c;
  c.id = field(j, "id").get<std::string>();
  c.protein = protein_from_json(field(j, "protein"));
  c.ligand = ligand_from_json(field(j, "ligand"));
  if (j.contains("native") && !j["native"].is_null()) {
    c.native = coords_from_json(j["native"]);
    if (c.native->cols() != c.ligand.size())
      throw DataError("native coordinates have " + std::to_string(c.native->cols())
                      + " atoms, ligand has " + std::to_string(c.ligand.size()));
  }
  if (j.contains("pocket_center") && !j["pocket_center"].is_null())
    c.pocket_center = vec3_from_json(j["pocket_center"]);
  if (j.contains("metadata"))
    c.metadata = j["metadata"].get<std::map<std::string, std::string>>();
  return c;
}

json poseset_to_json(const PoseSet &p) {
  json poses = json::array();
  for (const auto &e: p.poses) {
    json pj = { { "coords", coords_to_json(e.coords) },
                { "pose", pose_to_json(e.pose) } };
    if (e.report)
      pj["report"] = report_to_json(*e.report);
    if (e.score)
      pj["score"] = number_to_json(*e.score);
    poses.push_back(pj);
  }
  json j = { { "schema_version", kSchemaVersion },
             { "kind", "poseset" },
             { "complex_id", p.complex_id },
             { "config_hash", p.config_hash },
             { "seed", p.seed },
             { "poses", poses } };
  if (p.retained)
    j["retained"] = *p.retained;
  if (p.selected)
    j["selected"] = *p.selected;
  if (p.error)
    j["error"] = *p.error;
  return j;
}

PoseSet poseset_from_json(const json &j) {
  check_schema(j, "poseset");
  PoseSet p;
  p.complex_id = field(j, "complex_id").get<std::string>();
  p.config_hash = field(j, "config_hash").get<std::string>();
  p.seed = field(j, "seed").get<std::uint64_t>();
  for (const auto &e: field(j, "poses")) {
    PoseEntry pe;
    pe.coords = coords_from_json(field(e, "coords"));
    pe.pose = pose_from_json(field(e, "pose"));
    if (e.contains("report"))
      pe.report = report_from_json(e["report"]);
    if (e.contains("score"))
      pe.score = number_from_json(e["score"]);
    p.poses.push_back(std::move(pe));
  }
  if (j.contains("retained"))
    p.retained = j["retained"].get<std::vector<int>>();
  if (j.contains("selected"))
    p.selected = j["selected"].get<int>();
  if (j.contains("error"))
    p.error = j["error"].get<std::string>();
  return p;
}

std::string dump(const json &j) {
  return j.dump(2) + "\n";
}

// ---- PDB -------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
    ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
    --b;
  return std::string(s.substr(a, b - a));
}

std::string_view columns(std::string_view line, std::size_t first,
                         std::size_t last) {
  // 1-based inclusive.
  if (line.size() < first)
    return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

double parse_double_field(std::string_view s, int line_no, const char *what) {
  std::string t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()
      || !std::isfinite(v))
    throw DataError("line " + std::to_string(line_no) + ": malformed "
                    + what + " field '" + std::string(s) + "'");
  return v;
}

int parse_int_field(std::string_view s, int line_no, const char *what) {
  std::string t = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size())
    throw DataError("line " + std::to_string(line_no) + ": malformed "
                    + what + " field '" + std::string(s) + "'");
  return v;
}

std::string element_from_name(const std::string &name) {
  std::string letters;
  for (char c: name)
    if (std::isalpha(static_cast<unsigned char>(c)))
      letters += c;
  if (letters.empty())
    return "";
  return letters.substr(0, 1);
}

}  // namespace

ProteinStructure parse_pdb_min(std::string_view text,
                               std::vector<std::string> *warnings) {
  auto warn = [&](std::string msg) {
    if (warnings)
      warnings->push_back(std::move(msg));
  };
  ProteinStructure p;
  struct Pending {
    Residue res;
    bool has_ca = false;
    int line = 0;
  };
  std::optional<Pending> cur;
  std::string cur_key;
  auto flush = [&]() {
    if (!cur)
      return;
    if (cur->has_ca)
      p.residues.push_back(std::move(cur->res));
    else
      warn("line " + std::to_string(cur->line) + ": residue "
           + cur->res.chain + ":" + std::to_string(cur->res.number) + " "
           + cur->res.name + " has no CA, skipped");
    cur.reset();
  };

  int line_no = 0;
  std::size_t pos = 0;
  bool any_atom = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos
                                                 ? std::string_view::npos
                                                 : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    std::string_view rec = columns(line, 1, 6);
    if (rec != "ATOM  " && rec != "HETATM" && trim(rec) != "ATOM"
        && trim(rec) != "HETATM") {
      if (trim(rec) == "ENDMDL")
        break;  // first model only
      continue;
    }
    any_atom = true;
    char alt = line.size() >= 17 ? line[16] : ' ';
    if (alt != ' ' && alt != 'A')
      continue;
    std::string name = trim(columns(line, 13, 16));
    std::string res_name = trim(columns(line, 18, 20));
    std::string chain = trim(columns(line, 22, 22));
    int res_num = parse_int_field(columns(line, 23, 26), line_no,
                                  "residue number");
    std::string icode = trim(columns(line, 27, 27));
    if (line.size() < 54)
      throw DataError("line " + std::to_string(line_no)
                      + ": record too short for coordinates (columns 31-54)");
    Vec3 xyz(parse_double_field(columns(line, 31, 38), line_no, "x"),
             parse_double_field(columns(line, 39, 46), line_no, "y"),
             parse_double_field(columns(line, 47, 54), line_no, "z"));
    std::string el = trim(columns(line, 77, 78));
    if (el.empty())
      el = element_from_name(name);
    if (el == "H" || el == "D")
      continue;
    if (!is_known_element(el))
      throw DataError("line " + std::to_string(line_no)
                      + ": unknown element symbol: '" + el + "'");
    el = normalize_element(el);

    std::string key = chain + "|" + std::to_string(res_num) + "|" + icode
                      + "|" + res_name;
    if (!cur || key != cur_key) {
      flush();
      cur = Pending {};
      cur->res.chain = chain;
      cur->res.number = res_num;
      cur->res.name = res_name;
      cur->res.atoms.resize(3, 0);
      cur->line = line_no;
      cur_key = key;
    }
    Residue &r = cur->res;
    r.atom_names.push_back(name);
    r.elements.push_back(el);
    r.atoms.conservativeResize(3, r.atoms.cols() + 1);
    r.atoms.col(r.atoms.cols() - 1) = xyz;
    if (name == "CA" && el == "C" && !cur->has_ca) {
      r.ca = xyz;
      cur->has_ca = true;
    }
  }
  flush();
  if (!any_atom)
    warn("no ATOM/HETATM records; empty structure");
  return p;
}

std::string write_pdb(const ProteinStructure &p) {
  std::string out;
  char buf[128];
  int serial = 1;
  for (const auto &r: p.residues) {
    for (std::size_t a = 0; a < r.atom_names.size(); ++a) {
      const std::string &nm = r.atom_names[a];
      std::string padded = nm.size() < 4 ? " " + nm : nm;
      Vec3 x = r.atoms.col(static_cast<Eigen::Index>(a));
      std::snprintf(buf, sizeof buf,
                    "ATOM  %5d %-4.4s %3.3s %1.1s%4d    %8.3f%8.3f%8.3f"
                    "%6.2f%6.2f          %2.2s\n",
                    serial++ % 100000, padded.c_str(), r.name.c_str(),
                    r.chain.empty() ? " " : r.chain.c_str(), r.number, x.x(),
                    x.y(), x.z(), 1.0, 0.0, r.elements[a].c_str());
      out += buf;
    }
  }
  out += "END\n";
  return out;
}

// ---- SDF -------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view l = text.substr(pos, nl == std::string_view::npos
                                              ? std::string_view::npos
                                              : nl - pos);
    if (!l.empty() && l.back() == '\r')
      l.remove_suffix(1);
    lines.push_back(l);
    if (nl == std::string_view::npos)
      break;
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

LigandConformer parse_sdf_min(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.size() < 4)
    throw DataError("SDF: missing header or counts line");
  std::string_view counts = lines[3];
  if (counts.find("V3000") != std::string_view::npos)
    throw DataError("SDF: V3000 is not supported");
  const int n_atoms = parse_int_field(columns(counts, 1, 3), 4, "atom count");
  const int n_bonds = parse_int_field(columns(counts, 4, 6), 4, "bond count");
  if (n_atoms < 0 || n_bonds < 0)
    throw DataError("SDF: negative counts");
  if (lines.size() < static_cast<std::size_t>(4 + n_atoms + n_bonds))
    throw DataError("SDF: counts line declares " + std::to_string(n_atoms)
                    + " atoms and " + std::to_string(n_bonds)
                    + " bonds but the block is shorter");

  std::vector<std::string> elements;
  std::vector<Vec3> xyz;
  std::vector<int> remap(n_atoms, -1);
  for (int a = 0; a < n_atoms; ++a) {
    std::string_view l = lines[4 + a];
    const int ln = 5 + a;
    Vec3 x(parse_double_field(columns(l, 1, 10), ln, "x"),
           parse_double_field(columns(l, 11, 20), ln, "y"),
           parse_double_field(columns(l, 21, 30), ln, "z"));
    std::string el = trim(columns(l, 32, 34));
    if (el.empty())
      throw DataError("SDF line " + std::to_string(ln) + ": missing element");
    if (el == "H" || el == "D")
      continue;
    if (!is_known_element(el))
      throw DataError("unknown element symbol: '" + el + "'");
    remap[a] = static_cast<int>(elements.size());
    elements.push_back(normalize_element(el));
    xyz.push_back(x);
  }
  std::vector<Bond> bonds;
  for (int b = 0; b < n_bonds; ++b) {
    std::string_view l = lines[4 + n_atoms + b];
    const int ln = 5 + n_atoms + b;
    int i = parse_int_field(columns(l, 1, 3), ln, "bond atom");
    int j = parse_int_field(columns(l, 4, 6), ln, "bond atom");
    int order = parse_int_field(columns(l, 7, 9), ln, "bond order");
    if (i < 1 || i > n_atoms || j < 1 || j > n_atoms)
      throw DataError("SDF line " + std::to_string(ln)
                      + ": bond atom index out of range");
    if (remap[i - 1] < 0 || remap[j - 1] < 0)
      continue;
    Bond bd;
    bd.i = remap[i - 1];
    bd.j = remap[j - 1];
    bd.order = order;
    bonds.push_back(bd);
  }
  Coords c(3, static_cast<Eigen::Index>(xyz.size()));
  for (std::size_t k = 0; k < xyz.size(); ++k)
    c.col(static_cast<Eigen::Index>(k)) = xyz[k];
  return LigandConformer(std::move(elements), std::move(c), std::move(bonds));
}

std::string write_sdf(const LigandConformer &lig, const Coords &coords,
                      const std::string &name) {
  if (coords.cols() != lig.size())
    throw DataError("write_sdf: coordinate count mismatch");
  std::string out = name + "\n  fmdock\n\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%3d%3d  0  0  0  0  0  0  0  0999 V2000\n",
                lig.size(), static_cast<int>(lig.bonds().size()));
  out += buf;
  for (int i = 0; i < lig.size(); ++i) {
    std::snprintf(buf, sizeof buf,
                  "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                  coords(0, i), coords(1, i), coords(2, i),
                  lig.elements()[i].c_str());
    out += buf;
  }
  for (const auto &b: lig.bonds()) {
    std::snprintf(buf, sizeof buf, "%3d%3d%3d  0\n", b.i + 1, b.j + 1,
                  b.order);
    out += buf;
  }
  out += "M  END\n$$$$\n";
  return out;
}

// ---- run configuration -----------------------------------------------------

namespace {

struct TomlValue {
  std::string raw;
  bool is_string = false;
  int line = 0;
};

using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml_subset(std::string_view text) {
  TomlTable out;
  std::string section;
  int line_no = 0;
  for (std::string_view raw: split_lines(text)) {
    ++line_no;
    std::string line;
    bool in_str = false;
    for (char c: raw) {
      if (c == '"')
        in_str = !in_str;
      if (c == '#' && !in_str)
        break;
      line += c;
    }
    line = trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw DataError("config line " + std::to_string(line_no)
                        + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no)
                      + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string val = trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || val.empty())
      throw DataError("config line " + std::to_string(line_no)
                      + ": empty key or value");
    TomlValue v;
    v.line = line_no;
    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"')
        throw DataError("config line " + std::to_string(line_no)
                        + ": unterminated string");
      v.raw = val.substr(1, val.size() - 2);
      v.is_string = true;
    } else {
      v.raw = val;
    }
    std::string full = section.empty() ? key : section + "." + key;
    if (!out.emplace(full, v).second)
      throw DataError("config line " + std::to_string(line_no)
                      + ": duplicate key '" + full + "'");
  }
  return out;
}

class ConfigReader {
public:
  explicit ConfigReader(TomlTable t): t_(std::move(t)) { }

  void number(const char *key, double &dst) {
    if (auto *v = take(key)) {
      if (v->is_string)
        fail(*v, key, "a number");
      dst = parse_double_field(v->raw, v->line, key);
    }
  }
  void integer(const char *key, int &dst) {
    double d = dst;
    number(key, d);
    if (d != std::floor(d) || std::abs(d) > 2e9)
      throw DataError(std::string("config key '") + key
                      + "' must be an integer");
    dst = static_cast<int>(d);
  }
  void seed(const char *key, std::uint64_t &dst) {
    if (auto *v = take(key)) {
      std::uint64_t x = 0;
      auto [p, ec] = std::from_chars(v->raw.data(),
                                     v->raw.data() + v->raw.size(), x);
      if (v->is_string || ec != std::errc()
          || p != v->raw.data() + v->raw.size())
        fail(*v, key, "a non-negative integer");
      dst = x;
    }
  }
  void boolean(const char *key, bool &dst) {
    if (auto *v = take(key)) {
      if (v->is_string || (v->raw != "true" && v->raw != "false"))
        fail(*v, key, "true or false");
      dst = v->raw == "true";
    }
  }
  void string(const char *key, std::string &dst) {
    if (auto *v = take(key)) {
      if (!v->is_string)
        fail(*v, key, "a quoted string");
      dst = v->raw;
    }
  }
  void finish() const {
    if (!t_.empty()) {
      const auto &[k, v] = *t_.begin();
      throw DataError("config line " + std::to_string(v.line)
                      + ": unknown key '" + k + "'");
    }
  }

private:
  const TomlValue *take(const char *key) {
    auto it = t_.find(key);
    if (it == t_.end())
      return nullptr;
    taken_ = it->second;
    t_.erase(it);
    return &taken_;
  }
  [[noreturn]] static void fail(const TomlValue &v, const char *key,
                                const char *what) {
    throw DataError("config line " + std::to_string(v.line) + ": '" + key
                    + "' must be " + what);
  }

  TomlTable t_;
  TomlValue taken_;
};

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  ConfigReader r(parse_toml_subset(text));
  r.number("stage.sigma_large", c.stage.sigma_large);
  r.number("stage.sigma_medium", c.stage.sigma_medium);
  r.number("stage.sigma_small", c.stage.sigma_small);
  r.number("stage.sigma_small_angular", c.stage.sigma_small_angular);
  r.boolean("augment.enabled", c.augment.enabled);
  r.boolean("augment.random_rotation", c.augment.random_rotation);
  r.number("augment.coord_noise", c.augment.coord_noise);
  r.number("augment.mask_rate", c.augment.mask_rate);
  r.number("loss.w_tr", c.loss.w_tr);
  r.number("loss.w_rot", c.loss.w_rot);
  r.number("loss.w_tor", c.loss.w_tor);
  r.integer("train.steps", c.train_steps);
  r.integer("train.batch_size", c.batch_size);
  r.seed("train.seed", c.train_seed);
  std::string kind = ad::to_string(c.optimizer.kind);
  r.string("train.optimizer", kind);
  c.optimizer.kind = ad::optimizer_kind_from_string(kind);
  r.number("train.learning_rate", c.optimizer.learning_rate);
  r.number("train.momentum", c.optimizer.momentum);
  r.number("train.beta1", c.optimizer.beta1);
  r.number("train.beta2", c.optimizer.beta2);
  r.number("train.weight_decay", c.optimizer.weight_decay);
  r.number("train.grad_clip", c.optimizer.grad_clip);
  r.integer("net.atom_hidden", c.net.atom_hidden);
  r.integer("net.trunk_hidden", c.net.trunk_hidden);
  r.integer("net.bond_hidden", c.net.bond_hidden);
  r.integer("net.time_hidden", c.net.time.hidden);
  r.seed("net.seed", c.net.seed);
  r.number("filters.c_min", c.filters.c_min);
  r.number("filters.d_max", c.filters.d_max);
  r.number("filters.s_vol", c.filters.s_vol);
  r.number("filters.f_max", c.filters.f_max);
  r.number("filters.c_clash", c.filters.c_clash);
  r.integer("rollout.n_steps", c.n_steps);
  r.integer("rollout.n_samples", c.n_samples);
  r.seed("rollout.seed", c.sample_seed);
  r.integer("scorer.epochs", c.scorer_epochs);
  r.integer("scorer.poses_per_complex", c.scorer_poses);
  r.integer("scorer.hidden", c.scorer_hidden);
  r.number("scorer.learning_rate", c.scorer_learning_rate);
  r.seed("scorer.seed", c.scorer_seed);
  r.finish();

  StageConfig probe = c.stage;
  probe.validate();
  c.loss.validate();
  c.filters.validate();
  if (c.train_steps < 0 || c.batch_size < 1 || c.n_steps < 1
      || c.n_samples < 1 || c.scorer_epochs < 0 || c.scorer_poses < 2
      || c.scorer_hidden < 1 || c.net.atom_hidden < 1
      || c.net.trunk_hidden < 1 || c.net.bond_hidden < 1
      || c.net.time.hidden < 1)
    throw DataError("config: counts and widths must be positive");
  if (c.augment.mask_rate < 0.0 || c.augment.mask_rate >= 1.0
      || c.augment.coord_noise < 0.0)
    throw DataError("config: mask_rate must be in [0, 1), coord_noise >= 0");
  return c;
}

json run_config_to_json(const RunConfig &c) {
  return {
    { "stage",
      { { "sigma_large", c.stage.sigma_large },
        { "sigma_medium", c.stage.sigma_medium },
        { "sigma_small", c.stage.sigma_small },
        { "sigma_small_angular", c.stage.sigma_small_angular } } },
    { "augment",
      { { "enabled", c.augment.enabled },
        { "random_rotation", c.augment.random_rotation },
        { "coord_noise", c.augment.coord_noise },
        { "mask_rate", c.augment.mask_rate } } },
    { "loss",
      { { "w_tr", c.loss.w_tr },
        { "w_rot", c.loss.w_rot },
        { "w_tor", c.loss.w_tor } } },
    { "train",
      { { "steps", c.train_steps },
        { "batch_size", c.batch_size },
        { "seed", c.train_seed },
        { "optimizer", ad::to_string(c.optimizer.kind) },
        { "learning_rate", c.optimizer.learning_rate },
        { "momentum", c.optimizer.momentum },
        { "beta1", c.optimizer.beta1 },
        { "beta2", c.optimizer.beta2 },
        { "weight_decay", c.optimizer.weight_decay },
        { "grad_clip", c.optimizer.grad_clip } } },
    { "net",
      { { "atom_hidden", c.net.atom_hidden },
        { "trunk_hidden", c.net.trunk_hidden },
        { "bond_hidden", c.net.bond_hidden },
        { "time_hidden", c.net.time.hidden },
        { "seed", c.net.seed } } },
    { "filters",
      { { "c_min", c.filters.c_min },
        { "d_max", c.filters.d_max },
        { "s_vol", c.filters.s_vol },
        { "f_max", c.filters.f_max },
        { "c_clash", c.filters.c_clash } } },
    { "rollout",
      { { "n_steps", c.n_steps },
        { "n_samples", c.n_samples },
        { "seed", c.sample_seed } } },
    { "scorer",
      { { "epochs", c.scorer_epochs },
        { "poses_per_complex", c.scorer_poses },
        { "hidden", c.scorer_hidden },
        { "learning_rate", c.scorer_learning_rate },
        { "seed", c.scorer_seed } } },
  };
}

std::string run_config_to_toml(const RunConfig &c) {
  std::string out;
  json j = run_config_to_json(c);
  for (const auto &[section, body]: j.items()) {
    out += "[" + section + "]\n";
    for (const auto &[key, v]: body.items())
      out += key + " = " + v.dump() + "\n";
    out += "\n";
  }
  return out;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c: data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig &c) {
  return fnv1a_hex(run_config_to_json(c).dump());
}

// ---- checkpoints -----------------------------------------------------------

json velocity_checkpoint(const ToyVelocityNet &net, int stage,
                         const std::string &hash) {
  const NetArch &a = net.arch();
  return { { "schema_version", kSchemaVersion },
           { "kind", "velocity_net" },
           { "stage", stage },
           { "config_hash", hash },
           { "arch",
             { { "atom_hidden", a.atom_hidden },
               { "trunk_hidden", a.trunk_hidden },
               { "bond_hidden", a.bond_hidden },
               { "time_hidden", a.time.hidden },
               { "time_frequencies", a.time.frequencies },
               { "seed", a.seed } } },
           { "params", params_to_json(net.params()) } };
}

ToyVelocityNet velocity_from_checkpoint(const json &j, int *stage) {
  check_schema(j, "velocity_net");
  const json &a = field(j, "arch");
  NetArch arch;
  arch.atom_hidden = field(a, "atom_hidden").get<int>();
  arch.trunk_hidden = field(a, "trunk_hidden").get<int>();
  arch.bond_hidden = field(a, "bond_hidden").get<int>();
  arch.time.hidden = field(a, "time_hidden").get<int>();
  arch.time.frequencies = field(a, "time_frequencies").get<std::vector<int>>();
  arch.seed = field(a, "seed").get<std::uint64_t>();
  ToyVelocityNet net(arch);
  params_from_json(field(j, "params"), net.params());
  if (stage)
    *stage = field(j, "stage").get<int>();
  return net;
}

json scorer_checkpoint(const Scorer &s, const std::string &hash) {
  json mean = json::array(), scale = json::array();
  for (int k = 0; k < kPoseFeatures; ++k) {
    mean.push_back(s.feature_mean()[k]);
    scale.push_back(s.feature_scale()[k]);
  }
  return { { "schema_version", kSchemaVersion },
           { "kind", "scorer" },
           { "config_hash", hash },
           { "arch",
             { { "hidden", s.arch().hidden }, { "seed", s.arch().seed } } },
           { "feature_mean", mean },
           { "feature_scale", scale },
           { "params", params_to_json(s.params()) } };
}

Scorer scorer_from_checkpoint(const json &j) {
  check_schema(j, "scorer");
  const json &a = field(j, "arch");
  ScorerArch arch;
  arch.hidden = field(a, "hidden").get<int>();
  arch.seed = field(a, "seed").get<std::uint64_t>();
  Scorer s(arch);
  const json &mean = field(j, "feature_mean"), &scale = field(j, "feature_scale");
  if (mean.size() != kPoseFeatures || scale.size() != kPoseFeatures)
    throw DataError("scorer checkpoint: feature dimension mismatch");
  for (int k = 0; k < kPoseFeatures; ++k) {
    s.feature_mean()[k] = mean[k].get<double>();
    s.feature_scale()[k] = scale[k].get<double>();
  }
  params_from_json(field(j, "params"), s.params());
  return s;
}

}  // namespace fmdock
