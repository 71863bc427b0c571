#pragma once

// Serialisation of reports, sweep tables and nodal fields.
//
// Field dump (binary): the 8 bytes "ELGFLD01", a little-endian uint64 header
// length L, L bytes of JSON header, then one little-endian float64 per node with
// axis 0 varying fastest. The header carries dims, node_counts, spacing, ell,
// horizontal_dim, cross_section and count.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "elongate/density.hpp"
#include "elongate/field.hpp"
#include "elongate/solver.hpp"
#include "elongate/study.hpp"

namespace elongate {

using nlohmann::json;

/// Writes `content` to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), std::streamsize(content.size()));
    if (!out)
      throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const json& j)
{
  write_file_atomic(path, j.dump(2) + "\n");
}

inline std::string read_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const Witness& w)
{
  json j{{"xi", w.xi}, {"margin", w.margin}};
  if (!w.zeta.empty()) {
    j["zeta"] = w.zeta;
    j["theta"] = w.theta;
  }
  return j;
}

inline json to_json(const HypothesisReport& r)
{
  json wit = json::array();
  for (const auto& w : r.witnesses)
    wit.push_back(to_json(w));
  return {{"hypothesis", r.hypothesis},
          {"samples", r.samples},
          {"violations", r.violations},
          {"worst_margin", r.worst_margin},
          {"witnesses", wit}};
}

inline json to_json(const SolveReport& r)
{
  return {{"converged", r.converged},   {"iterations", r.iterations},
          {"grad_norm", r.grad_norm},   {"grad_threshold", r.grad_threshold},
          {"energy", r.energy},         {"wall_ms", r.wall_ms},
          {"method", r.method}};
}

inline json to_json(const MinimalityReport& r)
{
  json bad = json::array();
  for (const auto& t : r.violating)
    bad.push_back({{"kind", t.kind}, {"energy", t.energy}, {"excess", t.excess}});
  return {{"trials", r.trials},
          {"violations", r.violations},
          {"reference_energy", r.reference_energy},
          {"tolerance", r.tolerance},
          {"worst_excess", r.worst_excess},
          {"worst_kind", r.worst_kind},
          {"violating", bad},
          {"passed", r.passed()}};
}

inline json to_json(const RateFit& f)
{
  return {{"model", to_string(f.model)},
          {"sufficient", f.sufficient},
          {"C", f.C},
          {f.model == RateModel::power ? "q" : "alpha", f.exponent},
          {"r2", f.r2},
          {"points_used", f.points_used},
          {"floor", f.floor}};
}

inline json to_json(const Verdict& v)
{
  return {{"id", v.id}, {"status", to_string(v.status)}, {"detail", v.detail}, {"measured", v.measured}};
}

inline json to_json(const SweepRecord& r)
{
  return {{"ell", r.ell},
          {"ell0", r.ell0},
          {"h_horiz", r.h_horiz},
          {"h_vert", r.h_vert},
          {"nodes", r.nodes},
          {"iters", r.iters},
          {"converged", r.converged},
          {"grad_norm", r.grad_norm},
          {"J_ell", r.J_ell},
          {"total_grad_energy", r.total_grad_energy},
          {"local_grad_energy", r.local_grad_energy},
          {"err_grad_p", r.err_grad_p},
          {"err_w1p", r.err_w1p},
          {"hgrad_p", r.hgrad_p},
          {"runtime_ms", r.runtime_ms}};
}

// ---------------------------------------------------------------------------
// CSV tables

inline constexpr const char* kSweepCsvHeader =
    "ell,ell0,h_horiz,h_vert,nodes,iters,converged,J_ell,total_grad_energy,err_grad_p,err_w1p,hgrad_p,runtime_ms";

namespace detail {

inline std::string fmt_double(double x)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace detail

inline std::string sweep_csv(const std::vector<SweepRecord>& recs)
{
  std::string s = std::string(kSweepCsvHeader) + "\n";
  using detail::fmt_double;
  for (const auto& r : recs) {
    s += fmt_double(r.ell) + "," + fmt_double(r.ell0) + "," + fmt_double(r.h_horiz) + "," +
         fmt_double(r.h_vert) + "," + std::to_string(r.nodes) + "," + std::to_string(r.iters) + "," +
         (r.converged ? "1" : "0") + "," + fmt_double(r.J_ell) + "," +
         fmt_double(r.total_grad_energy) + "," + fmt_double(r.err_grad_p) + "," +
         fmt_double(r.err_w1p) + "," + fmt_double(r.hgrad_p) + "," + fmt_double(r.runtime_ms) + "\n";
  }
  return s;
}

inline std::string profile_csv(const Profile& prof)
{
  std::string s = "t,g\n";
  for (const auto& [t, g] : prof.points)
    s += detail::fmt_double(t) + "," + detail::fmt_double(g) + "\n";
  return s;
}

/// Two whitespace-separated columns, one point per line, for plotting tools.
inline std::string two_column(const std::vector<std::pair<double, double>>& pts)
{
  std::string s;
  for (const auto& [x, y] : pts)
    s += detail::fmt_double(x) + " " + detail::fmt_double(y) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Field dumps

inline constexpr char kFieldMagic[9] = "ELGFLD01";

inline json field_header(const ScalarField& f)
{
  const Grid& g = f.grid();
  std::vector<std::size_t> counts(g.node_counts().begin(), g.node_counts().end());
  std::vector<double> h(g.spacing().begin(), g.spacing().end());
  return {{"dims", g.dim()},
          {"horizontal_dim", g.horizontal_dim()},
          {"node_counts", counts},
          {"spacing", h},
          {"ell", g.horizontal_dim() > 0 ? g.spec().ell : 0.0},
          {"cross_section", to_string(g.cross_section().shape)},
          {"ordering", "axis0-fastest"},
          {"dtype", "float64-le"},
          {"count", f.size()}};
}

namespace detail {

inline void put_le64(std::string& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le64(const unsigned char* p)
{
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | p[i];
  return v;
}

} // namespace detail

inline std::string encode_field(const ScalarField& f)
{
  const std::string header = field_header(f).dump();
  std::string out(kFieldMagic, 8);
  detail::put_le64(out, header.size());
  out += header;
  out.reserve(out.size() + 8 * f.size());
  for (double v : f.values())
    detail::put_le64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

struct DecodedField {
  json header;
  std::vector<double> values;
};

inline DecodedField decode_field(const std::string& bytes)
{
  if (bytes.size() < 16 || bytes.compare(0, 8, kFieldMagic) != 0)
    throw std::runtime_error("not a field dump (bad magic)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t hlen = detail::get_le64(p + 8);
  if (16 + hlen > bytes.size())
    throw std::runtime_error("field dump: truncated header");
  DecodedField out;
  out.header = json::parse(bytes.substr(16, hlen));
  const std::size_t count = out.header.at("count").get<std::size_t>();
  if (16 + hlen + 8 * count != bytes.size())
    throw std::runtime_error("field dump: payload size does not match the header");
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    out.values[i] = std::bit_cast<double>(detail::get_le64(p + 16 + hlen + 8 * i));
  return out;
}

inline std::string field_csv(const ScalarField& f)
{
  const Grid& g = f.grid();
  std::string s;
  for (int d = 0; d < g.dim(); ++d)
    s += "x" + std::to_string(d) + ",";
  s += "value\n";
  for (std::size_t v = 0; v < f.size(); ++v) {
    for (int d = 0; d < g.dim(); ++d)
      s += detail::fmt_double(g.node_coordinate(v, d)) + ",";
    s += detail::fmt_double(f[v]) + "\n";
  }
  return s;
}

} // namespace elongate
