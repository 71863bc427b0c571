#include <catch_amalgamated.hpp>

#include <filesystem>

#include "elongate.hpp"

using namespace elongate;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  auto dir = fs::temp_directory_path() / ("elongate-test-io-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("atomic writes leave only the final file")
{
  const auto dir = scratch("atomic");
  write_file_atomic(dir / "a.txt", "hello\n");
  write_file_atomic(dir / "a.txt", "again\n");
  CHECK(read_file(dir / "a.txt") == "again\n");
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++count;
  }
  CHECK(count == 1);
  write_json_atomic(dir / "nested" / "b.json", {{"x", 1}});
  CHECK(nlohmann::json::parse(read_file(dir / "nested" / "b.json"))["x"] == 1);
}

TEST_CASE("hypothesis report serialisation")
{
  const auto rep = audit_growth(EnergyDensity::quadratic(1, 2).with_lambda(0.6), 100, 3);
  const auto j = to_json(rep);
  for (const char* key : {"hypothesis", "samples", "violations", "worst_margin", "witnesses"})
    CHECK(j.contains(key));
  CHECK(j["samples"] == 100);
  CHECK(j["violations"].get<std::size_t>() == rep.violations);
  CHECK(j["witnesses"].is_array());
  CHECK(j["witnesses"].size() == rep.witnesses.size());
}

TEST_CASE("sweep CSV layout")
{
  SweepRecord r;
  r.ell = 2;
  r.ell0 = 1;
  r.nodes = 45;
  r.iters = 7;
  r.converged = true;
  r.err_grad_p = 1.25e-3;
  const auto csv = sweep_csv({r, r});
  const auto first_nl = csv.find('\n');
  CHECK(csv.substr(0, first_nl) ==
        "ell,ell0,h_horiz,h_vert,nodes,iters,converged,J_ell,total_grad_energy,err_grad_p,err_w1p,hgrad_p,"
        "runtime_ms");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const auto row = csv.substr(first_nl + 1, csv.find('\n', first_nl + 1) - first_nl - 1);
  CHECK(std::count(row.begin(), row.end(), ',') == 12);
  CHECK(row.rfind("2,1,", 0) == 0);

  Profile p;
  p.points = {{1, 0.5}, {2, 0.75}};
  CHECK(profile_csv(p) == "t,g\n1,0.5\n2,0.75\n");
  CHECK(two_column({{1.5, -2}}) == "1.5 -2\n");
}

TEST_CASE("binary field dump round trip")
{
  auto g = std::make_shared<const Grid>(DomainSpec{CrossSection::unit_box(1), 2.0, {1.0}, 2}, 0.25);
  std::vector<double> v(g->num_nodes());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = std::sin(double(i)) * 1e-3 + 1.0 / 3.0;
  const ScalarField f(g, v);
  const auto bytes = encode_field(f);
  CHECK(bytes.substr(0, 8) == "ELGFLD01");
  const auto dec = decode_field(bytes);
  CHECK(dec.header["ell"] == 2.0);
  CHECK(dec.header["dims"] == 2);
  CHECK(dec.header["node_counts"][0] == 17);
  CHECK(dec.header["node_counts"][1] == 9);
  CHECK(dec.header["spacing"][0] == 0.25);
  CHECK(dec.header["dtype"] == "float64-le");
  REQUIRE(dec.values.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(dec.values[i] == f[i]);
  // Little-endian: the first payload byte is the low byte of the first value.
  const std::uint64_t hlen = dec.header.dump().size();
  const auto first = std::bit_cast<std::uint64_t>(f[0]);
  CHECK(static_cast<unsigned char>(bytes[16 + hlen]) == (first & 0xFF));

  CHECK_THROWS(decode_field("not a field"));
  CHECK_THROWS(decode_field(bytes.substr(0, bytes.size() - 1)));

  const auto csv = field_csv(f);
  CHECK(csv.rfind("x0,x1,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == long(f.size() + 1));
}

TEST_CASE("config defaults and resolution")
{
  const auto c = config_from_json(nlohmann::json::object());
  CHECK_NOTHROW(c.validate());
  const auto j = to_json(c);
  CHECK(j["solver"]["method"] == "linear-cg");
  CHECK(j["solver"]["grad_tol"] == 1e-10);
  CHECK(j["density"]["kind"] == "quadratic");
  CHECK(j["study"]["floor"].get<double>() > 0.0);

  const auto p4 = config_from_json({{"density", {{"kind", "p-dirichlet"}, {"p", 4}}}});
  CHECK(to_json(p4)["solver"]["method"] == "nonlinear-cg");
  CHECK(to_json(p4)["solver"]["grad_tol"] == 1e-9);
}

TEST_CASE("resolved config round-trips exactly")
{
  const auto c = load_config(std::string(ELONGATE_CONFIG_DIR) + "/quadratic-small.json");
  c.validate();
  const auto j1 = to_json(c);
  const auto j2 = to_json(config_from_json(j1));
  CHECK(j1 == j2);
  CHECK(j1.dump() == j2.dump());
  const auto s1 = c.sweep_config(), s2 = config_from_json(j1).sweep_config();
  CHECK(s1.ells == s2.ells);
  CHECK(s1.solver.grad_tol == s2.solver.grad_tol);
  CHECK(s1.target_h == s2.target_h);
}

TEST_CASE("config validation errors")
{
  auto expect_config_error = [](const nlohmann::json& j) {
    CHECK_THROWS_AS(config_from_json(j).validate(), ConfigError);
  };
  expect_config_error({{"domain", {{"ell_list", {3, 2}}}}});
  expect_config_error({{"domain", {{"ell_list", {2, 2}}}}});
  expect_config_error({{"domain", {{"ell_list", nlohmann::json::array()}}}});
  expect_config_error({{"density", {{"kind", "cubic"}}}});
  expect_config_error({{"density", {{"kind", "p-dirichlet"}, {"p", 1.5}}}});
  expect_config_error({{"grid", {{"target_h", 5.0}}}});
  expect_config_error({{"solver", {{"method", "linear-cg"}}}, {"density", {{"kind", "p-dirichlet"}, {"p", 4}}}});
  expect_config_error({{"solver", {{"grad_tol", -1.0}}}});
  expect_config_error({{"study", {{"ell0", 5.0}}}});
  expect_config_error({{"output", {{"formats", {"xml"}}}}});
  expect_config_error({{"load", {{"kind", "sampled"}, {"values", {1.0, 2.0}}}}});
  expect_config_error({{"typo", 1}});
  expect_config_error({{"domain", {{"r", 1}, {"elllist", {1}}}}});
  CHECK_THROWS_AS(
      config_from_json({{"domain", {{"ell_list", {1000}}}}, {"grid", {{"target_h", 0.001}, {"max_nodes", 1000}}}})
          .validate(),
      ResourceError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
