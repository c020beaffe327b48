/// @file test_io.cpp
/// @brief Config parsing, field-file and checkpoint round trips, integrity
///        checks and CSV formatting.
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "speconet/errors.hpp"
#include "speconet/io.hpp"
#include "speconet/rng.hpp"

using namespace speconet;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "speconet_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void flip_byte(const fs::path& p, std::size_t offset) {
  std::string s = slurp(p);
  s[offset] = static_cast<char>(s[offset] ^ 0x5a);
  std::ofstream(p, std::ios::binary | std::ios::trunc) << s;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TrainedModel random_model(bool share) {
  TrainedModel m;
  m.arch = {2, 3, 2, 3};
  m.block_size = 2;
  m.share_phi_conv = share;
  m.steps = 3;
  kernels::ConvShape s{2, 2, 2, 3, 6};
  for (int b = 0; b < 2; ++b) {
    auto n = init_net(s, 5, b == 0 ? 2 : 1, 100 + b);
    n.in_scale = 0.1 * (b + 1);
    n.out_scale.back() = 3.0 + b;
    n.bias = {1e-300, -0.0};
    m.u_blocks.push_back(n);
  }
  const int phis = share ? 2 : 3;
  for (int k = 0; k < phis; ++k) m.phi_nets.push_back(init_net(s, 4, share && k == 0 ? 2 : 1, 200 + k));
  return m;
}

void check_same(const ConvNet& a, const ConvNet& b) {
  CHECK(a.conv.kernel == b.conv.kernel);
  CHECK(a.conv.grid == b.conv.grid);
  CHECK(a.out_len == b.out_len);
  CHECK(same_bits(a.kernel, b.kernel));
  CHECK(same_bits(a.bias, b.bias));
  CHECK(same_bits({a.in_scale}, {b.in_scale}));
  CHECK(same_bits(a.out_scale, b.out_scale));
  REQUIRE(a.heads.size() == b.heads.size());
  for (std::size_t j = 0; j < a.heads.size(); ++j) CHECK(same_bits(a.heads[j], b.heads[j]));
}

}  // namespace

TEST_CASE("config: key=value text with comments and sections") {
  const auto kv = parse_config_text("# header\nproblem.n = 16\n\ntrain.lbfgs.max_iter=500  # inline\nrun.name = a b\n");
  CHECK(kv.size() == 3u);
  CHECK(kv.at("problem.n") == "16");
  CHECK(kv.at("train.lbfgs.max_iter") == "500");
  CHECK(kv.at("run.name") == "a b");
}

TEST_CASE("config: malformed lines and duplicates are rejected") {
  CHECK_THROWS_AS(parse_config_text("a.b\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("bad key=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("=1\n"), ConfigError);
}

TEST_CASE("config: typed reads and unknown keys") {
  ConfigReader r(parse_config_text("a=3\nb=0.25\nc=true\nd=1, 2,3\ne=1e-3,2\nf=x\nextra.key=1\n"));
  int a = 0;
  double b = 0;
  bool c = false;
  std::vector<int> d;
  std::vector<double> e;
  std::string f;
  int missing = 7;
  r.get("a", a);
  r.get("b", b);
  r.get("c", c);
  r.get("d", d);
  r.get("e", e);
  r.get("f", f);
  r.get("missing", missing);
  CHECK(a == 3);
  CHECK(b == 0.25);
  CHECK(c);
  CHECK(d == std::vector<int>{1, 2, 3});
  CHECK(e == std::vector<double>{1e-3, 2.0});
  CHECK(f == "x");
  CHECK(missing == 7);
  try {
    r.finish();
    FAIL("unknown key accepted");
  } catch (const ConfigError& err) {
    CHECK(std::string(err.what()).find("extra.key") != std::string::npos);
  }
  ConfigReader bad(parse_config_text("n=12x\nflag=maybe\n"));
  int n = 0;
  bool flag = false;
  CHECK_THROWS_AS(bad.get("n", n), ConfigError);
  CHECK_THROWS_AS(bad.get("flag", flag), ConfigError);
}

TEST_CASE("field files: bitwise round trip for Legendre and Fourier layouts") {
  NormalSampler g(5);
  for (auto bc : {Boundary::Dirichlet, Boundary::Periodic}) {
    const auto sp = Discretization::create({2, bc, 6, false});
    Components c(2, std::vector<double>(sp->coeff_count(Role::State)));
    for (auto& comp : c)
      for (double& v : comp) v = g.standard();
    c[0][0] = -0.0;
    const auto f = make_field(*sp, Role::State, c, 0.37);
    CHECK(f.payload.size() == f.expected_length());
    CHECK(f.complex == (bc == Boundary::Periodic));
    const auto path = temp_path("field.spfd");
    write_field(path, f);
    const auto back = read_field(path);
    CHECK(back.kinds == f.kinds);
    CHECK(back.sizes == f.sizes);
    CHECK(back.components == 2u);
    CHECK(back.complex == f.complex);
    CHECK(back.time == 0.37);
    CHECK(same_bits(back.payload, f.payload));
  }
}

TEST_CASE("field files: truncation and bad magic are integrity errors") {
  const auto sp = Discretization::create({2, Boundary::Dirichlet, 4, false});
  const auto f = make_field(*sp, Role::Velocity, Components(1, std::vector<double>(16, 1.0)), 0.0);
  const auto path = temp_path("trunc.spfd");
  write_field(path, f);
  const auto bytes = slurp(path);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(read_field(path), IntegrityError);
  write_field(path, f);
  flip_byte(path, 0);
  CHECK_THROWS_AS(read_field(path), IntegrityError);
  CHECK_THROWS_AS(read_field(temp_path("does_not_exist.spfd")), ConfigError);
}

TEST_CASE("checkpoints: bitwise round trip with metadata") {
  for (bool share : {false, true}) {
    Checkpoint c{random_model(share), R"({"problem":{"family":"initial2d","n":16}})"};
    const auto path = temp_path("model.spon");
    write_checkpoint(path, c);
    const auto back = read_checkpoint(path);
    CHECK(back.metadata == c.metadata);
    CHECK(back.model.steps == 3);
    CHECK(back.model.block_size == 2);
    CHECK(back.model.share_phi_conv == share);
    CHECK(back.model.arch.u_kernel == 3);
    REQUIRE(back.model.u_blocks.size() == 2u);
    REQUIRE(back.model.phi_nets.size() == c.model.phi_nets.size());
    for (std::size_t i = 0; i < 2; ++i) check_same(back.model.u_blocks[i], c.model.u_blocks[i]);
    for (std::size_t i = 0; i < c.model.phi_nets.size(); ++i) check_same(back.model.phi_nets[i], c.model.phi_nets[i]);
    // Rewriting the read model reproduces the file.
    const auto path2 = temp_path("model2.spon");
    write_checkpoint(path2, back);
    CHECK(slurp(path) == slurp(path2));
  }
}

TEST_CASE("checkpoints: any corrupted byte is an integrity error") {
  const auto path = temp_path("corrupt.spon");
  write_checkpoint(path, {random_model(false), "{}"});
  const auto size = fs::file_size(path);
  for (std::size_t off : {std::size_t{2}, std::size_t{30}, static_cast<std::size_t>(size / 2),
                          static_cast<std::size_t>(size - 1)}) {
    write_checkpoint(path, {random_model(false), "{}"});
    flip_byte(path, off);
    CHECK_THROWS_AS(read_checkpoint(path), IntegrityError);
  }
  write_checkpoint(path, {random_model(false), "{}"});
  const auto bytes = slurp(path);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes.substr(0, 20);
  CHECK_THROWS_AS(read_checkpoint(path), IntegrityError);
}

TEST_CASE("checksum: FNV-1a 64 reference values") {
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a, 1) == 0xaf63dc4c8601ec8cULL);
  const char* foobar = "foobar";
  CHECK(fnv1a64(reinterpret_cast<const std::uint8_t*>(foobar), 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("csv: header, %.17g values and LF endings") {
  const auto path = temp_path("table.csv");
  {
    CsvWriter w(path, {"step", "phase", "value"});
    w.values(3, 'u', 0.1);
    w.values(std::string("x"), "p", 1.0 / 3.0);
    CHECK_THROWS_AS(w.row({"1", "2"}), ContractViolation);
  }
  CHECK(slurp(path) == "step,phase,value\n3,u,0.10000000000000001\nx,p,0.33333333333333331\n");
  CHECK(std::stod(fmt_double(1.0 / 3.0)) == 1.0 / 3.0);
}
