#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddcpim/commands.hpp"
#include "testutil.hpp"

using namespace ddcpim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddcpim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string src(const std::string& rel) { return std::string(DDCPIM_SOURCE_DIR) + "/" + rel; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Ddct, RoundTripAllDtypes) {
  const std::vector<std::uint32_t> dims{2, 3};
  const auto f32 = DdctFile::from<float>(dims, {-1.5f, 0.0f, 3.25f, 1e-7f, -0.0f, 6.5f});
  const auto i8 = DdctFile::from<std::int8_t>(dims, {-128, -1, 0, 1, 5, 127});
  const auto i32 = DdctFile::from<std::int32_t>(dims, {INT32_MIN, -1, 0, 1, 70000, INT32_MAX});
  const auto i16 = DdctFile::from<std::int16_t>(dims, {-32768, -1, 0, 1, 300, 32767});
  for (const auto& f : {f32, i8, i32, i16}) {
    const auto back = decode(encode(f));
    EXPECT_EQ(back.dtype, f.dtype);
    EXPECT_EQ(back.dims, f.dims);
    EXPECT_EQ(encode(back), encode(f));
  }
  EXPECT_EQ(decode(encode(i32)).values<std::int32_t>(), i32.values<std::int32_t>());
}

TEST(Ddct, ExactHeaderBytes) {
  const auto bytes = encode(DdctFile::from<std::int16_t>({2}, {1, -2}));
  const std::vector<std::uint8_t> expect{'D', 'D', 'C', 'T', 1, 3, 1, 2, 0, 0, 0, 0x01, 0x00, 0xFE, 0xFF};
  EXPECT_EQ(bytes, expect);
}

TEST(Ddct, RejectsMalformed) {
  auto bytes = encode(DdctFile::from<std::int8_t>({2}, {1, 2}));
  auto bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode(bad), Error);
  bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode(bad), Error);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode(bad), Error);
  bad = bytes;
  bad[5] = 9;
  EXPECT_THROW(decode(bad), Error);
}

TEST(Netspec, ParsesAndChecksChain) {
  const auto net = parse_netspec(R"({"name":"n","layers":[
    {"id":"a","kind":"std","H":8,"W":8,"C":3,"N":4,"K":3,"pad":1,"shift":4},
    {"id":"b","kind":"dw","H":8,"W":8,"C":4,"N":4,"K":3,"pad":1,"post":"avgpool"},
    {"id":"c","kind":"fc","H":1,"W":1,"C":4,"N":3}]})");
  ASSERT_EQ(net.layers.size(), 3u);
  EXPECT_EQ(net.layers[0].spec.shift, 4);
  EXPECT_FALSE(net.layers[2].spec.fcc_enabled);
  EXPECT_EQ(net.layers[1].post, PostOp::AvgPool);
  EXPECT_THROW(parse_netspec(R"({"layers":[
    {"id":"a","kind":"std","H":8,"W":8,"C":3,"N":4,"K":3,"pad":1},
    {"id":"b","kind":"pw","H":8,"W":8,"C":5,"N":4}]})"),
               Error);
  EXPECT_THROW(parse_netspec(R"({"layers":[{"id":"a","kind":"dw","H":8,"W":8,"C":3,"N":4,"K":3}]})"), Error);
  EXPECT_THROW(parse_netspec("not json"), Error);
}

TEST(Netspec, ShippedNetworksLoad) {
  for (const char* f : {"configs/mobilenetv2_cifar10.json", "configs/efficientnet_b0_cifar10.json"}) {
    const auto net = load_netspec(src(f));
    EXPECT_GT(net.layers.size(), 40u);
  }
}

TEST(Cli, Fig4TraceMatchesWorkedExample) {
  const auto out = scratch("fig4");
  TransformOptions o;
  o.netspec = src("fixtures/fig4/netspec.json");
  o.weights = src("fixtures/fig4/weights.ddct");
  o.out_dir = out.string();
  o.trace = true;
  std::ostringstream os, es;
  ASSERT_EQ(cmd_transform(o, os, es), kExitOk) << es.str();
  const std::string trace = os.str();
  EXPECT_NE(trace.find("pair=0 c=0 ky=0 kx=0 M0=1.0 symmetric=(-4.5, 6.5) quantized=(-4, 6) M=1 "
                       "biased-comp=(-5, 6) comp=11111010 (0xFA) implicit=00000101 (0x05)"),
            std::string::npos)
      << trace;
  const auto store = read_ddct((out / "fig4.store.ddct").string());
  EXPECT_EQ(store.values<std::int8_t>()[0], -6);
  EXPECT_EQ(read_ddct((out / "fig4.means.ddct").string()).values<std::int16_t>(), std::vector<std::int16_t>{1});
}

TEST(Cli, ZeroBankGivesZeroAndOnesPattern) {
  const auto out = scratch("zero");
  write_text(out / "net.json", R"({"layers":[{"id":"z","kind":"std","H":3,"W":3,"C":2,"N":2,"K":3}]})");
  write_ddct((out / "z.weights.ddct").string(), DdctFile::from(Weights<float>({2, 2, 3, 3})));
  TransformOptions o;
  o.netspec = (out / "net.json").string();
  o.weights_dir = out.string();
  o.out_dir = out.string();
  std::ostringstream os, es;
  ASSERT_EQ(cmd_transform(o, os, es), kExitOk);
  const auto st = read_ddct((out / "z.store.ddct").string());
  for (auto v : st.values<std::int8_t>()) EXPECT_EQ(bits_of(v), 0x00);
  const auto bc = read_ddct((out / "z.bc.ddct").string()).values<std::int8_t>();
  for (std::size_t i = 0; i < 18; ++i) EXPECT_EQ(bc[i], 0);
  for (std::size_t i = 18; i < 36; ++i) EXPECT_EQ(bits_of(bc[i]), 0xFF);
}

namespace {

// gen + transform a small network into `dir`.
fs::path prepare(const std::string& name, const std::string& netspec, std::uint64_t seed = 7) {
  const auto dir = scratch(name);
  write_text(dir / "net.json", netspec);
  GenOptions g;
  g.netspec = (dir / "net.json").string();
  g.out_dir = dir.string();
  g.seed = seed;
  std::ostringstream sink;
  EXPECT_EQ(cmd_gen(g, sink), kExitOk);
  TransformOptions t;
  t.netspec = g.netspec;
  t.weights_dir = dir.string();
  t.out_dir = dir.string();
  t.repair_saturated = true;
  EXPECT_EQ(cmd_transform(t, sink, sink), kExitOk);
  return dir;
}

const char* kSmallNet = R"({"name":"small","layers":[
  {"id":"c1","kind":"std","H":8,"W":8,"C":3,"N":8,"K":3,"pad":1,"shift":7},
  {"id":"d1","kind":"dw","H":8,"W":8,"C":8,"N":8,"K":3,"pad":1,"stride":2,"shift":6},
  {"id":"p1","kind":"pw","H":4,"W":4,"C":8,"N":16,"shift":7,"post":"avgpool"},
  {"id":"fc","kind":"fc","H":1,"W":1,"C":16,"N":5}]})";

}  // namespace

TEST(Cli, ValidatePassesOnTransformedNetwork) {
  const auto dir = prepare("validate", kSmallNet);
  ValidateOptions v;
  v.netspec = (dir / "net.json").string();
  v.weights_dir = dir.string();
  v.trials = 100;
  std::ostringstream os, es;
  EXPECT_EQ(cmd_validate(v, os, es), kExitOk) << os.str();
  EXPECT_NE(os.str().find("PASS"), std::string::npos);
}

TEST(Cli, ValidateCatchesFlippedBit) {
  const auto dir = prepare("flip", kSmallNet);
  const std::string store = (dir / "c1.store.ddct").string();
  auto f = read_ddct(store);
  auto v8 = f.values<std::int8_t>();
  v8[5] = static_cast<std::int8_t>(v8[5] ^ 0x04);
  write_ddct(store, DdctFile::from<std::int8_t>(f.dims, v8));
  ValidateOptions v;
  v.netspec = (dir / "net.json").string();
  v.weights_dir = dir.string();
  v.trials = 5;
  v.out_dir = (dir / "fail").string();
  std::ostringstream os, es;
  EXPECT_EQ(cmd_validate(v, os, es), kExitValidation);
  EXPECT_NE(os.str().find("FAIL layer c1"), std::string::npos) << os.str();
  EXPECT_NE(os.str().find("position ("), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "fail" / "failure_c1.json"));
}

TEST(Cli, ValidateZeroTrialsIsVacuous) {
  const auto dir = prepare("zero_trials", kSmallNet);
  ValidateOptions v;
  v.netspec = (dir / "net.json").string();
  v.weights_dir = dir.string();
  v.trials = 0;
  std::ostringstream os, es;
  EXPECT_EQ(cmd_validate(v, os, es), kExitOk);
  EXPECT_NE(es.str().find("warning"), std::string::npos);
}

TEST(Cli, SimulateMatchesChainedOracleAndIsDeterministic) {
  const auto dir = prepare("simulate", kSmallNet);
  const auto net = load_netspec((dir / "net.json").string());
  SimulateOptions s;
  s.netspec = (dir / "net.json").string();
  s.weights_dir = dir.string();
  s.input = (dir / "input.ddct").string();
  std::ostringstream os;
  for (const char* cfg : {"baseline", "full"}) {
    s.config = cfg;
    s.out_dir = (dir / cfg).string();
    ASSERT_EQ(cmd_simulate(s, os), kExitOk);
  }
  // oracle chain
  ActivationTensor act = read_ddct(s.input).tensor<std::int8_t, 3>();
  OutputTensor out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const auto loaded = load_layer(dir.string(), l.spec);
    out = conv_direct(as_layer_input(act, l.spec), loaded.oracle_bank, l.spec);
    act = apply_post(requantize(out, l.spec.shift), l.post);
  }
  for (const char* cfg : {"baseline", "full"}) {
    const auto got = read_ddct((dir / cfg / "output.ddct").string()).tensor<std::int32_t, 3>();
    EXPECT_EQ(got, out) << cfg;
  }
  // rerun: byte-identical files
  s.config = "full";
  s.out_dir = (dir / "again").string();
  ASSERT_EQ(cmd_simulate(s, os), kExitOk);
  EXPECT_EQ(slurp(dir / "again" / "output.ddct"), slurp(dir / "full" / "output.ddct"));
  EXPECT_EQ(slurp(dir / "again" / "cycles.csv"), slurp(dir / "full" / "cycles.csv"));
}

TEST(Cli, SimulateFcIdentity) {
  const auto dir = scratch("fc_identity");
  write_text(dir / "net.json", R"({"layers":[{"id":"fc","kind":"fc","H":1,"W":1,"C":24,"N":24}]})");
  Weights<std::int8_t> eye({24, 24, 1, 1});
  for (std::size_t i = 0; i < 24; ++i) eye(i, i, 0, 0) = 1;
  write_ddct((dir / "fc.plain.ddct").string(), DdctFile::from(eye));
  const auto in = testutil::random_input(24, 1, 1);
  write_ddct((dir / "input.ddct").string(), DdctFile::from(in));
  SimulateOptions s;
  s.netspec = (dir / "net.json").string();
  s.weights_dir = dir.string();
  s.input = (dir / "input.ddct").string();
  s.out_dir = dir.string();
  std::ostringstream os;
  ASSERT_EQ(cmd_simulate(s, os), kExitOk);
  const auto out = read_ddct((dir / "output.ddct").string()).values<std::int32_t>();
  for (std::size_t i = 0; i < 24; ++i) EXPECT_EQ(out[i], in.storage()[i]);
}

TEST(Cli, MissingFilesAreInputErrors) {
  SimulateOptions s;
  s.netspec = "/nonexistent/net.json";
  EXPECT_EQ(run_command([&] { return cmd_simulate(s); }, std::cerr), kExitInput);
}

TEST(Cli, PackWritesFixtureBytes) {
  const auto dir = scratch("pack");
  PackOptions p;
  p.dims = {2, 1, 2, 2};
  p.values = {-1.5, 0.5, 2.0, 1.0, 6.5, 1.5, -1.0, -1.0};
  p.out = (dir / "w.ddct").string();
  ASSERT_EQ(cmd_pack(p), kExitOk);
  EXPECT_EQ(slurp(p.out), slurp(src("fixtures/fig4/weights.ddct")));
  p.dtype = "int8";
  p.values = {1, 2, 3, 300, 0, 0, 0, 0};
  EXPECT_THROW(cmd_pack(p), Error);
}
