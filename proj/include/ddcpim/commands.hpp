#pragma once

// Command implementations behind the ddcpim tool. Each returns an exit code:
// 0 ok, 1 validation failure, 2 input error (thrown Error).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddcpim/pipeline.hpp"
#include "ddcpim/weights_io.hpp"

namespace ddcpim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitInput = 2;

namespace detail {

// Floats with at least one decimal: 1 -> "1.0", -4.5 -> "-4.5".
inline std::string fmt_real(double v) {
  std::ostringstream os;
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    os << std::fixed << std::setprecision(1) << v;
  } else {
    os << std::setprecision(7) << v;
  }
  return os.str();
}

inline std::string bin8(std::int8_t v) {
  std::string s;
  for (int b = 7; b >= 0; --b) s += ((bits_of(v) >> b) & 1u) ? '1' : '0';
  return s;
}

inline std::string hex8(std::int8_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%02X", bits_of(v));
  return buf;
}

inline void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::Format, "cannot create directory '" + dir + "'");
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir.empty() ? "." : dir) / name).string();
}

// Deterministic int8 stream independent of the standard library's distributions.
class ByteSource {
 public:
  explicit ByteSource(std::uint64_t seed) : rng_(seed) {}
  std::int8_t next() { return static_cast<std::int8_t>(static_cast<std::uint8_t>(rng_() >> 56)); }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline ActivationTensor random_input(const LayerSpec& s, ByteSource& src) {
  ActivationTensor in({s.C, s.H, s.W});
  for (auto& v : in.storage()) v = src.next();
  return in;
}

inline std::uint64_t layer_seed(std::uint64_t seed, std::size_t index) {
  return seed * 0x9E3779B97F4A7C15ull + index + 1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// transform

struct TransformOptions {
  std::string netspec;
  std::string weights;      // single-layer weights file
  std::string weights_dir;  // or <id>.weights.ddct per layer
  std::string out_dir;
  bool trace = false;
  bool repair_saturated = false;
  std::size_t trace_limit = 64;  // trace lines per layer
};

inline void print_trace(std::ostream& os, const LayerSpec& s, const FccResult& r, std::size_t limit) {
  const std::size_t len = r.quantized.elements_per_filter();
  const bool from_float = !r.float_means.means.empty();
  std::size_t lines = 0;
  for (std::size_t p = 0; p < r.store.pairs(); ++p)
    for (std::size_t e = 0; e < len; ++e) {
      if (lines++ >= limit) {
        os << "trace layer=" << s.id << " ... (" << r.store.pairs() * len - limit << " more)\n";
        return;
      }
      const std::size_t a = 2 * p * len + e, b = (2 * p + 1) * len + e;
      const auto ref = detail::element_ref(p, e, s.K);
      os << "trace layer=" << s.id << " pair=" << p << " c=" << ref.c << " ky=" << ref.ky << " kx=" << ref.kx;
      if (from_float) {
        os << " M0=" << detail::fmt_real(r.float_means[p]) << " symmetric=("
           << detail::fmt_real(r.float_symmetric.weights.flat()[a]) << ", "
           << detail::fmt_real(r.float_symmetric.weights.flat()[b]) << ")";
      }
      const auto q = r.quantized.weights.flat();
      const auto qs = r.int_symmetric.weights.flat();
      os << " quantized=(" << int(q[a]) << ", " << int(q[b]) << ") M=" << r.int_means[p];
      if (q[a] != qs[a] || q[b] != qs[b]) os << " resymmetrized=(" << int(qs[a]) << ", " << int(qs[b]) << ")";
      const auto bc = r.biased_comp.bank.weights.flat();
      const std::int8_t comp = r.store.stored.flat()[p * len + e];
      os << " biased-comp=(" << int(bc[a]) << ", " << int(bc[b]) << ") comp=" << detail::bin8(comp) << " ("
         << detail::hex8(comp) << ") implicit=" << detail::bin8(bitwise_not8(comp)) << " ("
         << detail::hex8(bitwise_not8(comp)) << ")\n";
    }
}

inline int cmd_transform(const TransformOptions& o, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  const NetworkSpec net = load_netspec(o.netspec, false);
  require(!o.weights.empty() || !o.weights_dir.empty(), ErrorKind::Format, "need --weights or --weights-dir");
  require(o.weights.empty() || net.layers.size() == 1, ErrorKind::Format,
          "--weights takes a single-layer netspec; use --weights-dir");
  detail::ensure_dir(o.out_dir);
  std::ofstream report(detail::join(o.out_dir, "transform_report.csv"));
  report << "layer_id,kind,fcc,scale,pairs,elements,flagged_pairs,repaired,symmetrize_l1,complementize_l1,verified\n";
  bool flagged_any = false;
  for (const auto& l : net.layers) {
    const LayerSpec& s = l.spec;
    const std::string path = o.weights.empty() ? layer_file(o.weights_dir, s.id, "weights") : o.weights;
    const DdctFile f = read_ddct(path);
    require(f.dtype == DType::F32 || f.dtype == DType::I8, ErrorKind::Format,
            path + ": transform input must be float32 or int8");
    QuantizeOptions qopt;
    qopt.scale = l.weight_scale;
    std::ostringstream row;
    row << s.id << "," << to_string(s.kind) << "," << (s.uses_fcc() ? 1 : 0) << ",";
    if (!s.uses_fcc()) {
      Int8FilterBank q;
      if (f.dtype == DType::F32) {
        FloatFilterBank fb{f.tensor<float, 4>(), s.id, false, 1.0};
        check_weight_shape(fb.weights, s.N, s, "weights");
        q = quantize(fb, qopt);
      } else {
        q.weights = f.tensor<std::int8_t, 4>();
      }
      check_weight_shape(q.weights, s.N, s, "weights");
      write_ddct(layer_file(o.out_dir, s.id, "plain"), DdctFile::from(q.weights));
      row << q.scale << ",0," << q.weights.size() << ",0,0,0,0,1";
      report << row.str() << "\n";
      os << "layer " << s.id << ": quantized, FCC off\n";
      continue;
    }
    FccOptions fo;
    fo.quantize = qopt;
    fo.repair_saturated = o.repair_saturated;
    FccResult r;
    double sym_l1 = 0;
    if (f.dtype == DType::F32) {
      FloatFilterBank fb{f.tensor<float, 4>(), s.id, true, 1.0};
      check_weight_shape(fb.weights, s.N, s, "weights");
      r = run_fcc(fb, fo);
      for (std::size_t i = 0; i < fb.weights.size(); ++i)
        sym_l1 += std::abs(double(r.float_symmetric.weights.storage()[i]) - fb.weights.storage()[i]);
    } else {
      Int8FilterBank ib;
      ib.weights = f.tensor<std::int8_t, 4>();
      ib.layer_id = s.id;
      check_weight_shape(ib.weights, s.N, s, "weights");
      r = run_fcc(ib, fo);
      for (std::size_t i = 0; i < ib.weights.size(); ++i)
        sym_l1 += std::abs(int(r.int_symmetric.weights.storage()[i]) - int(ib.weights.storage()[i]));
    }
    if (o.trace) print_trace(os, s, r, o.trace_limit);

    const std::string store_path = layer_file(o.out_dir, s.id, "store");
    const std::string means_path = layer_file(o.out_dir, s.id, "means");
    const std::string bc_path = layer_file(o.out_dir, s.id, "bc");
    write_ddct(store_path, DdctFile::from(r.store.stored));
    write_ddct(means_path, means_to_ddct(r.store.means));
    write_ddct(bc_path, DdctFile::from(r.biased_comp.bank.weights));

    // Verify what was written, not what is in memory.
    CompFilterStore back;
    back.stored = read_ddct(store_path).tensor<std::int8_t, 4>();
    back.means = means_from(read_ddct(means_path));
    BiasedCompFilterBank bc_back;
    bc_back.bank.weights = read_ddct(bc_path).tensor<std::int8_t, 4>();
    bc_back.means = back.means;
    const VerificationReport v = verify_complementarity(back, bc_back);

    std::set<std::size_t> flagged;
    for (const auto& e : r.saturated) flagged.insert(e.pair);
    row << r.quantized.scale << "," << r.store.pairs() << "," << r.store.stored.size() << "," << flagged.size()
        << "," << r.repaired << "," << detail::fmt_real(sym_l1) << "," << r.complementize_l1() << ","
        << (v.pass ? 1 : 0);
    report << row.str() << "\n";
    os << "layer " << s.id << ": " << r.store.pairs() << " pairs, scale " << r.quantized.scale << ", "
       << flagged.size() << " flagged, " << r.repaired << " repaired; " << v.message << "\n";
    if (!r.saturated.empty()) {
      flagged_any = true;
      for (std::size_t i = 0; i < std::min<std::size_t>(r.saturated.size(), 10); ++i)
        es << "flagged: layer " << s.id << " " << to_string(r.saturated[i]) << "\n";
      es << "layer " << s.id << ": saturated pairs break exact complementarity; rerun with --repair-saturated\n";
    }
    if (!v.pass && r.saturated.empty()) flagged_any = true;
  }
  return flagged_any ? kExitValidation : kExitOk;
}

// ---------------------------------------------------------------------------
// map

struct MapOptions {
  std::string netspec;
  std::string weights_dir;  // optional; zeros otherwise
  std::string config = "full";
  std::string out_dir;      // optional; stdout otherwise
};

inline int cmd_map(const MapOptions& o, std::ostream& os = std::cout) {
  const NetworkSpec net = load_netspec(o.netspec);
  const FeatureConfig f = FeatureConfig::parse(o.config);
  if (!o.out_dir.empty()) detail::ensure_dir(o.out_dir);
  for (const auto& l : net.layers) {
    const LayerWeights w = o.weights_dir.empty() ? zero_weights(l.spec) : load_layer(o.weights_dir, l.spec).weights;
    const Schedule sch = map_layer(l.spec, w, f);
    if (o.out_dir.empty()) {
      os << to_text(sch);
    } else {
      std::ofstream(detail::join(o.out_dir, l.spec.id + ".schedule.txt")) << to_text(sch);
      os << l.spec.id << " " << to_string(sch.parallelism) << " rounds=" << sch.rounds.size()
         << " loads=" << sch.load_steps() << " passes=" << sch.pass_templates() << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string netspec;
  std::string weights_dir;
  std::string input;
  std::optional<std::string> config;  // netspec features block, else "full"
  std::string out_dir;
};

struct SimulationResult {
  OutputTensor output;
  CycleReport cycles;
};

inline SimulationResult simulate_network(const NetworkSpec& net, const std::map<std::string, LoadedLayer>& layers,
                                         const ActivationTensor& input, const FeatureConfig& f) {
  SimulationResult res;
  ActivationTensor act = input;
  std::vector<NetworkLayer> sched;
  std::vector<FeatureConfig> configs{FeatureConfig::baseline()};
  if (!(f == FeatureConfig::baseline())) configs.push_back(f);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const NetLayer& l = net.layers[i];
    const LayerWeights& w = layers.at(l.spec.id).weights;
    NetworkLayer nl;
    nl.spec = l.spec;
    for (const auto& c : configs) nl.schedules.emplace(c.name(), map_layer(l.spec, w, c));
    const OutputTensor out = execute(nl.schedules.at(f.name()), as_layer_input(act, l.spec));
    sched.push_back(std::move(nl));
    if (i + 1 == net.layers.size()) {
      res.output = out;
    } else {
      act = apply_post(requantize(out, l.spec.shift), l.post);
    }
  }
  res.cycles = network_report(net.name, sched, configs);
  return res;
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& os = std::cout) {
  const NetworkSpec net = load_netspec(o.netspec);
  const FeatureConfig f =
      o.config ? FeatureConfig::parse(*o.config) : net.features.value_or(FeatureConfig::full());
  f.validate();
  std::map<std::string, LoadedLayer> layers;
  for (const auto& l : net.layers) layers.emplace(l.spec.id, load_layer(o.weights_dir, l.spec));
  const LayerSpec& first = net.layers.front().spec;
  const ActivationTensor input = as_layer_input(read_ddct(o.input).tensor<std::int8_t, 3>(), first);
  const SimulationResult r = simulate_network(net, layers, input, f);
  detail::ensure_dir(o.out_dir);
  write_ddct(detail::join(o.out_dir, "output.ddct"), DdctFile::from(r.output));
  std::ofstream csv(detail::join(o.out_dir, "cycles.csv"), std::ios::binary);
  write_csv(csv, r.cycles);
  const auto& t = r.cycles.totals_for(f.name());
  os << "network " << net.name << " config " << f.name() << ": " << t.total() << " cycles (load " << t.load_cycles
     << ", compute " << t.compute_cycles << "), speedup " << std::fixed << std::setprecision(3) << t.speedup
     << " vs baseline\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateOptions {
  std::string netspec;
  std::string weights_dir;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::string config = "full";
  std::string out_dir;  // failing-case dumps
};

struct Mismatch {
  std::size_t channel = 0, y = 0, x = 0;
  std::int32_t expected = 0, actual = 0;
};

inline std::optional<Mismatch> first_mismatch(const OutputTensor& expected, const OutputTensor& actual) {
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (expected.storage()[i] != actual.storage()[i]) {
      const auto idx = expected.unravel(i);
      return Mismatch{idx[0], idx[1], idx[2], expected.storage()[i], actual.storage()[i]};
    }
  return std::nullopt;
}

// Zeroes every input element whose removal keeps the output at `m` wrong.
inline ActivationTensor minimize_input(ActivationTensor in, const LayerSpec& s, const Schedule& sch,
                                       const Weights<std::int8_t>& oracle, const Mismatch& m) {
  auto still_fails = [&](const ActivationTensor& t) {
    const OutputTensor e = conv_direct(t, oracle, s);
    const OutputTensor a = execute(sch, t);
    return e(m.channel, m.y, m.x) != a(m.channel, m.y, m.x);
  };
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in.storage()[i] == 0) continue;
    const std::int8_t keep = in.storage()[i];
    in.storage()[i] = 0;
    if (!still_fails(in)) in.storage()[i] = keep;
  }
  return in;
}

inline int cmd_validate(const ValidateOptions& o, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  const NetworkSpec net = load_netspec(o.netspec, false);
  const FeatureConfig f = FeatureConfig::parse(o.config);
  if (o.trials == 0) {
    es << "warning: --trials 0, nothing checked\n";
    os << "validate " << net.name << ": 0 trials, vacuous pass\n";
    return kExitOk;
  }
  std::size_t failures = 0, checked = 0;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& s = net.layers[li].spec;
    const LoadedLayer loaded = load_layer(o.weights_dir, s);
    if (loaded.weights.store) {
      BiasedCompFilterBank bc;
      bc.bank.weights = loaded.oracle_bank;
      bc.means = loaded.weights.store->means;
      const VerificationReport v = verify_complementarity(*loaded.weights.store, bc);
      if (!v.pass) {
        ++failures;
        os << "FAIL layer " << s.id << " store: " << v.message << "\n";
      }
    }
    const Schedule sch = map_layer(s, loaded.weights, f);
    detail::ByteSource src(detail::layer_seed(o.seed, li));
    std::size_t layer_fail = 0;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const ActivationTensor in = detail::random_input(s, src);
      const OutputTensor expected = conv_direct(in, loaded.oracle_bank, s);
      const OutputTensor actual = execute(sch, in);
      ++checked;
      const auto mm = first_mismatch(expected, actual);
      if (!mm) continue;
      if (layer_fail++ > 0) continue;
      ++failures;
      const ActivationTensor small = minimize_input(in, s, sch, loaded.oracle_bank, *mm);
      os << "FAIL layer " << s.id << " trial " << t << " channel " << mm->channel << " position (" << mm->y << ","
         << mm->x << "): expected " << mm->expected << ", got " << mm->actual << "\n";
      nlohmann::json dump;
      dump["layer"] = s.id;
      dump["kind"] = to_string(s.kind);
      dump["config"] = f.name();
      dump["seed"] = o.seed;
      dump["trial"] = t;
      dump["channel"] = mm->channel;
      dump["y"] = mm->y;
      dump["x"] = mm->x;
      dump["expected"] = mm->expected;
      dump["actual"] = mm->actual;
      nlohmann::json nz = nlohmann::json::array();
      for (std::size_t i = 0; i < small.size(); ++i)
        if (small.storage()[i] != 0) {
          const auto idx = small.unravel(i);
          nz.push_back({{"c", idx[0]}, {"y", idx[1]}, {"x", idx[2]}, {"v", small.storage()[i]}});
        }
      dump["minimized_input_nonzeros"] = nz;
      const std::string dir = o.out_dir.empty() ? "." : o.out_dir;
      detail::ensure_dir(dir);
      std::ofstream(detail::join(dir, "failure_" + s.id + ".json")) << dump.dump(1) << "\n";
      write_ddct(detail::join(dir, "failure_" + s.id + ".input.ddct"), DdctFile::from(small));
      os << "  minimized input keeps " << nz.size() << " nonzero values; dump in "
         << detail::join(dir, "failure_" + s.id + ".json") << "\n";
    }
    if (layer_fail > 0) os << "layer " << s.id << ": " << layer_fail << " of " << o.trials << " trials mismatched\n";
  }
  os << "validate " << net.name << " config " << f.name() << ": " << checked << " trials, "
     << (failures ? "FAIL" : "PASS") << "\n";
  return failures ? kExitValidation : kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::string netspec;
  std::string out_dir;  // report.csv; stdout otherwise
  CycleConstants constants;
};

inline int cmd_report(const ReportOptions& o, std::ostream& os = std::cout) {
  const NetworkSpec net = load_netspec(o.netspec);
  const CycleReport rep = network_cycles(net, o.constants);
  if (o.out_dir.empty()) {
    write_csv(os, rep);
  } else {
    detail::ensure_dir(o.out_dir);
    std::ofstream csv(detail::join(o.out_dir, "report.csv"), std::ios::binary);
    write_csv(csv, rep);
  }
  os << std::fixed << std::setprecision(3);
  for (const auto& t : rep.totals) os << "# " << net.name << " " << t.config << " speedup " << t.speedup << "\n";
  os << "# baseline dw-conv share " << rep.baseline_dw_fraction() << ", ladder "
     << (rep.ladder_monotone() ? "monotone" : "NOT monotone") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gen: random float weights for every layer plus an int8 input

struct GenOptions {
  std::string netspec;
  std::string out_dir;
  std::uint64_t seed = 1;
  double stddev = 0.1;
};

inline int cmd_gen(const GenOptions& o, std::ostream& os = std::cout) {
  const NetworkSpec net = load_netspec(o.netspec);
  detail::ensure_dir(o.out_dir);
  detail::ByteSource src(o.seed);
  std::normal_distribution<double> nd(0.0, o.stddev);
  for (const auto& l : net.layers) {
    const LayerSpec& s = l.spec;
    Weights<float> w({s.N, s.filter_channels(), s.K, s.K});
    for (auto& v : w.storage()) v = static_cast<float>(nd(src.engine()));
    write_ddct(layer_file(o.out_dir, s.id, "weights"), DdctFile::from(w));
  }
  const LayerSpec& first = net.layers.front().spec;
  write_ddct(detail::join(o.out_dir, "input.ddct"), DdctFile::from(detail::random_input(first, src)));
  os << "wrote weights for " << net.layers.size() << " layers and input.ddct to " << o.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pack: DDCT from literal values

struct PackOptions {
  std::string dtype = "float32";
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
  std::string out;
};

inline int cmd_pack(const PackOptions& o) {
  std::size_t n = 1;
  for (auto d : o.dims) n *= d;
  require(n == o.values.size(), ErrorKind::Format,
          std::to_string(o.values.size()) + " values for dims holding " + std::to_string(n));
  auto ints = [&](auto tag, long lo, long hi) {
    using T = decltype(tag);
    std::vector<T> v;
    for (double x : o.values) {
      require(x == std::floor(x) && x >= lo && x <= hi, ErrorKind::Range,
              "value " + detail::fmt_real(x) + " does not fit " + o.dtype);
      v.push_back(static_cast<T>(x));
    }
    return DdctFile::from<T>(o.dims, std::move(v));
  };
  DdctFile f;
  if (o.dtype == "float32") {
    f = DdctFile::from<float>(o.dims, std::vector<float>(o.values.begin(), o.values.end()));
  } else if (o.dtype == "int8") {
    f = ints(std::int8_t{}, -128, 127);
  } else if (o.dtype == "int16") {
    f = ints(std::int16_t{}, -32768, 32767);
  } else if (o.dtype == "int32") {
    f = ints(std::int32_t{}, INT32_MIN, INT32_MAX);
  } else {
    throw Error(ErrorKind::Format, "unknown dtype '" + o.dtype + "'");
  }
  write_ddct(o.out, f);
  return kExitOk;
}

// Maps exceptions to the exit-code contract.
template <typename Fn>
int run_command(Fn&& fn, std::ostream& es = std::cerr) {
  try {
    return fn();
  } catch (const Error& e) {
    es << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    es << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace ddcpim
