#include "gres2net/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "gres2net/error.hpp"
#include "gres2net/keyvalue.hpp"

namespace gres2net {

namespace {

constexpr char kMagic[8] = {'G', 'R', '2', 'N', 'C', 'K', 'P', 'T'};
constexpr char kEnd[4] = {'E', 'N', 'D', '!'};

template <typename U>
void put_uint(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

void put_string32(std::ostream& out, const std::string& s) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_string64(std::ostream& out, const std::string& s) {
  put_uint<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_array(std::ostream& out, const std::string& name, const Tensor3& t) {
  put_string32(out, name);
  put_uint<std::uint64_t>(out, t.shape().batch);
  put_uint<std::uint64_t>(out, t.shape().channels);
  put_uint<std::uint64_t>(out, t.shape().time);
  for (double v : t.values()) put_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(fmt::format("truncated while reading {}", what));
  }

  template <typename U>
  U uint(const char* what) {
    unsigned char b[sizeof(U)];
    bytes(reinterpret_cast<char*>(b), sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
  }

  std::string string(std::uint64_t length, const char* what) {
    if (length > (std::uint64_t{1} << 30)) fail(fmt::format("implausible {} length {}", what, length));
    std::string s(length, '\0');
    bytes(s.data(), s.size(), what);
    return s;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw CheckpointError(fmt::format("{}: {}", source_, message));
  }

 private:
  std::istream& in_;
  std::string source_;
};

Tensor3 row_tensor(const std::vector<double>& v) { return Tensor3({1, v.size(), 1}, v); }

Tensor3 scalar(double v) { return Tensor3({1, 1, 1}, std::vector<double>{v}); }

}  // namespace

Checkpoint make_checkpoint(const Model& model, const DatasetSplit& data, const TrainState* state) {
  Checkpoint c;
  c.spec = model.spec();
  for (const Parameter* p : model.parameters()) c.param_names.push_back(p->name);
  c.params = model.snapshot();
  c.input_stats = data.input_stats;
  c.target_stats = data.target_stats;
  if (state != nullptr) c.state = *state;
  return c;
}

std::unique_ptr<Model> build_model(const Checkpoint& ckpt) {
  auto model = std::make_unique<Model>(ckpt.spec, 0);
  model->restore(ckpt.params);
  return model;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic, sizeof kMagic);
  put_uint<std::uint32_t>(out, Checkpoint::kVersion);
  put_string64(out, ckpt.spec.to_text());

  KeyValues st;
  st.set("state", ckpt.state ? "true" : "false");
  if (ckpt.state) {
    const TrainState& s = *ckpt.state;
    st.set("next_epoch", std::to_string(s.next_epoch));
    st.set("adam.step", std::to_string(s.adam.step));
    st.set("best_epoch", std::to_string(s.best_epoch));
    st.set("rng", s.rng_state);
  }
  put_string64(out, st.to_text());

  std::vector<std::pair<std::string, const Tensor3*>> arrays;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) arrays.emplace_back("param:" + ckpt.param_names[i], &ckpt.params[i]);
  const Tensor3 in_mean = ckpt.input_stats.empty() ? Tensor3() : row_tensor(ckpt.input_stats.mean);
  const Tensor3 in_scale = ckpt.input_stats.empty() ? Tensor3() : row_tensor(ckpt.input_stats.scale);
  const Tensor3 t_mean = ckpt.target_stats.empty() ? Tensor3() : row_tensor(ckpt.target_stats.mean);
  const Tensor3 t_scale = ckpt.target_stats.empty() ? Tensor3() : row_tensor(ckpt.target_stats.scale);
  if (!ckpt.input_stats.empty()) {
    arrays.emplace_back("norm.mean", &in_mean);
    arrays.emplace_back("norm.scale", &in_scale);
  }
  if (!ckpt.target_stats.empty()) {
    arrays.emplace_back("target.mean", &t_mean);
    arrays.emplace_back("target.scale", &t_scale);
  }
  Tensor3 hyper, best_metric;
  if (ckpt.state) {
    const TrainState& s = *ckpt.state;
    hyper = Tensor3({1, 3, 1}, std::vector<double>{s.adam.beta1, s.adam.beta2, s.adam.epsilon});
    arrays.emplace_back("adam.hyper", &hyper);
    for (std::size_t i = 0; i < s.adam.m.size(); ++i) {
      arrays.emplace_back("adam.m:" + ckpt.param_names.at(i), &s.adam.m[i]);
      arrays.emplace_back("adam.v:" + ckpt.param_names.at(i), &s.adam.v[i]);
    }
    for (std::size_t i = 0; i < s.best_params.size(); ++i) {
      arrays.emplace_back("best:" + ckpt.param_names.at(i), &s.best_params[i]);
    }
    if (s.best_metric) {
      best_metric = scalar(*s.best_metric);
      arrays.emplace_back("state.best_metric", &best_metric);
    }
  }
  put_uint<std::uint64_t>(out, arrays.size());
  for (const auto& [name, t] : arrays) put_array(out, name, *t);
  out.write(kEnd, sizeof kEnd);
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  Reader r(in, source);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a gres2net checkpoint (bad magic)");
  const auto version = r.uint<std::uint32_t>("version");
  if (version != Checkpoint::kVersion) {
    r.fail(fmt::format("unsupported format version {} (this build reads {})", version, Checkpoint::kVersion));
  }

  Checkpoint c;
  try {
    c.spec = ModelSpec::from_text(r.string(r.uint<std::uint64_t>("topology length"), "topology"));
  } catch (const ConfigError& e) {
    r.fail(fmt::format("bad topology: {}", e.what()));
  }
  const std::string state_text = r.string(r.uint<std::uint64_t>("state length"), "state");

  std::map<std::string, Tensor3> arrays;
  std::vector<std::string> order;
  const auto count = r.uint<std::uint64_t>("array count");
  for (std::uint64_t a = 0; a < count; ++a) {
    std::string name = r.string(r.uint<std::uint32_t>("array name length"), "array name");
    Shape shape;
    shape.batch = r.uint<std::uint64_t>("array shape");
    shape.channels = r.uint<std::uint64_t>("array shape");
    shape.time = r.uint<std::uint64_t>("array shape");
    if (shape.batch == 0 || shape.channels == 0 || shape.time == 0 || shape.size() > (std::size_t{1} << 28)) {
      r.fail(fmt::format("array '{}' has invalid shape {}", name, shape.str()));
    }
    std::vector<double> values(shape.size());
    for (double& v : values) v = std::bit_cast<double>(r.uint<std::uint64_t>("array values"));
    if (arrays.count(name) != 0) r.fail(fmt::format("duplicate array '{}'", name));
    try {
      arrays.emplace(name, Tensor3(shape, std::move(values)));
    } catch (const std::exception& e) {
      r.fail(fmt::format("array '{}': {}", name, e.what()));
    }
    order.push_back(std::move(name));
  }
  char end[4];
  r.bytes(end, sizeof end, "end marker");
  if (std::memcmp(end, kEnd, sizeof end) != 0) r.fail("missing end marker");
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after end marker");

  auto take = [&](const std::string& name) -> std::optional<Tensor3> {
    auto it = arrays.find(name);
    if (it == arrays.end()) return std::nullopt;
    Tensor3 t = std::move(it->second);
    arrays.erase(it);
    return t;
  };
  auto require = [&](const std::string& name) {
    auto t = take(name);
    if (!t) r.fail(fmt::format("missing array '{}'", name));
    return std::move(*t);
  };

  // Parameter names and shapes come from rebuilding the topology.
  const Model reference(c.spec, 0);
  for (const Parameter* p : reference.parameters()) {
    Tensor3 t = require("param:" + p->name);
    if (t.shape() != p->value.shape()) {
      r.fail(fmt::format("parameter '{}' has shape {}, topology expects {}", p->name, t.shape().str(),
                         p->value.shape().str()));
    }
    c.param_names.push_back(p->name);
    c.params.push_back(std::move(t));
  }
  auto stats = [&](const char* prefix, ChannelStats& out) {
    auto mean = take(fmt::format("{}.mean", prefix));
    auto scale = take(fmt::format("{}.scale", prefix));
    if (!mean && !scale) return;
    if (!mean || !scale || mean->shape() != scale->shape()) r.fail(fmt::format("inconsistent {} statistics", prefix));
    out.mean.assign(mean->values().begin(), mean->values().end());
    out.scale.assign(scale->values().begin(), scale->values().end());
  };
  stats("norm", c.input_stats);
  stats("target", c.target_stats);
  if (!c.input_stats.empty() && c.input_stats.mean.size() != c.spec.input_channels) {
    r.fail("input statistics do not match the model's input channels");
  }

  try {
    const KeyValues st = KeyValues::parse(state_text, source + ":state");
    if (st.get_bool("state", false)) {
      TrainState s;
      s.next_epoch = st.get_size("next_epoch", 0);
      s.adam.step = st.get_u64("adam.step", 0);
      s.best_epoch = st.get_size("best_epoch", 0);
      s.rng_state = st.get_string("rng");
      const Tensor3 hyper = require("adam.hyper");
      if (hyper.size() != 3) r.fail("adam.hyper must hold 3 values");
      s.adam.beta1 = hyper.values()[0];
      s.adam.beta2 = hyper.values()[1];
      s.adam.epsilon = hyper.values()[2];
      for (std::size_t i = 0; i < c.params.size(); ++i) {
        auto m = take("adam.m:" + c.param_names[i]);
        auto v = take("adam.v:" + c.param_names[i]);
        if (!m && !v && i == 0) break;  // optimiser not stepped yet
        if (!m || !v) r.fail(fmt::format("missing optimiser moments for '{}'", c.param_names[i]));
        s.adam.m.push_back(std::move(*m));
        s.adam.v.push_back(std::move(*v));
      }
      for (std::size_t i = 0; i < c.params.size(); ++i) {
        auto b = take("best:" + c.param_names[i]);
        if (!b && i == 0) break;
        if (!b) r.fail(fmt::format("missing best-checkpoint array for '{}'", c.param_names[i]));
        s.best_params.push_back(std::move(*b));
      }
      if (auto bm = take("state.best_metric")) s.best_metric = bm->item();
      c.state = std::move(s);
    }
  } catch (const ConfigError& e) {
    r.fail(fmt::format("bad state block: {}", e.what()));
  }
  if (!arrays.empty()) r.fail(fmt::format("unexpected array '{}'", arrays.begin()->first));
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(fmt::format("{}: cannot open for writing", tmp));
    write_checkpoint(out, ckpt);
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw CheckpointError(fmt::format("{}: write failed", tmp));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(fmt::format("{}: cannot rename to {}: {}", tmp, path, ec.message()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("{}: cannot open", path));
  return read_checkpoint(in, path);
}

}  // namespace gres2net
