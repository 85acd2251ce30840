#include "sdgf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    if (n > in_.size() - pos_) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint64_t u64() {
    auto b = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() { return std::string(bytes(u32())); }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string save_checkpoint(const SdgfModel& model, const RunConfig& run) {
  RunConfig resolved = run;
  store_model_config(resolved, model.config());

  Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(resolved.serialize());
  w.u32(static_cast<std::uint32_t>(model.config().branch_count()));
  const auto& params = model.parameters().all();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    const auto& v = p.var.value();
    w.u32(static_cast<std::uint32_t>(v.rank()));
    for (auto d : v.shape()) w.u64(d);
    for (double x : v.data()) w.f64(x);
  }
  const auto& adjacency = model.static_adjacency();
  w.u8(adjacency ? 1 : 0);
  if (adjacency) {
    w.u32(static_cast<std::uint32_t>(adjacency->dim(0)));
    for (double x : adjacency->data()) w.f64(x);
  }
  return w.take();
}

LoadedCheckpoint load_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError("not an SDGF checkpoint (bad magic)");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  RunConfig run;
  try {
    run = RunConfig::parse(r.str());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config block: ") + e.what());
  }
  ModelConfig mc;
  try {
    mc = model_config(run);
    mc.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint hyperparameters: ") + e.what());
  }
  SdgfModel model(mc);

  const auto branches = r.u32();
  if (branches != mc.branch_count()) {
    throw CheckpointError("checkpoint records " + std::to_string(branches) + " fusion branches, hyperparameters imply " +
                          std::to_string(mc.branch_count()));
  }
  const auto count = r.u32();
  if (count != model.parameters().size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " parameters, hyperparameters imply " +
                          std::to_string(model.parameters().size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    if (!model.parameters().contains(name)) throw CheckpointError("unexpected parameter '" + name + "'");
    auto& target = model.parameters().get(name).var.mutable_value();
    const auto rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != target.shape()) {
      throw CheckpointError("parameter '" + name + "' has shape " + to_string(shape) + ", expected " +
                            to_string(target.shape()));
    }
    for (auto& x : target.data()) x = r.f64();
  }
  if (r.u8()) {
    const std::size_t n = r.u32();
    Tensor a(Shape{n, n});
    for (auto& x : a.data()) x = r.f64();
    try {
      model.set_static_adjacency(std::move(a));
    } catch (const DimensionError& e) {
      throw CheckpointError(e.what());
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return LoadedCheckpoint{std::move(model), std::move(run)};
}

void save_checkpoint_file(const std::filesystem::path& path, const SdgfModel& model, const RunConfig& run) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const auto bytes = save_checkpoint(model, run);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

LoadedCheckpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_checkpoint(buf.str());
}

}  // namespace sdgf
