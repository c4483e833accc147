#include "irispad/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "irispad/error.hpp"

namespace irispad {

namespace {

constexpr char kMagic[8] = {'I', 'R', 'P', 'A', 'D', 'N', 'E', 'T'};
constexpr std::uint32_t kMaxCount = 1u << 28;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) fail("unexpected end of model file");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint32_t count() {
    const auto n = u32();
    if (n > kMaxCount) fail("implausible count in model file");
    return n;
  }
  std::string str() {
    std::string s(count(), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in_) fail("unexpected end of model file");
    return s;
  }

  [[noreturn]] static void fail(const std::string& msg) { throw Error(ErrorKind::parse, msg); }

 private:
  std::istream& in_;
};

}  // namespace

void write_model(std::ostream& out, const Model& model) {
  check_params(model.net, model.params);
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);

  w.u32(static_cast<std::uint32_t>(model.net.input_size));
  w.f64(model.net.alpha);
  w.u32(static_cast<std::uint32_t>(model.net.n_classes));
  w.u8(model.net.pooling == Pooling::global_max ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(model.net.base_channels.stem));
  w.u32(static_cast<std::uint32_t>(model.net.base_channels.blocks.size()));
  for (const auto& b : model.net.base_channels.blocks) {
    w.u32(static_cast<std::uint32_t>(b.channels));
    w.u32(static_cast<std::uint32_t>(b.stride));
    w.u32(static_cast<std::uint32_t>(b.expansion));
  }

  w.str(model.grouping.name);
  for (const auto& label : model.grouping.labels) w.u8(label ? static_cast<std::uint8_t>(*label) : 0xFF);
  w.u32(static_cast<std::uint32_t>(model.grouping.label_names.size()));
  for (const auto& name : model.grouping.label_names) w.str(name);

  w.u32(static_cast<std::uint32_t>(model.clahe.tiles_x));
  w.u32(static_cast<std::uint32_t>(model.clahe.tiles_y));
  w.f64(model.clahe.clip_limit);

  w.u32(static_cast<std::uint32_t>(model.params.size()));
  for (const auto& p : model.params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.u64(d);
    for (double v : p.value.values()) w.f64(v);
  }
  if (!out) throw Error(ErrorKind::io, "failed writing model");
}

Model read_model(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) Reader::fail("not a model file");
  Reader r(in);
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    Reader::fail("unsupported model format version " + std::to_string(version));
  }

  Model m;
  m.net.input_size = static_cast<int>(r.u32());
  m.net.alpha = r.f64();
  m.net.n_classes = static_cast<int>(r.u32());
  const auto pooling = r.u8();
  if (pooling > 1) Reader::fail("bad pooling code");
  m.net.pooling = pooling == 0 ? Pooling::global_max : Pooling::global_avg;
  m.net.base_channels.stem = static_cast<int>(r.u32());
  m.net.base_channels.blocks.resize(r.count());
  for (auto& b : m.net.base_channels.blocks) {
    b.channels = static_cast<int>(r.u32());
    b.stride = static_cast<int>(r.u32());
    b.expansion = static_cast<int>(r.u32());
  }
  try {
    validate(m.net);
  } catch (const Error& e) {
    Reader::fail(std::string("model config: ") + e.what());
  }

  m.grouping.name = r.str();
  for (auto& label : m.grouping.labels) {
    const auto v = r.u8();
    if (v != 0xFF) label = static_cast<int>(v);
  }
  m.grouping.label_names.resize(r.count());
  for (auto& name : m.grouping.label_names) name = r.str();
  m.grouping.n_classes = static_cast<int>(m.grouping.label_names.size());
  if (m.grouping.n_classes != m.net.n_classes) Reader::fail("grouping does not match the head size");
  for (const auto& label : m.grouping.labels) {
    if (label && *label >= m.grouping.n_classes) Reader::fail("grouping label out of range");
  }

  m.clahe.tiles_x = static_cast<int>(r.u32());
  m.clahe.tiles_y = static_cast<int>(r.u32());
  m.clahe.clip_limit = r.f64();

  const auto n = r.count();
  for (std::uint32_t i = 0; i < n; ++i) {
    Param p;
    p.name = r.str();
    std::vector<std::size_t> shape(r.count());
    for (auto& d : shape) {
      d = r.u64();
      if (d > kMaxCount) Reader::fail("implausible tensor extent");
    }
    const std::size_t total = element_count(shape);
    if (total > kMaxCount) Reader::fail("implausible tensor size");
    std::vector<double> data(total);
    for (auto& v : data) v = r.f64();
    try {
      p.value = Tensor(std::move(shape), std::move(data));
    } catch (const Error& e) {
      Reader::fail("tensor " + p.name + ": " + e.what());
    }
    m.params.push_back(std::move(p));
  }
  try {
    check_params(m.net, m.params);
  } catch (const Error& e) {
    Reader::fail(e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  write_model(out, model);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open model " + path.string());
  return read_model(in);
}

}  // namespace irispad
