// HFTM model file.
//
//   "HFTM" u8 version(=1)
//   section*: tag[4] u32 payload_bytes payload
//     "L1EN" / "L2EN": u32 rows, u32 cols, f64 weights[rows*cols] (row-major),
//                      u32 pool_in, u32 pool_out, f64 eps_sqrt
//     "WHIT": u32 in_dim, u32 out_dim, f64 eps_reg, f64 mean[in_dim],
//             f64 projection[out_dim*in_dim] (row-major), f64 eigenvalues[out_dim]
//     "GEOM": u32 sub_patch_stride
//     "META": u32 count, then count x (u32 bytes, UTF-8 "key=value")
//     "END ": empty
// Integers are 32-bit little-endian, floats IEEE-754 64-bit little-endian.

#include "hft/hierarchy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace hft {

namespace {

constexpr char kMagic[4] = {'H', 'F', 'T', 'M'};
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
  void dim(Index v) {
    if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw ContractError("dimension does not fit in u32");
    u32(static_cast<std::uint32_t>(v));
  }
  std::string& str() { return out_; }

private:
  std::string out_;
};

class Reader {
public:
  Reader(const std::string& bytes, std::size_t begin, std::size_t end) : b_(bytes), pos_(begin), end_(end) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == end_; }

  void need(std::size_t n, const char* field) const {
    if (end_ - pos_ < n) throw FormatError(std::string("model file truncated reading ") + field, pos_);
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const char* field) {
    need(8, field);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    const double v = std::bit_cast<double>(bits);
    if (!std::isfinite(v)) throw FormatError(std::string("non-finite value in ") + field, pos_);
    pos_ += 8;
    return v;
  }
  std::string text(std::size_t n, const char* field) {
    need(n, field);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }

private:
  const std::string& b_;
  std::size_t pos_;
  std::size_t end_;
};

void write_section(Writer& w, const char (&tag)[5], const std::string& payload) {
  w.bytes(tag, 4);
  if (payload.size() > UINT32_MAX) throw ContractError("model section too large");
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload.data(), payload.size());
}

std::string encoder_payload(const LayerEncoder& enc) {
  Writer w;
  const Matrix& m = enc.weights();
  w.dim(m.rows());
  w.dim(m.cols());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  w.dim(enc.pooling.input_dim);
  w.dim(enc.pooling.output_dim());
  w.f64(enc.eps_sqrt);
  return std::move(w.str());
}

LayerEncoder read_encoder(Reader& r, const std::string& tag) {
  const std::string rows_f = tag + ".rows";
  const std::uint32_t rows = r.u32(rows_f.c_str());
  const std::uint32_t cols = r.u32((tag + ".cols").c_str());
  const std::string wf = tag + ".weights";
  r.need(std::size_t{8} * rows * cols, wf.c_str());
  Matrix m(rows, cols);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64(wf.c_str());
  const std::size_t pool_at = r.pos();
  const std::uint32_t pool_in = r.u32((tag + ".pool_in").c_str());
  const std::uint32_t pool_out = r.u32((tag + ".pool_out").c_str());
  if (pool_in != rows || pool_out * 2 != pool_in)
    throw FormatError(tag + ".pooling dims inconsistent with weights", pool_at);
  const double eps = r.f64((tag + ".eps_sqrt").c_str());
  if (rows < 2 || rows % 2 != 0) throw FormatError(tag + ".rows must be even and >= 2", pool_at);
  return LayerEncoder(FeatureTransform(std::move(m)), eps);
}

std::string whitening_payload(const WhiteningTransform& t) {
  Writer w;
  w.dim(t.input_dim());
  w.dim(t.output_dim());
  w.f64(t.eps_reg);
  for (Index i = 0; i < t.mean.size(); ++i) w.f64(t.mean(i));
  for (Index r = 0; r < t.projection.rows(); ++r)
    for (Index c = 0; c < t.projection.cols(); ++c) w.f64(t.projection(r, c));
  for (Index i = 0; i < t.eigenvalues.size(); ++i) w.f64(t.eigenvalues(i));
  return std::move(w.str());
}

WhiteningTransform read_whitening(Reader& r) {
  WhiteningTransform t;
  const std::uint32_t in = r.u32("whitening.in_dim");
  const std::uint32_t out = r.u32("whitening.out_dim");
  t.eps_reg = r.f64("whitening.eps_reg");
  r.need(std::size_t{8} * (in + std::size_t{out} * in + out), "whitening.arrays");
  t.mean.resize(in);
  for (Index i = 0; i < t.mean.size(); ++i) t.mean(i) = r.f64("whitening.mean");
  t.projection.resize(out, in);
  for (Index i = 0; i < t.projection.rows(); ++i)
    for (Index j = 0; j < t.projection.cols(); ++j) t.projection(i, j) = r.f64("whitening.projection");
  t.eigenvalues.resize(out);
  for (Index i = 0; i < t.eigenvalues.size(); ++i) t.eigenvalues(i) = r.f64("whitening.eigenvalues");
  return t;
}

}  // namespace

std::string serialize_model(const HierarchicalModel& model) {
  model.validate();
  Writer w;
  w.bytes(kMagic, 4);
  w.bytes(&kVersion, 1);
  write_section(w, "L1EN", encoder_payload(model.layer1));
  write_section(w, "WHIT", whitening_payload(model.whitening));
  write_section(w, "L2EN", encoder_payload(model.layer2));
  {
    Writer g;
    g.u32(static_cast<std::uint32_t>(model.sub_patch_stride));
    write_section(w, "GEOM", g.str());
  }
  {
    Writer m;
    m.dim(static_cast<Index>(model.metadata.size()));
    for (const auto& [k, v] : model.metadata) {
      if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
          v.find('\n') != std::string::npos)
        throw ContractError("metadata key/value contains a reserved character: " + k);
      const std::string line = k + "=" + v;
      m.dim(static_cast<Index>(line.size()));
      m.bytes(line.data(), line.size());
    }
    write_section(w, "META", m.str());
  }
  write_section(w, "END ", "");
  return std::move(w.str());
}

HierarchicalModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < 5) throw FormatError("model file truncated in header", bytes.size());
  for (std::size_t i = 0; i < 4; ++i)
    if (bytes[i] != kMagic[i]) throw FormatError("bad model magic", i);
  if (static_cast<std::uint8_t>(bytes[4]) != kVersion)
    throw FormatError("unsupported model version " + std::to_string(static_cast<unsigned char>(bytes[4])), 4);

  HierarchicalModel model;
  std::set<std::string> seen;
  std::size_t pos = 5;
  bool ended = false;
  while (!ended) {
    if (bytes.size() - pos < 8) throw FormatError("model file truncated at section header", pos);
    const std::string tag = bytes.substr(pos, 4);
    Reader hdr(bytes, pos + 4, pos + 8);
    const std::uint32_t len = hdr.u32("section.length");
    const std::size_t body = pos + 8;
    if (bytes.size() - body < len) throw FormatError("model section " + tag + " truncated", body);
    if (!seen.insert(tag).second) throw FormatError("duplicate model section " + tag, pos);
    Reader r(bytes, body, body + len);
    if (tag == "L1EN") {
      model.layer1 = read_encoder(r, "layer1");
    } else if (tag == "L2EN") {
      model.layer2 = read_encoder(r, "layer2");
    } else if (tag == "WHIT") {
      model.whitening = read_whitening(r);
    } else if (tag == "GEOM") {
      const std::size_t at = r.pos();
      const std::uint32_t stride = r.u32("geometry.sub_patch_stride");
      if (stride == 0 || stride > 16) throw FormatError("geometry.sub_patch_stride out of range", at);
      model.sub_patch_stride = static_cast<int>(stride);
    } else if (tag == "META") {
      const std::uint32_t count = r.u32("metadata.count");
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t at = r.pos();
        const std::uint32_t n = r.u32("metadata.length");
        const std::string line = r.text(n, "metadata.entry");
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("metadata entry without '='", at);
        model.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
      }
    } else if (tag == "END ") {
      ended = true;
    } else {
      throw FormatError("unknown model section '" + tag + "'", pos);
    }
    if (!r.done()) throw FormatError("model section " + tag + " has trailing bytes", r.pos());
    pos = body + len;
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after model END section", pos);
  for (const char* required : {"L1EN", "WHIT", "L2EN", "GEOM", "META"})
    if (!seen.count(required)) throw FormatError(std::string("model section ") + required + " missing", pos);
  try {
    model.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("inconsistent model: ") + e.what(), 5);
  }
  return model;
}

void save_model(const HierarchicalModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

HierarchicalModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_model(bytes);
}

}  // namespace hft
