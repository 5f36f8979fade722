#include "hft/patch_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace hft {

Index TrainingSet::total_length() const {
  Index n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

Index TrainingSet::pair_count() const {
  Index n = 0;
  for (const auto& s : sequences) n += std::max<Index>(s.size() - 1, 0);
  return n;
}

Index TrainingSet::dim() const {
  for (const auto& s : sequences)
    if (!s.patches.empty()) return s.patches.front().dim();
  return 0;
}

// --- PGM -------------------------------------------------------------------

namespace {

class PgmHeaderReader {
public:
  PgmHeaderReader(const std::string& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = static_cast<unsigned char>(bytes_[pos_]);
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw FormatError(std::string("PGM ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PGM header: expected ") + field, start);
    return value;
  }

  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError("PGM header: expected whitespace before raster", pos_);
    ++pos_;
  }

private:
  const std::string& bytes_;
  std::size_t pos_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

Frame decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2) throw FormatError("PGM: truncated magic", bytes.size());
  if (bytes[0] != 'P' || bytes[1] != '5') {
    if (bytes[0] == 'P' && bytes[1] == '2')
      throw FormatError("PGM: ASCII (P2) format unsupported", 0);
    throw FormatError("PGM: unsupported magic", 0);
  }
  PgmHeaderReader hdr(bytes, 2);
  const long width = hdr.read_uint("width");
  const long height = hdr.read_uint("height");
  const std::size_t maxval_pos = hdr.pos();
  const long maxval = hdr.read_uint("maxval");
  if (width <= 0 || height <= 0) throw FormatError("PGM: zero dimension", maxval_pos);
  if (maxval != 255) throw FormatError("PGM: only maxval 255 supported", maxval_pos);
  hdr.expect_single_whitespace();
  const std::size_t start = hdr.pos();
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - start < need)
    throw FormatError("PGM: truncated raster, expected " + std::to_string(need) + " bytes",
                      bytes.size());

  Frame frame(static_cast<int>(width), static_cast<int>(height));
  for (long y = 0; y < height; ++y)
    for (long x = 0; x < width; ++x)
      frame.pixels(y, x) =
          static_cast<unsigned char>(bytes[start + static_cast<std::size_t>(y * width + x)]) / 255.0;
  return frame;
}

Frame load_frame(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

std::string encode_pgm(const Frame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
                    "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(frame.pixels.size()));
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) {
      const double v = std::clamp(frame.at(x, y), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  return out;
}

void save_frame(const Frame& frame, const std::filesystem::path& path) {
  write_file(path, encode_pgm(frame));
}

// --- box CSV ---------------------------------------------------------------

namespace {

double parse_double(std::string_view field, std::size_t line) {
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw FormatError("box CSV: bad number '" + std::string(field) + "' on line " + std::to_string(line),
                      line);
  return v;
}

}  // namespace

std::vector<Box> parse_box_csv(const std::string& text) {
  std::vector<Box> boxes;
  std::istringstream in(text);
  std::string row;
  std::size_t line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(row);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 5)
      throw FormatError("box CSV: expected 5 fields on line " + std::to_string(line), line);
    const double index = parse_double(fields[0], line);
    if (index != static_cast<double>(boxes.size()))
      throw FormatError("box CSV: frame_index out of sequence on line " + std::to_string(line), line);
    Box b{parse_double(fields[1], line), parse_double(fields[2], line), parse_double(fields[3], line),
          parse_double(fields[4], line)};
    if (b.w <= 0.0 || b.h <= 0.0)
      throw FormatError("box CSV: non-positive box size on line " + std::to_string(line), line);
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<Box> load_box_csv(const std::filesystem::path& path) {
  return parse_box_csv(read_file(path));
}

std::string format_box_csv(const std::vector<Box>& boxes) {
  std::string out;
  char buf[160];
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f,%.4f\n", i, b.x, b.y, b.w, b.h);
    out += buf;
  }
  return out;
}

void save_box_csv(const std::vector<Box>& boxes, const std::filesystem::path& path) {
  write_file(path, format_box_csv(boxes));
}

std::vector<Frame> load_frames_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(load_frame(f));
  return frames;
}

LabeledSequence load_sequence_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  const fs::path gt = dir / "gt.csv";
  if (!fs::exists(gt)) throw DataError("missing gt.csv in " + dir.string());

  LabeledSequence seq;
  seq.id = dir.filename().string();
  seq.frames = load_frames_dir(dir);
  seq.boxes = load_box_csv(gt);
  if (seq.boxes.size() != seq.frames.size())
    throw DataError(dir.string() + ": " + std::to_string(seq.frames.size()) + " frames but " +
                    std::to_string(seq.boxes.size()) + " boxes");
  return seq;
}

// --- patches ---------------------------------------------------------------

bool is_supported_patch_side(int side) { return side == 16 || side == 32; }

void normalize_patch_values(Eigen::Ref<Vector> values) {
  if (values.size() == 0) return;
  if (values.maxCoeff() == values.minCoeff()) {
    values.setZero();
    return;
  }
  const double mean = values.mean();
  values.array() -= mean;
  const double var = values.squaredNorm() / static_cast<double>(values.size());
  values /= std::sqrt(var);
}

Patch extract_patch(const Frame& frame, double center_x, double center_y, int side, double scale) {
  if (!is_supported_patch_side(side))
    throw ContractError("unsupported patch side " + std::to_string(side) + " (expected 16 or 32)");
  if (!(scale > 0.0)) throw ContractError("patch scale must be positive");
  const double window = side * scale;
  if (window > frame.width() || window > frame.height())
    throw ContractError("patch window " + std::to_string(window) + " exceeds frame " +
                        std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  double left = std::clamp(center_x - 0.5 * window, 0.0, frame.width() - window);
  double top = std::clamp(center_y - 0.5 * window, 0.0, frame.height() - window);
  if (scale == 1.0) {
    left = std::round(left);
    top = std::round(top);
  }

  Patch p;
  p.side = side;
  p.values.resize(side * side);
  for (int r = 0; r < side; ++r) {
    const int y = std::min(frame.height() - 1, static_cast<int>(std::floor(top + (r + 0.5) * scale)));
    for (int c = 0; c < side; ++c) {
      const int x = std::min(frame.width() - 1, static_cast<int>(std::floor(left + (c + 0.5) * scale)));
      p.values[r * side + c] = frame.at(x, y);
    }
  }
  normalize_patch_values(p.values);
  return p;
}

std::vector<GridCell> grid_cells(const Box& box, int side, int stride, int cells_x, int cells_y) {
  const double extent_x = (cells_x - 1) * stride + side;
  const double extent_y = (cells_y - 1) * stride + side;
  const double x0 = std::round(box.cx() - 0.5 * extent_x);
  const double y0 = std::round(box.cy() - 0.5 * extent_y);
  std::vector<GridCell> cells;
  cells.reserve(static_cast<std::size_t>(cells_x * cells_y));
  for (int gy = 0; gy < cells_y; ++gy)
    for (int gx = 0; gx < cells_x; ++gx)
      cells.push_back({static_cast<int>(x0) + gx * stride, static_cast<int>(y0) + gy * stride});
  return cells;
}

SampledTrainingSet sample_training_set(const std::vector<LabeledSequence>& sequences, int side,
                                       int stride) {
  if (!is_supported_patch_side(side))
    throw ContractError("unsupported patch side " + std::to_string(side));
  if (stride <= 0) throw ContractError("stride must be positive");

  SampledTrainingSet out;
  for (const auto& seq : sequences) {
    if (seq.frames.size() != seq.boxes.size())
      throw ContractError("sequence " + seq.id + ": frame/box count mismatch");
    if (seq.frames.empty()) continue;

    double min_w = seq.boxes.front().w, min_h = seq.boxes.front().h;
    for (const auto& b : seq.boxes) {
      min_w = std::min(min_w, b.w);
      min_h = std::min(min_h, b.h);
    }
    // Small tolerance so a box of exactly `side` pixels survives float noise.
    if (min_w + 1e-9 < side || min_h + 1e-9 < side) {
      ++out.skipped;
      continue;
    }
    const int cells_x = static_cast<int>(std::floor((min_w - side + 1e-9) / stride)) + 1;
    const int cells_y = static_cast<int>(std::floor((min_h - side + 1e-9) / stride)) + 1;
    const std::size_t n_cells = static_cast<std::size_t>(cells_x * cells_y);

    std::vector<PatchSequence> per_cell(n_cells);
    for (std::size_t k = 0; k < n_cells; ++k) {
      per_cell[k].sequence_id = seq.id + "#" + std::to_string(k);
      per_cell[k].patches.reserve(seq.frames.size());
    }
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      const auto cells = grid_cells(seq.boxes[t], side, stride, cells_x, cells_y);
      for (std::size_t k = 0; k < n_cells; ++k)
        per_cell[k].patches.push_back(extract_patch(seq.frames[t], cells[k].x + 0.5 * side,
                                                    cells[k].y + 0.5 * side, side));
    }
    for (auto& s : per_cell) out.set.sequences.push_back(std::move(s));
  }
  return out;
}

std::vector<int> sub_patch_offsets(int stride) {
  if (stride <= 0 || stride > 16) throw ContractError("sub-patch stride must be in [1, 16]");
  std::vector<int> offsets;
  for (int o = 0; o + 16 <= 32; o += stride) offsets.push_back(o);
  return offsets;
}

std::vector<Patch> sub_patches(const Patch& patch32, int stride) {
  if (patch32.side != 32 || patch32.dim() != 32 * 32)
    throw ContractError("sub_patches expects a 32x32 patch, got side " + std::to_string(patch32.side));
  const auto offsets = sub_patch_offsets(stride);
  std::vector<Patch> out;
  out.reserve(offsets.size() * offsets.size());
  for (int oy : offsets)
    for (int ox : offsets) {
      Patch p;
      p.side = 16;
      p.values.resize(256);
      for (int r = 0; r < 16; ++r)
        p.values.segment(r * 16, 16) = patch32.values.segment((oy + r) * 32 + ox, 16);
      normalize_patch_values(p.values);
      out.push_back(std::move(p));
    }
  return out;
}

TrainingSet split_sub_patches(const TrainingSet& patches32, int stride) {
  const std::size_t per_patch = sub_patch_offsets(stride).size() * sub_patch_offsets(stride).size();
  TrainingSet out;
  for (const auto& seq : patches32.sequences) {
    std::vector<PatchSequence> cells(per_patch);
    for (std::size_t k = 0; k < per_patch; ++k) cells[k].sequence_id = seq.sequence_id + "/" + std::to_string(k);
    for (const auto& p : seq.patches) {
      auto subs = sub_patches(p, stride);
      for (std::size_t k = 0; k < per_patch; ++k) cells[k].patches.push_back(std::move(subs[k]));
    }
    for (auto& c : cells)
      if (!c.patches.empty()) out.sequences.push_back(std::move(c));
  }
  return out;
}

}  // namespace hft
