#pragma once

#include "hft/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hft {

// Grayscale frame, intensities in [0, 1]. pixels(row, col).
struct Frame {
  RowMatrix pixels;

  Frame() = default;
  Frame(int width, int height) : pixels(RowMatrix::Zero(height, width)) {}
  explicit Frame(RowMatrix p) : pixels(std::move(p)) {}

  int width() const { return static_cast<int>(pixels.cols()); }
  int height() const { return static_cast<int>(pixels.rows()); }
  double at(int x, int y) const { return pixels(y, x); }
  double& at(int x, int y) { return pixels(y, x); }
};

// Square patch, row-major, zero-mean and unit-variance (or all zeros when the
// source window was constant).
struct Patch {
  int side = 0;
  Vector values;

  Index dim() const { return values.size(); }
};

struct PatchSequence {
  std::vector<Patch> patches;
  std::string sequence_id;

  Index size() const { return static_cast<Index>(patches.size()); }
};

struct TrainingSet {
  std::vector<PatchSequence> sequences;

  // Total number of patches over all sequences.
  Index total_length() const;
  // Number of consecutive (within-sequence) pairs.
  Index pair_count() const;
  bool empty() const { return total_length() == 0; }
  // Patch dimension, or 0 for an empty set.
  Index dim() const;
};

// Frames and per-frame track boxes of one labelled video.
struct LabeledSequence {
  std::vector<Frame> frames;
  std::vector<Box> boxes;
  std::string id;
};

struct SampledTrainingSet {
  TrainingSet set;
  // Sequences whose track box was smaller than the patch side at some frame.
  int skipped = 0;
};

// --- frame IO -------------------------------------------------------------

// Decodes a binary 8-bit PGM (P5). Throws FormatError naming the byte offset.
Frame decode_pgm(const std::string& bytes);
Frame load_frame(const std::filesystem::path& path);

std::string encode_pgm(const Frame& frame);
void save_frame(const Frame& frame, const std::filesystem::path& path);

// --- box CSV ---------------------------------------------------------------

// `frame_index,x,y,w,h` per line, no header. Frame indices must run 0,1,2,...
// FormatError offsets are 1-based line numbers.
std::vector<Box> parse_box_csv(const std::string& text);
std::vector<Box> load_box_csv(const std::filesystem::path& path);
std::string format_box_csv(const std::vector<Box>& boxes);
void save_box_csv(const std::vector<Box>& boxes, const std::filesystem::path& path);

// Every *.pgm in `dir`, sorted by file name.
std::vector<Frame> load_frames_dir(const std::filesystem::path& dir);

// Loads every *.pgm in `dir` (sorted by file name) plus `dir/gt.csv`.
LabeledSequence load_sequence_dir(const std::filesystem::path& dir);

// --- patches ---------------------------------------------------------------

bool is_supported_patch_side(int side);

// In-place zero-mean/unit-variance normalization; constant input becomes zeros.
void normalize_patch_values(Eigen::Ref<Vector> values);

// Cuts a side x side patch centred on `center`. With scale != 1 the window is
// (side*scale)^2 pixels, resampled nearest-neighbour. The window is shifted to
// lie inside the frame; if it cannot fit, ContractError is thrown.
Patch extract_patch(const Frame& frame, double center_x, double center_y, int side,
                    double scale = 1.0);

// Top-left pixels of a cells_x x cells_y stride grid centred in `box`,
// row-major. The same offsets relative to the box centre are used every frame.
struct GridCell {
  int x = 0;
  int y = 0;
};
std::vector<GridCell> grid_cells(const Box& box, int side, int stride, int cells_x, int cells_y);

SampledTrainingSet sample_training_set(const std::vector<LabeledSequence>& sequences, int side,
                                       int stride);

// Offsets (per axis) of 16x16 sub-patches inside a 32x32 patch.
std::vector<int> sub_patch_offsets(int stride);

// Normalized 16x16 sub-patches of a 32x32 patch, row-major over the grid.
std::vector<Patch> sub_patches(const Patch& patch32, int stride);

// Splits each side-32 patch into normalized side-16 sub-patches on a stride
// grid; sub-patch k of every frame becomes sequence k (per input sequence).
TrainingSet split_sub_patches(const TrainingSet& patches32, int stride);

}  // namespace hft
