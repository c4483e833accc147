#pragma once

#include <filesystem>
#include <iosfwd>

#include "irispad/dataset.hpp"
#include "irispad/imaging.hpp"
#include "irispad/network.hpp"

namespace irispad {

// Everything needed to score raw images: architecture, label meaning,
// preprocessing and weights.
struct Model {
  NetConfig net;
  ClassGrouping grouping;
  ClaheParams clahe;
  ParamSet params;

  friend bool operator==(const Model&, const Model&) = default;
};

// Little-endian binary container:
//   "IRPADNET" u32 version
//   u32 input_size, f64 alpha, u32 n_classes, u8 pooling
//   u32 stem, u32 n_blocks, n_blocks x (u32 channels, u32 stride, u32 expansion)
//   str grouping name, 6 x u8 label (0xFF unmapped), u32 n, n x str label name
//   u32 tiles_x, u32 tiles_y, f64 clip_limit
//   u32 n_tensors, each: str name, u32 rank, rank x u64 extent, f64 values
// where str is u32 length + bytes.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const Model& model);
Model read_model(std::istream& in);  // Error(parse) on malformed input

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace irispad
