#pragma once

#include "lesionkit/dataset.hpp"
#include "lesionkit/imaging.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace lesionkit {

struct PaletteAnchor
{
  std::string name;
  std::array<std::uint8_t, 3> rgb;
};

//! Reference colors for the color count. Exactly six anchors.
struct ReferencePalette
{
  std::vector<PaletteAnchor> anchors;
  double tau = 0.05; // minimum pixel share for a color to count

  static ReferencePalette standard();
  //! `{ "anchors": {name: [r,g,b], ...}, "tau": 0.05 }`; `tau` optional.
  static ReferencePalette load(const std::filesystem::path& path);
  static ReferencePalette from_json(const std::string& text);

  void validate() const;
};

struct AutoScores
{
  double asymmetry = 0.0; // [0, 1]
  double border = 1.0;    // compactness, >= 1
  int color = 0;          // [0, 6]
  bool border_touches_edge = false;
};

inline constexpr const char* kAutoAnnotatorId = "auto:v1";

double score_asymmetry(const BinaryMask& mask);
double score_border(const BinaryMask& mask);
int score_color(const RasterImage& image,
                const BinaryMask& mask,
                const ReferencePalette& palette);

//! Scores one lesion: the largest mask component feeds all three scores.
AutoScores score_lesion(const RasterImage& image,
                        const BinaryMask& mask,
                        const ReferencePalette& palette);

//! sRGB (D65) to CIELAB.
std::array<double, 3> srgb_to_lab(std::array<std::uint8_t, 3> rgb);

struct BatchResult
{
  AnnotationTable table;             // sorted by lesion_id, then feature
  std::vector<Diagnostic> warnings;  // skipped lesions, edge-touching masks
  std::vector<Diagnostic> errors;    // per-lesion failures
};

//! Scores every lesion with a mask. `threads` = 0 picks the hardware count.
BatchResult annotate_batch(const DatasetManifest& manifest,
                           const ReferencePalette& palette,
                           unsigned threads = 1);

} // namespace lesionkit
