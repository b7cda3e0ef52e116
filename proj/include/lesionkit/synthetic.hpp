#pragma once

#include "lesionkit/aggregate.hpp"
#include "lesionkit/features.hpp"
#include "lesionkit/imaging.hpp"
#include "lesionkit/training.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lesionkit {

struct SyntheticParams
{
  std::size_t n = 2000;
  std::size_t d = kDescriptorSize;
  double noise_cls = 0.5; // label = 1[z1 + noise_cls * eta > 0]
  double noise_ann = 0.5; // annotation noise, in latent units
  std::uint64_t seed = 1;

  std::size_t latent_dim = 8;
  double feature_noise = 1.5;  // isotropic noise added to the embedding
  double label_loading = 0.5;  // share of z1 in the B and C annotations
  double student_coverage = 0.37;
  double student_color_coverage = 0.6; // of student-covered lesions
  double crowd_coverage = 0.5;
  std::size_t students_per_lesion = 3;
  std::size_t crowd_per_lesion = 2;

  //! Throws InputError on degenerate parameters (n < 50, d < 2, ...).
  void validate() const;
};

struct SyntheticDataset
{
  std::vector<std::string> lesion_ids;
  std::vector<int> labels;
  Eigen::MatrixXd latent;   // n x latent_dim
  Eigen::MatrixXd features; // n x d
  AnnotationTable annotations;
  FeatureMatrix matrix;

  TrainingData training_data() const { return { features, labels }; }
  std::vector<FeatureVector> feature_vectors() const;
};

//! Latent z ~ N(0, I); x = W z + feature_noise * eps; label from z1;
//! A tracks z1, B and C mix z1 with z2 and z3. Student values are clamped
//! to their rating scales; auto values are affine in the latent signal.
SyntheticDataset generate_synthetic(const SyntheticParams& params);

//! Renders a lesion whose shape and colors follow the latent row: z1 skews
//! the outline, z2 raises border ripple, z3 adds color bands.
std::pair<RasterImage, BinaryMask> render_synthetic_lesion(
  std::span<const double> latent,
  int size = 64);

} // namespace lesionkit
