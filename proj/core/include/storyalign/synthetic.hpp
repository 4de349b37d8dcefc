#pragma once

#include "storyalign/dataset.hpp"

namespace storyalign {

/// Seeded stand-in corpus.
///
/// Each story draws a latent vector z ~ N(0, I). Every sentence embedding is
/// normalize((z + noise_scale * e) * text_map) and every image embedding is
/// normalize((z + noise_scale * e) * image_map), with both mixing maps drawn
/// once per corpus from a standard normal and recorded in the manifest. Images
/// carry entity tags drawn from a per-story vocabulary plus a shared "news"
/// tag. The trailing `num_heldout` stories form the test split and every story
/// gets its full image list as ground_truth_set. Pure function of `cfg`.
Dataset generate_synthetic_corpus(const SyntheticGenConfig& cfg);

}  // namespace storyalign
