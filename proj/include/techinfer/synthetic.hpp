#ifndef TECHINFER_SYNTHETIC_HPP
#define TECHINFER_SYNTHETIC_HPP

#include <cstdint>

#include "techinfer/dataset.hpp"

namespace techinfer {

/// Planted block structure: entities and items are split into `groups`
/// contiguous blocks; an entity observes items of its own block with a
/// probability that decays across the block (so popularity is informative but
/// not sufficient), and every cell is additionally switched on with
/// probability `noise`.
struct PlantedConfig {
    std::size_t entities = 200;
    std::size_t items = 50;
    std::size_t groups = 2;
    double in_block_max = 0.6;
    double in_block_min = 0.15;
    double noise = 0.05;
    std::uint64_t seed = 0;
};

/// Report ids `r0001`.., technique ids `T1000`.. in catalog order. Every entity
/// receives at least two observations.
InteractionDataset make_planted_dataset(const PlantedConfig& config);

}  // namespace techinfer

#endif
