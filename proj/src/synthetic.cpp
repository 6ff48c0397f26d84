#include "techinfer/synthetic.hpp"

#include <cstdio>
#include <random>
#include <string>

#include "techinfer/error.hpp"

namespace techinfer {

InteractionDataset make_planted_dataset(const PlantedConfig& config) {
    if (config.groups == 0 || config.entities < config.groups || config.items < 2 * config.groups ||
        config.items > 9000) {
        throw Error(ErrorCode::InvalidArgument, "planted dataset shape is infeasible");
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<ReportId> entities;
    std::vector<TechniqueId> items;
    char buffer[32];
    for (std::size_t i = 0; i < config.entities; ++i) {
        std::snprintf(buffer, sizeof buffer, "r%04zu", i + 1);
        entities.emplace_back(buffer);
    }
    for (std::size_t j = 0; j < config.items; ++j) {
        std::snprintf(buffer, sizeof buffer, "T%04zu", 1000 + j);
        items.emplace_back(buffer);
    }

    const auto block_of = [](std::size_t index, std::size_t count, std::size_t groups) {
        return index * groups / count;
    };
    std::vector<std::size_t> position(config.items);
    std::vector<std::size_t> block_size(config.groups, 0);
    for (std::size_t j = 0; j < config.items; ++j) {
        position[j] = block_size[block_of(j, config.items, config.groups)]++;
    }

    std::vector<Observation> observations;
    for (std::size_t i = 0; i < config.entities; ++i) {
        const auto group = block_of(i, config.entities, config.groups);
        std::vector<std::size_t> own;
        const std::size_t row_start = observations.size();
        for (std::size_t j = 0; j < config.items; ++j) {
            const auto block = block_of(j, config.items, config.groups);
            bool on = unit(rng) < config.noise;
            if (block == group) {
                own.push_back(j);
                const double t = static_cast<double>(position[j]) / static_cast<double>(block_size[block] - 1);
                const double p = config.in_block_max + t * (config.in_block_min - config.in_block_max);
                on = on || unit(rng) < p;
            }
            if (on) {
                observations.push_back({i, j});
            }
        }
        // Top up sparse rows from the entity's own block.
        for (std::size_t j : own) {
            if (observations.size() - row_start >= 2) {
                break;
            }
            bool present = false;
            for (std::size_t k = row_start; k < observations.size(); ++k) {
                present = present || observations[k].item == j;
            }
            if (!present) {
                observations.push_back({i, j});
            }
        }
    }
    return InteractionDataset(std::move(entities), std::move(items), std::move(observations));
}

}  // namespace techinfer
