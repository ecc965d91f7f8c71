#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "irtci/data.hpp"
#include "irtci/models.hpp"

namespace irtci {

/// Random item bank: slopes U[0.8, 2], thresholds / intercepts U[-2, 2].
/// GRM thresholds are sorted and redrawn until adjacent gaps are >= 0.25 so
/// that every category keeps visible mass.
std::vector<ItemModel> random_items(ItemFamily family, int count, int categories, std::uint64_t seed,
                                    std::string_view prefix = "item");

struct SimulatedData {
  CategoricalDataset data;
  Eigen::VectorXd theta;
};

/// Draws theta ~ N(0, 1) per case and one response per item. With
/// `with_outcome`, appends a continuous column "outcome" (role=excluded)
/// equal to theta plus unit noise.
SimulatedData simulate(std::span<const ItemModel> items, Eigen::Index cases, std::uint64_t seed,
                       bool with_outcome = false);

/// Column schema matching an item (labels "0".."m-1").
ColumnSchema schema_for(const ItemModel& item);

}  // namespace irtci
