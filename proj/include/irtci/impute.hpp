#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "irtci/data.hpp"
#include "irtci/estimation.hpp"

namespace irtci {

struct CellIndex {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct CellImputation {
  int code = 0;
  Eigen::VectorXd probabilities;
};

struct ImputedDataset {
  CategoricalDataset completed;
  std::vector<CellIndex> mask;                 ///< row-major order
  std::vector<Eigen::VectorXd> probabilities;  ///< parallel to mask
  std::vector<ThetaEstimate> theta;            ///< one per case
};

/// 1 when p1 >= 0.5, else 0.
int impute_binary_cell(double p1);

/// Argmax of the item's category vector at theta; exact ties go to the
/// lowest code (binary items follow impute_binary_cell).
CellImputation impute_cell(double theta, const ItemModel& item);

/// Scores every case by EAP from its observed feature cells and fills each of
/// its missing feature cells from that single theta. Rows with no observed
/// feature cell use theta = 0. Columns not bound to an item (ids, excluded
/// outcomes, continuous features) are passed through unchanged.
ImputedDataset impute_dataset(const CategoricalDataset& data, const FittedModel& model);

/// One row per imputed cell: case, column, imputed label, p_0..p_{M-1}.
std::string format_probability_sidecar(const ImputedDataset& imputed);
void write_probability_sidecar(const ImputedDataset& imputed, const std::filesystem::path& path);

}  // namespace irtci
