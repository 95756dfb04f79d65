#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pcfgsr {

// Column-major feature matrix plus target.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> columns;
  std::vector<double> target;
  std::string split = "train";

  std::size_t rows() const { return columns.empty() ? target.size() : columns.front().size(); }
  std::size_t width() const { return columns.size(); }
  std::span<const double> column(std::size_t j) const { return columns.at(j); }

  // Throws std::invalid_argument when shapes disagree or inputs are NaN.
  void check() const;

  Dataset subset(std::span<const std::size_t> row_indices, std::string split_name) const;
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<std::string> warnings;
};

// Reads a delimited table. Comma-separated files need a header row;
// whitespace-separated files without a header get `column_names` (or
// x1..xn, y). The target defaults to the last column.
Dataset read_table(const std::string& path, const std::string& target = {},
                   const std::vector<std::string>& column_names = {});

// Seeded row shuffle, then the first floor(fraction * rows) rows train.
TrainTestSplit split_dataset(const Dataset& all, double train_fraction, std::uint64_t seed);

TrainTestSplit load_csv(const std::string& path, const std::string& target, double train_fraction,
                        std::uint64_t seed, const std::vector<std::string>& column_names = {});

void write_csv(const std::string& path, const Dataset& d, const std::string& target_name = "y");

// Column names of the airfoil self-noise data, target last.
const std::vector<std::string>& airfoil_columns();

}  // namespace pcfgsr
