#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgmc {

/// Binary-labelled design matrix, columns normalized to zero mean and unit
/// (population) variance, with a trailing bias column of ones.
struct LabeledDataset {
  Eigen::MatrixXd features;  // n x d, bias column last when has_bias
  Eigen::VectorXd labels;    // entries in {-1, +1}
  std::string name;
  std::vector<std::size_t> dropped_columns;  // constant input columns, by input index
  bool has_bias = false;

  Eigen::Index instances() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

enum class Delimiter { comma, whitespace, automatic };

struct DatasetFormat {
  Delimiter delimiter = Delimiter::automatic;
  /// Zero-based column holding the label; negative counts from the end.
  int label_column = -1;
  bool skip_header = false;
  bool append_bias = true;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LabeledDataset load_dataset(const std::filesystem::path& path, const DatasetFormat& format = {});

/// Normalizes every column in place; constant columns are removed and their
/// indices returned.
std::vector<std::size_t> normalize_columns(Eigen::MatrixXd& features);

/// Deterministic synthetic logistic-regression data: features ~ N(0, I),
/// labels drawn from a logistic model with fixed coefficients. `dim`
/// counts the bias column.
LabeledDataset synthetic_logistic_dataset(int instances, int dim, unsigned long long seed);

}  // namespace mgmc
