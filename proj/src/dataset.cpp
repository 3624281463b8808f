#include "mgmc/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace mgmc {

namespace {

std::vector<std::string> split_fields(const std::string& line, Delimiter delimiter) {
  std::vector<std::string> fields;
  const bool comma = delimiter == Delimiter::comma ||
                     (delimiter == Delimiter::automatic && line.find(',') != std::string::npos);
  if (comma) {
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
  } else {
    std::istringstream in(line);
    std::string field;
    while (in >> field) fields.push_back(field);
  }
  return fields;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(t.c_str(), &end);
  return errno == 0 && end == t.c_str() + t.size() && std::isfinite(out);
}

}  // namespace

std::vector<std::size_t> normalize_columns(Eigen::MatrixXd& features) {
  std::vector<std::size_t> dropped;
  std::vector<Eigen::Index> kept;
  const double n = static_cast<double>(features.rows());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    auto col = features.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double var = col.squaredNorm() / n;
    if (!(var > 0) || std::sqrt(var) <= 1e-12 * std::max(1.0, std::abs(mean))) {
      dropped.push_back(static_cast<std::size_t>(j));
      continue;
    }
    col /= std::sqrt(var);
    // second pass removes the residual mean left by rounding
    col.array() -= col.mean();
    kept.push_back(j);
  }
  if (!dropped.empty()) {
    Eigen::MatrixXd compact(features.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) compact.col(static_cast<Eigen::Index>(k)) = features.col(kept[k]);
    features = std::move(compact);
  }
  return dropped;
}

LabeledDataset load_dataset(const std::filesystem::path& path, const DatasetFormat& format) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset '" + path.string() + "'");

  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = format.skip_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_fields(t, format.delimiter);
    if (fields.size() < 2) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": expected at least two fields");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    const int w = static_cast<int>(width);
    const int label_col = format.label_column < 0 ? w + format.label_column : format.label_column;
    if (label_col < 0 || label_col >= w) {
      throw DatasetError(path.string() + ": label column " + std::to_string(format.label_column) +
                         " out of range for " + std::to_string(width) + " fields");
    }
    std::vector<double> row;
    row.reserve(width - 1);
    for (int j = 0; j < w; ++j) {
      double v = 0;
      if (!parse_number(fields[static_cast<std::size_t>(j)], v)) {
        throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": field " +
                           std::to_string(j + 1) + " is not a finite number ('" +
                           trim(fields[static_cast<std::size_t>(j)]) + "')");
      }
      if (j == label_col) {
        if (v != 0 && v != 1 && v != -1) {
          throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                             ": label must be binary (0/1 or -1/+1), found " + trim(fields[static_cast<std::size_t>(j)]));
        }
        raw_labels.push_back(v);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DatasetError("dataset '" + path.string() + "' contains no instances");

  bool has_zero = false;
  bool has_minus = false;
  for (double v : raw_labels) {
    has_zero = has_zero || v == 0;
    has_minus = has_minus || v == -1;
  }
  if (has_zero && has_minus) {
    throw DatasetError(path.string() + ": labels mix 0 and -1; cannot map to {-1, +1}");
  }

  LabeledDataset data;
  data.name = path.stem().string();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(width - 1);
  Eigen::MatrixXd x(n, d);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    data.labels(i) = raw_labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  }
  data.dropped_columns = normalize_columns(x);
  if (format.append_bias) {
    x.conservativeResize(Eigen::NoChange, x.cols() + 1);
    x.col(x.cols() - 1).setOnes();
    data.has_bias = true;
  }
  data.features = std::move(x);
  return data;
}

LabeledDataset synthetic_logistic_dataset(int instances, int dim, unsigned long long seed) {
  if (instances < 1 || dim < 2) {
    throw std::invalid_argument("synthetic_logistic_dataset: need instances >= 1 and dim >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = dim - 1;
  Eigen::MatrixXd x(instances, d);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
  normalize_columns(x);

  // alternating-sign coefficients of decreasing size plus a small intercept
  Eigen::VectorXd beta(d);
  for (Eigen::Index j = 0; j < d; ++j) beta(j) = (j % 2 == 0 ? 1.0 : -1.0) * 1.5 / (1.0 + 0.5 * static_cast<double>(j));
  const double intercept = 0.3;

  LabeledDataset data;
  data.name = "synthetic" + std::to_string(dim);
  data.labels.resize(instances);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(beta) + intercept;
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    data.labels(i) = unif(rng) < prob ? 1.0 : -1.0;
  }
  x.conservativeResize(Eigen::NoChange, x.cols() + 1);
  x.col(x.cols() - 1).setOnes();
  data.features = std::move(x);
  data.has_bias = true;
  return data;
}

}  // namespace mgmc
