#include "pcfgsr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pcfgsr/rng.hpp"

namespace pcfgsr {

void Dataset::check() const {
  if (!feature_names.empty() && feature_names.size() != columns.size())
    throw std::invalid_argument("feature name count does not match column count");
  for (const auto& col : columns) {
    if (col.size() != target.size()) throw std::invalid_argument("column length does not match target");
    for (double v : col)
      if (std::isnan(v)) throw std::invalid_argument("NaN in dataset inputs");
  }
  for (double v : target)
    if (std::isnan(v)) throw std::invalid_argument("NaN in dataset target");
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices, std::string split_name) const {
  Dataset out;
  out.feature_names = feature_names;
  out.split = std::move(split_name);
  out.columns.resize(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.columns[j].reserve(row_indices.size());
    for (auto i : row_indices) out.columns[j].push_back(columns[j].at(i));
  }
  out.target.reserve(row_indices.size());
  for (auto i : row_indices) out.target.push_back(target.at(i));
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, bool comma) {
  std::vector<std::string> out;
  if (comma) {
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) out.push_back(field);
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

}  // namespace

Dataset read_table(const std::string& path, const std::string& target,
                   const std::vector<std::string>& column_names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw std::runtime_error(path + ": empty table");

  const bool comma = lines.front().find(',') != std::string::npos;
  auto first = split_fields(lines.front(), comma);
  bool header = true;
  if (!comma) {
    header = !std::all_of(first.begin(), first.end(), [](const std::string& f) {
      double v;
      return parse_double(f, v);
    });
  }

  std::vector<std::string> names;
  std::size_t body_start = 0;
  if (header) {
    names = first;
    body_start = 1;
  } else if (!column_names.empty()) {
    names = column_names;
  } else {
    for (std::size_t j = 0; j + 1 < first.size(); ++j) names.push_back("x" + std::to_string(j + 1));
    names.emplace_back("y");
  }
  if (names.size() < 2) throw std::runtime_error(path + ": need at least one feature and a target");

  std::size_t target_col = names.size() - 1;
  if (!target.empty()) {
    const auto it = std::find(names.begin(), names.end(), target);
    if (it == names.end()) throw std::runtime_error(path + ": missing target column '" + target + "'");
    target_col = static_cast<std::size_t>(it - names.begin());
  }

  Dataset d;
  for (std::size_t j = 0; j < names.size(); ++j)
    if (j != target_col) d.feature_names.push_back(names[j]);
  d.columns.resize(names.size() - 1);

  for (std::size_t i = body_start; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i], comma);
    if (fields.size() != names.size())
      throw std::runtime_error(path + ": malformed row " + std::to_string(i + 1) + " (expected " +
                               std::to_string(names.size()) + " fields, got " +
                               std::to_string(fields.size()) + ")");
    std::size_t col = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      if (!parse_double(fields[j], v))
        throw std::runtime_error(path + ": malformed value '" + fields[j] + "' on row " +
                                 std::to_string(i + 1));
      if (j == target_col)
        d.target.push_back(v);
      else
        d.columns[col++].push_back(v);
    }
  }
  d.check();
  return d;
}

TrainTestSplit split_dataset(const Dataset& all, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw std::invalid_argument("train fraction must be in (0, 1]");
  std::vector<std::size_t> order(all.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(all.rows())));
  TrainTestSplit out;
  out.train = all.subset(std::span(order).first(n_train), "train");
  out.test = all.subset(std::span(order).subspan(n_train), "test");
  if (out.test.rows() == 0) out.warnings.emplace_back("test split is empty");
  return out;
}

TrainTestSplit load_csv(const std::string& path, const std::string& target, double train_fraction,
                        std::uint64_t seed, const std::vector<std::string>& column_names) {
  return split_dataset(read_table(path, target, column_names), train_fraction, seed);
}

void write_csv(const std::string& path, const Dataset& d, const std::string& target_name) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t j = 0; j < d.width(); ++j)
    out << (j < d.feature_names.size() ? d.feature_names[j] : "x" + std::to_string(j + 1)) << ',';
  out << target_name << '\n';
  char buf[32];
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.width(); ++j) {
      put(d.columns[j][i]);
      out << ',';
    }
    put(d.target[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

const std::vector<std::string>& airfoil_columns() {
  static const std::vector<std::string> names{"f", "alpha", "c", "U_infinity", "delta", "SSPL"};
  return names;
}

}  // namespace pcfgsr
