#include "scate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "scate/error.hpp"
#include "scate/rng.hpp"

namespace scate {

std::string_view to_string(Task task) {
  return task == Task::Regression ? "regression" : "classification";
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::Regression;
  if (name == "classification" || name == "binary") return Task::BinaryClassification;
  throw Error(ErrorCode::Config, "unknown task '" + std::string(name) + "'");
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.task = task;
  out.feature_names = feature_names;
  out.column_kinds = column_kinds;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.target(static_cast<Eigen::Index>(i)) = target(rows[i]);
  }
  return out;
}

namespace {

using Record = std::vector<std::string>;

// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
std::vector<Record> read_records(std::string_view text) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(current.size() == 1 && current[0].empty())) records.push_back(std::move(current));
    current.clear();
    ++line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw Error(ErrorCode::ParseError, "stray quote on line " + std::to_string(line));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseError, "unterminated quoted field");
  if (field_started || !field.empty() || !current.empty()) end_record();
  // Strip a UTF-8 byte order mark from the header.
  if (!records.empty() && !records[0].empty() && records[0][0].rfind("\xEF\xBB\xBF", 0) == 0) {
    records[0][0].erase(0, 3);
  }
  return records;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view cell) {
  cell = trim(cell);
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?";
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

Dataset parse_csv(std::string_view text, const std::string& target_column, Task task) {
  auto records = read_records(text);
  if (records.empty()) throw Error(ErrorCode::EmptyAfterCleaning, "no header row");
  const Record header = records.front();
  const auto width = header.size();

  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) throw Error(ErrorCode::MissingColumn, target_column);
  const auto target_idx = static_cast<std::size_t>(target_it - header.begin());

  std::vector<const Record*> kept;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " has " +
                                             std::to_string(records[r].size()) + " fields, expected " +
                                             std::to_string(width));
    }
    if (std::none_of(records[r].begin(), records[r].end(),
                     [](const std::string& c) { return is_missing(c); })) {
      kept.push_back(&records[r]);
    }
  }
  if (kept.size() < 2) throw Error(ErrorCode::EmptyAfterCleaning, "fewer than 2 complete rows");

  Dataset out;
  out.task = task;
  const auto n = static_cast<Eigen::Index>(kept.size());

  struct Encoded {
    std::size_t column;
    ColumnKind kind;
    std::vector<std::string> categories;
  };
  std::vector<Encoded> plan;
  std::size_t encoded_width = 0;
  for (std::size_t c = 0; c < width; ++c) {
    if (c == target_idx) continue;
    bool numeric = true;
    for (const Record* rec : kept) {
      if (!parse_number((*rec)[c])) {
        numeric = false;
        break;
      }
    }
    Encoded e{c, numeric ? ColumnKind::Numeric : ColumnKind::Categorical, {}};
    if (!numeric) {
      std::set<std::string> cats;
      for (const Record* rec : kept) cats.emplace(trim((*rec)[c]));
      e.categories.assign(cats.begin(), cats.end());
      encoded_width += e.categories.size();
    } else {
      encoded_width += 1;
    }
    out.column_kinds.push_back(e.kind);
    plan.push_back(std::move(e));
  }

  out.features = Matrix::Zero(n, static_cast<Eigen::Index>(encoded_width));
  Eigen::Index col = 0;
  for (const auto& e : plan) {
    if (e.kind == ColumnKind::Numeric) {
      out.feature_names.push_back(header[e.column]);
      for (Eigen::Index i = 0; i < n; ++i) out.features(i, col) = *parse_number((*kept[i])[e.column]);
      ++col;
      continue;
    }
    for (const auto& cat : e.categories) out.feature_names.push_back(header[e.column] + "=" + cat);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string_view cell = trim((*kept[i])[e.column]);
      const auto pos = std::lower_bound(e.categories.begin(), e.categories.end(), cell) -
                       e.categories.begin();
      out.features(i, col + pos) = 1.0;
    }
    col += static_cast<Eigen::Index>(e.categories.size());
  }

  out.target.resize(n);
  if (task == Task::Regression) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto v = parse_number((*kept[i])[target_idx]);
      if (!v) {
        throw Error(ErrorCode::ParseError, "non-numeric target at data row " + std::to_string(i + 1) +
                                               ", column " + std::to_string(target_idx));
      }
      out.target(i) = *v;
    }
  } else {
    std::set<std::string> labels;
    for (const Record* rec : kept) labels.emplace(trim((*rec)[target_idx]));
    if (labels.size() != 2) {
      throw Error(ErrorCode::NonBinaryLabels, std::to_string(labels.size()) + " distinct labels");
    }
    const std::string positive = *labels.rbegin();
    for (Eigen::Index i = 0; i < n; ++i) {
      out.target(i) = trim((*kept[i])[target_idx]) == positive ? 1.0 : 0.0;
    }
  }
  if (out.features.cols() < 1) throw Error(ErrorCode::EmptyAfterCleaning, "no feature columns");
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column, Task task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), target_column, task);
}

void write_csv(const Dataset& data, const std::filesystem::path& path, const std::string& target_name) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (int j = 0; j < data.dims(); ++j) {
    const std::string name = j < static_cast<int>(data.feature_names.size())
                                 ? data.feature_names[j]
                                 : "x" + std::to_string(j + 1);
    out << quote(name) << ',';
  }
  out << quote(target_name) << '\n';
  out.precision(17);
  for (int i = 0; i < data.rows(); ++i) {
    for (int j = 0; j < data.dims(); ++j) out << data.features(i, j) << ',';
    out << data.target(i) << '\n';
  }
}

SplitIndices split(int n, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidRatios, "ratios must be positive and sum to 1");
  }
  if (n < 3) throw Error(ErrorCode::TooFewRows, "split needs at least 3 rows");

  const int n_val = static_cast<int>(std::floor(n * ratios.validation));
  const int n_test = static_cast<int>(std::floor(n * ratios.test));
  const int n_train = n - n_val - n_test;

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  SplitIndices out;
  out.seed = seed;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.validation.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  out.test.assign(perm.begin() + n_train + n_val, perm.end());
  return out;
}

double friedman1_response(std::span<const double> x) {
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
         10.0 * x[3] + 5.0 * x[4];
}

Dataset gen_friedman1(int n, int d, double noise_sd, std::uint64_t seed) {
  if (d < 5) throw Error(ErrorCode::DimensionTooSmall, "Friedman #1 needs d >= 5");
  if (n < 1) throw Error(ErrorCode::TooFewRows, "n must be positive");
  Rng rng(seed);
  Dataset out;
  out.task = Task::Regression;
  out.features.resize(n, d);
  out.target.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.features(i, j) = rng.uniform();
  }
  for (int i = 0; i < n; ++i) {
    const double* row = out.features.row(i).data();
    out.target(i) = friedman1_response({row, static_cast<std::size_t>(d)});
    if (noise_sd > 0) out.target(i) += noise_sd * rng.normal();
  }
  for (int j = 0; j < d; ++j) {
    out.feature_names.push_back("x" + std::to_string(j + 1));
    out.column_kinds.push_back(ColumnKind::Numeric);
  }
  return out;
}

ScalingStats fit_scaling(const Matrix& features) {
  const auto n = features.rows();
  ScalingStats stats;
  stats.mean = features.colwise().mean().transpose();
  stats.std.resize(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double var = (features.col(j).array() - stats.mean(j)).square().sum() / static_cast<double>(n);
    stats.std(j) = std::sqrt(var);
  }
  return stats;
}

Matrix apply_scaling(const Matrix& features, const ScalingStats& stats) {
  if (features.cols() != stats.mean.size() || features.cols() != stats.std.size()) {
    throw Error(ErrorCode::ColumnMismatch, "scaling stats have " + std::to_string(stats.mean.size()) +
                                               " columns, matrix has " + std::to_string(features.cols()));
  }
  Matrix out = features;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    if (stats.std(j) == 0.0) continue;
    out.col(j) = (features.col(j).array() - stats.mean(j)) / stats.std(j);
  }
  return out;
}

std::pair<Matrix, ScalingStats> standardize(const Matrix& features,
                                            const std::optional<ScalingStats>& stats) {
  ScalingStats s = stats ? *stats : fit_scaling(features);
  Matrix out = apply_scaling(features, s);
  return {std::move(out), std::move(s)};
}

}  // namespace scate
