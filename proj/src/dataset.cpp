#include "mmsi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "mmsi/csv.hpp"
#include "mmsi/error.hpp"

namespace mmsi {

Dataset::Dataset(std::array<std::string, 2> levels, Eigen::VectorXi treatment)
    : levels_(std::move(levels)), treatment_(std::move(treatment)) {
  if (levels_[0] == levels_[1])
    throw Error(ErrorCode::InvalidArgument, "treatment levels must differ");
  bool seen[2] = {false, false};
  for (Index i = 0; i < treatment_.size(); ++i) {
    const int t = treatment_(i);
    if (t != 0 && t != 1)
      throw Error(ErrorCode::InvalidArgument, "treatment codes must be 0 or 1");
    seen[t] = true;
  }
  if (!seen[0] || !seen[1])
    throw Error(ErrorCode::InvalidArgument, "each treatment level needs at least one subject");
}

void Dataset::add_subgroup(const std::string& name, Eigen::VectorXd flags) {
  if (flags.size() != size())
    throw Error(ErrorCode::MismatchedSubjectAxis, "subgroup '" + name + "' has wrong length");
  for (Index i = 0; i < flags.size(); ++i)
    if (!std::isnan(flags(i)) && flags(i) != 0.0 && flags(i) != 1.0)
      throw Error(ErrorCode::Schema, "subgroup '" + name + "' row " + std::to_string(i) +
                                         " is not 0/1");
  if (!has_subgroup(name)) subgroup_order_.push_back(name);
  subgroups_[name] = std::move(flags);
}

void Dataset::add_endpoint(const std::string& name, Eigen::VectorXd values) {
  if (values.size() != size())
    throw Error(ErrorCode::MismatchedSubjectAxis, "endpoint '" + name + "' has wrong length");
  if (!has_endpoint(name)) endpoint_order_.push_back(name);
  endpoints_[name] = std::move(values);
}

const Eigen::VectorXd& Dataset::endpoint(const std::string& name) const {
  auto it = endpoints_.find(name);
  if (it == endpoints_.end()) throw Error(ErrorCode::Schema, "unknown endpoint column '" + name + "'");
  return it->second;
}

const Eigen::VectorXd& Dataset::subgroup(const std::string& name) const {
  auto it = subgroups_.find(name);
  if (it == subgroups_.end()) throw Error(ErrorCode::Schema, "unknown subgroup column '" + name + "'");
  return it->second;
}

bool Dataset::is_binary(const std::string& name) const {
  const auto& y = endpoint(name);
  for (Index i = 0; i < y.size(); ++i)
    if (!std::isnan(y(i)) && y(i) != 0.0 && y(i) != 1.0) return false;
  return true;
}

Eigen::Array<bool, Eigen::Dynamic, 1> Dataset::subset_mask(const std::string& subset) const {
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(size());
  if (subset.empty() || subset == "all") {
    mask.setConstant(true);
    return mask;
  }
  const bool negate = subset.front() == '!';
  const auto& flags = subgroup(negate ? subset.substr(1) : subset);
  const double want = negate ? 0.0 : 1.0;
  for (Index i = 0; i < size(); ++i) mask(i) = !std::isnan(flags(i)) && flags(i) == want;
  return mask;
}

Dataset Dataset::permuted(std::span<const Index> order) const {
  if (static_cast<Index>(order.size()) != size())
    throw Error(ErrorCode::MismatchedSubjectAxis, "permutation has wrong length");
  auto take = [&](const auto& v) {
    std::decay_t<decltype(v)> out(v.size());
    for (Index i = 0; i < size(); ++i) out(i) = v(order[i]);
    return out;
  };
  Dataset out(levels_, take(treatment_));
  for (const auto& name : subgroup_order_) out.add_subgroup(name, take(subgroups_.at(name)));
  for (const auto& name : endpoint_order_) out.add_endpoint(name, take(endpoints_.at(name)));
  return out;
}

namespace {

double parse_cell(const std::string& cell, const std::string& column, std::size_t row) {
  if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN") return kMissing;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw Error(ErrorCode::Schema, "column '" + column + "' row " + std::to_string(row + 1) +
                                       ": cannot parse '" + cell + "' as a number");
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in, const DatasetCsvOptions& options) {
  const auto table = csv::read(in);
  const int id_col = table.column("id");
  const int trt_col = table.column("treatment");
  if (id_col < 0) throw Error(ErrorCode::Schema, "missing column 'id'");
  if (trt_col < 0) throw Error(ErrorCode::Schema, "missing column 'treatment'");
  for (const auto& name : options.subgroup_columns)
    if (table.column(name) < 0) throw Error(ErrorCode::Schema, "missing subgroup column '" + name + "'");

  const auto n = table.rows.size();
  if (n == 0) throw Error(ErrorCode::Schema, "no data rows");

  // Sort rows by id and check contiguity.
  std::vector<std::pair<long long, std::size_t>> ids(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& cell = table.rows[r][id_col];
    long long id = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), id);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
      throw Error(ErrorCode::Schema, "column 'id' row " + std::to_string(r + 1) + ": not an integer");
    ids[r] = {id, r};
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t k = 1; k < n; ++k)
    if (ids[k].first != ids[0].first + static_cast<long long>(k))
      throw Error(ErrorCode::Schema, "column 'id': ids must be unique and contiguous (at id " +
                                         std::to_string(ids[k].first) + ")");

  std::vector<std::string> labels;
  for (const auto& row : table.rows) {
    const auto& lvl = row[trt_col];
    if (lvl.empty()) throw Error(ErrorCode::Schema, "column 'treatment': missing value");
    if (std::find(labels.begin(), labels.end(), lvl) == labels.end()) labels.push_back(lvl);
  }
  if (labels.size() != 2)
    throw Error(ErrorCode::Schema, "column 'treatment' must have exactly 2 levels, found " +
                                       std::to_string(labels.size()));
  std::sort(labels.begin(), labels.end());
  if (options.reference) {
    if (*options.reference == labels[1]) std::swap(labels[0], labels[1]);
    else if (*options.reference != labels[0])
      throw Error(ErrorCode::Schema, "reference level '" + *options.reference + "' not in column 'treatment'");
  }

  Eigen::VectorXi trt(n);
  for (std::size_t k = 0; k < n; ++k) trt(k) = table.rows[ids[k].second][trt_col] == labels[1] ? 1 : 0;
  Dataset data({labels[0], labels[1]}, std::move(trt));

  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) == id_col || static_cast<int>(c) == trt_col) continue;
    const auto& name = table.header[c];
    Eigen::VectorXd col(n);
    for (std::size_t k = 0; k < n; ++k) col(k) = parse_cell(table.rows[ids[k].second][c], name, ids[k].second);
    const bool is_flag = std::find(options.subgroup_columns.begin(), options.subgroup_columns.end(), name) !=
                         options.subgroup_columns.end();
    if (is_flag) data.add_subgroup(name, std::move(col));
    else data.add_endpoint(name, std::move(col));
  }
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path, const DatasetCsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, "cannot open " + path.string());
  return read_dataset_csv(in, options);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "id,treatment";
  for (const auto& s : data.subgroup_names()) out << ',' << s;
  for (const auto& e : data.endpoint_names()) out << ',' << e;
  out << '\n';
  auto cell = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
  for (Index i = 0; i < data.size(); ++i) {
    out << i << ',' << data.levels()[data.treatment()(i)];
    for (const auto& s : data.subgroup_names()) out << ',' << cell(data.subgroup(s)(i));
    for (const auto& e : data.endpoint_names()) out << ',' << cell(data.endpoint(e)(i));
    out << '\n';
  }
}

}  // namespace mmsi
