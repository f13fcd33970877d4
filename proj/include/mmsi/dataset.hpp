#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmsi {

using Eigen::Index;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Subject-level trial data with a two-level treatment factor.
//
// Subjects are indexed 0..N-1 and that index is the shared axis of every
// marginal model fitted on the data. Level 0 of the treatment factor is the
// reference arm, so every fitted effect is "level 1 minus level 0". Subgroup
// flags and responses use NaN for missing.
class Dataset {
 public:
  Dataset(std::array<std::string, 2> levels, Eigen::VectorXi treatment);

  Index size() const noexcept { return treatment_.size(); }
  const std::array<std::string, 2>& levels() const noexcept { return levels_; }
  const Eigen::VectorXi& treatment() const noexcept { return treatment_; }

  void add_subgroup(const std::string& name, Eigen::VectorXd flags);
  void add_endpoint(const std::string& name, Eigen::VectorXd values);

  bool has_endpoint(const std::string& name) const { return endpoints_.count(name) != 0; }
  bool has_subgroup(const std::string& name) const { return subgroups_.count(name) != 0; }
  const Eigen::VectorXd& endpoint(const std::string& name) const;
  const Eigen::VectorXd& subgroup(const std::string& name) const;
  const std::vector<std::string>& endpoint_names() const noexcept { return endpoint_order_; }
  const std::vector<std::string>& subgroup_names() const noexcept { return subgroup_order_; }

  // All non-missing values are 0 or 1.
  bool is_binary(const std::string& endpoint) const;

  // Membership for a subset expression: "all", "<flag>" (flag == 1) or
  // "!<flag>" (flag == 0). Subjects with a missing flag are never members.
  Eigen::Array<bool, Eigen::Dynamic, 1> subset_mask(const std::string& subset) const;

  // Reorders subjects: row i of the result is row order[i] of this dataset.
  Dataset permuted(std::span<const Index> order) const;

 private:
  std::array<std::string, 2> levels_;
  Eigen::VectorXi treatment_;
  std::map<std::string, Eigen::VectorXd> subgroups_;
  std::map<std::string, Eigen::VectorXd> endpoints_;
  std::vector<std::string> subgroup_order_;
  std::vector<std::string> endpoint_order_;
};

struct DatasetCsvOptions {
  // Columns to read as subgroup flags; all other columns after `treatment`
  // become endpoints.
  std::vector<std::string> subgroup_columns;
  // Reference treatment level. Defaults to the lexicographically smaller one.
  std::optional<std::string> reference;
};

// Columns `id, treatment, <flags...>, <endpoints...>`; an empty cell or "NA"
// is missing. Ids must be unique and contiguous; rows are ordered by id.
Dataset read_dataset_csv(std::istream& in, const DatasetCsvOptions& options = {});
Dataset read_dataset_csv(const std::filesystem::path& path, const DatasetCsvOptions& options = {});

void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace mmsi
