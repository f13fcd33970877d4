#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmsi/dataset.hpp"
#include "mmsi/mvdist.hpp"
#include "mmsi/report.hpp"

namespace mmsi::casestudy {

struct CountRow {
  std::string treatment;
  std::string endpoint;
  std::string subgroup;
  long events = 0;
  long non_events = 0;
  long total() const noexcept { return events + non_events; }
};

// Event counts per treatment x endpoint x disjoint subgroup. The whole-trial
// row of each endpoint is the sum over subgroups and is not stored.
struct CountTable {
  std::vector<CountRow> rows;

  std::vector<std::string> treatments() const;  // order of first appearance
  std::vector<std::string> endpoints() const;
  std::vector<std::string> subgroups() const;
  const CountRow& at(const std::string& treatment, const std::string& endpoint, const std::string& subgroup) const;
};

// CSV with columns treatment,endpoint,subgroup,events,non_events.
CountTable read_count_table(std::istream& in);
CountTable read_count_table(const std::filesystem::path& path);
void write_count_table(std::ostream& out, const CountTable& table);
bool looks_like_count_table(const std::vector<std::string>& header);

// The bundled trial table.
std::filesystem::path bundled_table_path();

// How events of different endpoints are placed on the subjects of one
// treatment x subgroup cell. Marginal counts are identical under every layout;
// only the joint occurrence across endpoints differs.
//   Aligned: every endpoint's events occupy the first subjects of the cell,
//            so a subject with a rarer event also has every commoner one.
//   Stacked: each endpoint's events follow the block of the previous ones,
//            except that an endpoint at least as common as every earlier one
//            restarts at the first subject and so covers the largest earlier
//            block (a composite such as stroke covering its components).
//   Composite: earlier endpoints are stacked without overlap and the last
//            endpoint is rebuilt as the union of them, ignoring its own
//            counts. This mirrors a composite outcome derived per subject.
enum class EventLayout { Aligned, Stacked, Composite };

// Subject-level data: one row per subject ordered by treatment then subgroup.
// Subgroup flags are named after the subgroups; every endpoint also gets a
// masked copy "<endpoint>.<subgroup>" that is missing outside the subgroup.
// The reference arm defaults to the lexicographically smaller level.
Dataset expand(const CountTable& table, EventLayout layout = EventLayout::Stacked,
               const std::string& reference = {});

struct Analysis {
  InferenceReport noadjust;
  InferenceReport bonferroni;
  InferenceReport mmm;
  std::vector<InferenceReport> all() const { return {noadjust, bonferroni, mmm}; }
};

// Logistic models of every endpoint in the whole trial and in each subgroup
// (whole trial first, endpoints in table order), one-sided "greater", with a
// normal reference for the joint adjustment.
// Reported p-values need about three decimals; the nine-dimensional integral
// is nearly singular, so a tighter target costs seconds per evaluation.
inline QuadratureSettings case_study_quadrature() {
  QuadratureSettings q;
  q.target_abs_error = 2.5e-4;
  return q;
}

Analysis analyze(const CountTable& table, double alpha = 0.05, const QuadratureSettings& settings = case_study_quadrature(),
                 EventLayout layout = EventLayout::Composite);

}  // namespace mmsi::casestudy
