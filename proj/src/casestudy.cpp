#include "mmsi/casestudy.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "mmsi/csv.hpp"
#include "mmsi/error.hpp"
#include "mmsi/linmodels.hpp"
#include "mmsi/mmm.hpp"

namespace mmsi::casestudy {

namespace {

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

long parse_count(const std::string& s, std::size_t line, const char* column) {
  std::size_t pos = 0;
  long v = -1;
  try {
    v = std::stol(s, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || v < 0)
    throw Error(ErrorCode::Schema, std::string("count table line ") + std::to_string(line) + ", column '" +
                                       column + "': expected a non-negative integer, got '" + s + "'");
  return v;
}

}  // namespace

std::vector<std::string> CountTable::treatments() const {
  std::vector<std::string> out;
  for (const auto& r : rows) push_unique(out, r.treatment);
  return out;
}

std::vector<std::string> CountTable::endpoints() const {
  std::vector<std::string> out;
  for (const auto& r : rows) push_unique(out, r.endpoint);
  return out;
}

std::vector<std::string> CountTable::subgroups() const {
  std::vector<std::string> out;
  for (const auto& r : rows) push_unique(out, r.subgroup);
  return out;
}

const CountRow& CountTable::at(const std::string& treatment, const std::string& endpoint,
                               const std::string& subgroup) const {
  for (const auto& r : rows)
    if (r.treatment == treatment && r.endpoint == endpoint && r.subgroup == subgroup) return r;
  throw Error(ErrorCode::InconsistentTotals,
              "count table has no row for " + treatment + " / " + endpoint + " / " + subgroup);
}

bool looks_like_count_table(const std::vector<std::string>& header) {
  for (const char* c : {"treatment", "endpoint", "subgroup", "events", "non_events"})
    if (std::find(header.begin(), header.end(), c) == header.end()) return false;
  return true;
}

CountTable read_count_table(std::istream& in) {
  const csv::Table t = csv::read(in);
  const char* names[] = {"treatment", "endpoint", "subgroup", "events", "non_events"};
  int idx[5];
  for (int k = 0; k < 5; ++k) {
    idx[k] = t.column(names[k]);
    if (idx[k] < 0) throw Error(ErrorCode::Schema, std::string("count table lacks column '") + names[k] + "'");
  }
  CountTable table;
  std::size_t line = 1;
  for (const auto& row : t.rows) {
    ++line;
    CountRow r{row[idx[0]], row[idx[1]], row[idx[2]], parse_count(row[idx[3]], line, "events"),
               parse_count(row[idx[4]], line, "non_events")};
    for (const auto& q : table.rows)
      if (q.treatment == r.treatment && q.endpoint == r.endpoint && q.subgroup == r.subgroup)
        throw Error(ErrorCode::Schema, "count table line " + std::to_string(line) + " duplicates an earlier row");
    table.rows.push_back(std::move(r));
  }
  return table;
}

CountTable read_count_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, "cannot read count table '" + path.string() + "'");
  return read_count_table(in);
}

void write_count_table(std::ostream& out, const CountTable& table) {
  out << "treatment,endpoint,subgroup,events,non_events\n";
  for (const auto& r : table.rows)
    out << r.treatment << ',' << r.endpoint << ',' << r.subgroup << ',' << r.events << ',' << r.non_events << '\n';
}

std::filesystem::path bundled_table_path() {
  return std::filesystem::path(MMSI_DATA_DIR) / "averroes_counts.csv";
}

// ---- expansion -----------------------------------------------------------

namespace {

// Start offsets of each endpoint's event block within one cell.
std::vector<long> event_offsets(const std::vector<long>& events, EventLayout layout) {
  std::vector<long> off(events.size(), 0);
  if (layout == EventLayout::Aligned) return off;
  if (layout == EventLayout::Composite) {
    for (std::size_t e = 1; e + 1 < events.size(); ++e) off[e] = off[e - 1] + events[e - 1];
    return off;
  }
  long end = 0, largest = 0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    if (events[e] >= largest) {
      off[e] = 0;
    } else {
      off[e] = end;
    }
    end = std::max(end, off[e] + events[e]);
    largest = std::max(largest, events[e]);
  }
  return off;
}

}  // namespace

Dataset expand(const CountTable& table, EventLayout layout, const std::string& reference) {
  std::vector<std::string> arms = table.treatments();
  const auto endpoints = table.endpoints();
  const auto groups = table.subgroups();
  if (arms.size() != 2) throw Error(ErrorCode::Schema, "count table needs exactly two treatments");
  if (endpoints.empty() || groups.empty()) throw Error(ErrorCode::Schema, "count table is empty");
  if (table.rows.size() != arms.size() * endpoints.size() * groups.size())
    throw Error(ErrorCode::InconsistentTotals, "count table must have one row per treatment, endpoint and subgroup");
  std::sort(arms.begin(), arms.end());
  if (!reference.empty()) {
    if (reference == arms[1])
      std::swap(arms[0], arms[1]);
    else if (reference != arms[0])
      throw Error(ErrorCode::InvalidArgument, "reference treatment '" + reference + "' is not in the table");
  }

  // Cell sizes must agree across endpoints.
  std::map<std::pair<int, int>, long> cell_size;
  long n = 0;
  for (int a = 0; a < 2; ++a)
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      const long size = table.at(arms[a], endpoints.front(), groups[g]).total();
      for (const auto& e : endpoints)
        if (table.at(arms[a], e, groups[g]).total() != size)
          throw Error(ErrorCode::InconsistentTotals, "subject totals of " + arms[a] + " / " + groups[g] +
                                                         " differ between endpoints " + endpoints.front() +
                                                         " and " + e);
      cell_size[{a, g}] = size;
      n += size;
    }

  Eigen::VectorXi trt(n);
  std::vector<Eigen::VectorXd> flag(groups.size(), Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> y(endpoints.size(), Eigen::VectorXd::Zero(n));
  Index row = 0;
  for (int a = 0; a < 2; ++a)
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      const long size = cell_size[{a, g}];
      std::vector<long> ev;
      for (const auto& e : endpoints) ev.push_back(table.at(arms[a], e, groups[g]).events);
      const auto off = event_offsets(ev, layout);
      for (long j = 0; j < size; ++j) {
        trt(row + j) = a;
        flag[g](row + j) = 1.0;
      }
      for (std::size_t e = 0; e < endpoints.size(); ++e)
        for (long j = 0; j < ev[e]; ++j) y[e](row + (off[e] + j) % size) = 1.0;
      if (layout == EventLayout::Composite && endpoints.size() > 1) {
        auto& last = y.back();
        for (long j = 0; j < size; ++j) {
          double any = 0.0;
          for (std::size_t e = 0; e + 1 < endpoints.size(); ++e) any = std::max(any, y[e](row + j));
          last(row + j) = any;
        }
      }
      row += size;
    }

  Dataset d({arms[0], arms[1]}, trt);
  for (std::size_t g = 0; g < groups.size(); ++g) d.add_subgroup(groups[g], flag[g]);
  for (std::size_t e = 0; e < endpoints.size(); ++e) d.add_endpoint(endpoints[e], y[e]);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t e = 0; e < endpoints.size(); ++e) {
      Eigen::VectorXd masked = y[e];
      for (Index i = 0; i < n; ++i)
        if (flag[g](i) != 1.0) masked(i) = kMissing;
      d.add_endpoint(endpoints[e] + "." + groups[g], masked);
    }
  return d;
}

// ---- analysis ------------------------------------------------------------

Analysis analyze(const CountTable& table, double alpha, const QuadratureSettings& settings, EventLayout layout) {
  const Dataset data = expand(table, layout);
  std::vector<MarginalModel> models;
  auto add = [&](const std::string& column, const std::string& group, const std::string& endpoint) {
    ModelSpec spec{column, "all", Family::BinomialLogit, Alternative::Greater, group + "/" + endpoint, group};
    MarginalModel m = fit(data, spec);
    m.spec.endpoint = endpoint;
    models.push_back(std::move(m));
  };
  for (const auto& e : table.endpoints()) add(e, "Global", e);
  for (const auto& g : table.subgroups())
    for (const auto& e : table.endpoints()) add(e + "." + g, g, e);

  Analysis out;
  out.noadjust = noadjust_report(models, alpha, Alternative::Greater, true);
  out.bonferroni = bonferroni_report(models, alpha, Alternative::Greater, true);
  out.mmm = mmm_report(stack(models, DfMode::Normal), alpha, Alternative::Greater, settings, true);
  return out;
}

}  // namespace mmsi::casestudy
