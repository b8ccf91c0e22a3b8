#pragma once

// nDCG@k with exponential gain (2^grade - 1) and log2(rank + 1) discount,
// TREC run/qrels I/O, and per-task macro averaging.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "t1/error.hpp"
#include "t1/index.hpp"
#include "t1/text.hpp"

namespace t1 {

// query_id -> doc_id -> grade
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct RunFile {
  std::string tag = "t1";
  // query_id -> hits, ordered by non-increasing score then doc_id
  std::map<std::string, std::vector<SearchHit>> queries;

  friend bool operator==(const RunFile&, const RunFile&) = default;
};

using PerQuery = std::map<std::string, double>;

struct MetricReport {
  PerQuery per_query;
  std::map<std::string, double> per_task;
  double average = 0.0;
};

inline double gain(int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; }

// log2(rank + 1), rank starting at 1
inline double discount(std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); }

inline double ndcg_single(std::vector<SearchHit> hits, const std::map<std::string, int>& judged, std::size_t k) {
  std::sort(hits.begin(), hits.end(), hit_order);
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
    const auto it = judged.find(hits[i].doc_id);
    if (it != judged.end() && it->second > 0) dcg += gain(it->second) / discount(i + 1);
  }
  std::vector<int> grades;
  for (const auto& [doc, g] : judged) grades.push_back(g);
  std::sort(grades.rbegin(), grades.rend());
  double ideal = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) ideal += gain(grades[i]) / discount(i + 1);
  return dcg / ideal;
}

// Every query in the run must be judged with at least one positive grade;
// judged queries absent from the run are not evaluated.
inline PerQuery ndcg_at_k(const RunFile& run, const Qrels& qrels, std::size_t k = 10) {
  require(k > 0, Errc::kInvalidInput, "k must be positive");
  PerQuery out;
  for (const auto& [qid, hits] : run.queries) {
    const auto it = qrels.find(qid);
    require(it != qrels.end(), Errc::kMissingQrels, "query '" + qid + "' has no relevance judgments");
    const bool any_positive =
        std::any_of(it->second.begin(), it->second.end(), [](const auto& kv) { return kv.second > 0; });
    require(any_positive, Errc::kMissingQrels, "query '" + qid + "' has no positively graded document");
    out[qid] = ndcg_single(hits, it->second, k);
  }
  return out;
}

inline MetricReport aggregate(const PerQuery& per_query,
                              const std::function<std::string(const std::string&)>& task_of) {
  require(!per_query.empty(), Errc::kInvalidInput, "nothing to aggregate");
  MetricReport report;
  report.per_query = per_query;
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& [qid, v] : per_query) {
    auto& s = sums[task_of(qid)];
    s.first += v;
    ++s.second;
  }
  double total = 0.0;
  for (const auto& [task, s] : sums) {
    const double mean = s.first / static_cast<double>(s.second);
    report.per_task[task] = mean;
    total += mean;
  }
  report.average = total / static_cast<double>(report.per_task.size());
  return report;
}

inline MetricReport aggregate(const PerQuery& per_query, const std::map<std::string, std::string>& task_map) {
  return aggregate(per_query, [&](const std::string& qid) {
    const auto it = task_map.find(qid);
    require(it != task_map.end(), Errc::kInvalidInput, "query '" + qid + "' is not assigned to a task");
    return it->second;
  });
}

inline MetricReport aggregate(const PerQuery& per_query) {
  return aggregate(per_query, [](const std::string&) { return std::string("all"); });
}

// ---------------------------------------------------------------------------
// TREC I/O

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  fail(Errc::kParse, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

// `query_id Q0 doc_id rank score tag`, whitespace separated. Hits are
// re-sorted by score (ties by doc_id); the rank column is not trusted.
inline RunFile parse_run(std::istream& in, const std::string& source = "<run>") {
  RunFile run;
  std::set<std::pair<std::string, std::string>> seen;
  bool have_tag = false;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto cols = split_ws(line);
    if (cols.size() != 6) detail::parse_fail(source, lineno, "expected 6 columns, found " + std::to_string(cols.size()));
    long rank = 0;
    double score = 0.0;
    if (!parse_number(cols[3], rank)) detail::parse_fail(source, lineno, "bad rank '" + std::string(cols[3]) + "'");
    if (!parse_number(cols[4], score) || !std::isfinite(score)) {
      detail::parse_fail(source, lineno, "bad score '" + std::string(cols[4]) + "'");
    }
    auto& hits = run.queries[std::string(cols[0])];
    const std::string doc(cols[2]);
    if (!seen.emplace(std::string(cols[0]), doc).second) {
      detail::parse_fail(source, lineno, "duplicate document '" + doc + "' for query '" + std::string(cols[0]) + "'");
    }
    hits.push_back({doc, score});
    if (!have_tag) {
      run.tag = std::string(cols[5]);
      have_tag = true;
    }
  }
  for (auto& [qid, hits] : run.queries) std::sort(hits.begin(), hits.end(), hit_order);
  return run;
}

// `query_id 0 doc_id grade`
inline Qrels parse_qrels(std::istream& in, const std::string& source = "<qrels>") {
  Qrels qrels;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto cols = split_ws(line);
    if (cols.size() != 4) detail::parse_fail(source, lineno, "expected 4 columns, found " + std::to_string(cols.size()));
    int grade = 0;
    if (!parse_number(cols[3], grade)) detail::parse_fail(source, lineno, "bad grade '" + std::string(cols[3]) + "'");
    if (grade < 0) detail::parse_fail(source, lineno, "negative grade");
    auto& judged = qrels[std::string(cols[0])];
    if (!judged.emplace(std::string(cols[2]), grade).second) {
      detail::parse_fail(source, lineno, "duplicate judgment for '" + std::string(cols[2]) + "'");
    }
  }
  return qrels;
}

inline void write_run(std::ostream& out, const RunFile& run) {
  for (const auto& [qid, hits] : run.queries) {
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out << qid << " Q0 " << hits[i].doc_id << ' ' << (i + 1) << ' ' << to_shortest(hits[i].score) << ' '
          << run.tag << '\n';
    }
  }
}

inline RunFile load_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kIo, "cannot open run file '" + path.string() + "'");
  return parse_run(in, path.string());
}

inline Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kIo, "cannot open qrels file '" + path.string() + "'");
  return parse_qrels(in, path.string());
}

inline void save_run(const RunFile& run, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::kIo, "cannot write run file '" + path.string() + "'");
  write_run(out, run);
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"per_query", r.per_query}, {"per_task", r.per_task}, {"average", r.average}};
}

inline std::string format_report_table(const MetricReport& r, const std::string& metric = "nDCG@10") {
  std::size_t width = std::string("average").size();
  for (const auto& [task, v] : r.per_task) width = std::max(width, task.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "task" << "  " << metric << '\n';
  os << std::string(width, '-') << "  " << std::string(metric.size(), '-') << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& [task, v] : r.per_task) os << std::setw(static_cast<int>(width)) << task << "  " << v << '\n';
  os << std::setw(static_cast<int>(width)) << "average" << "  " << r.average << '\n';
  return os.str();
}

}  // namespace t1
