#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "smc/error.hpp"
#include "smc/experiment.hpp"

namespace smc {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' || c == '\r' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan" || s.empty()) return kNaN;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, where + ": not a number: '" + s + "'");
  }
  return v;
}

template <typename T>
T parse_count(const std::string& s, const std::string& where) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, where + ": not an integer: '" + s + "'");
  }
  return v;
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double number_or_nan(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

std::vector<std::string> column_names() {
  std::vector<std::string> names;
  std::stringstream ss(kResultColumns);
  for (std::string col; std::getline(ss, col, ',');) names.push_back(col);
  return names;
}

// Value of a grouping column, formatted for display.
std::string group_value(const ExperimentResult& r, const std::string& col) {
  char buf[32];
  auto g = [&](double v) {
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  if (col == "dataset") return r.dataset;
  if (col == "solver") return r.solver;
  if (col == "n_search") return std::to_string(r.n_search);
  if (col == "n_query") return std::to_string(r.n_query);
  if (col == "d") return std::to_string(r.d);
  if (col == "rho") return g(r.rho);
  if (col == "rank") return std::to_string(r.rank);
  if (col == "lambda") return g(r.lambda);
  if (col == "gamma") return g(r.gamma);
  if (col == "iters") return std::to_string(r.iters);
  if (col == "seed") return std::to_string(r.seed);
  throw Error(ErrorKind::ConfigError, "cannot group by '" + col + "'");
}

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  double value() const { return n == 0 ? kNaN : sum / static_cast<double>(n); }
};

struct GroupStats {
  std::size_t runs = 0;
  std::size_t failed = 0;
  Mean rmse, recall, ndcg, rank_hat, total_seconds, seconds_per_iter;
};

std::string cell(double v, const char* fmt) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& body) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : body)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
      out << (c + 1 == cells.size() ? "\n" : "  ");
    }
  };
  line(header);
  std::vector<std::string> rule;
  for (std::size_t w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto& row : body) line(row);
  return out.str();
}

}  // namespace

json to_json(const ExperimentResult& r) {
  return json{{"dataset", r.dataset},
              {"solver", r.solver},
              {"n_search", r.n_search},
              {"n_query", r.n_query},
              {"d", r.d},
              {"rho", r.rho},
              {"rank", r.rank},
              {"lambda", r.lambda},
              {"gamma", r.gamma},
              {"iters", r.iters},
              {"seed", r.seed},
              {"rmse", number_or_null(r.rmse)},
              {"recall", number_or_null(r.recall)},
              {"ndcg", number_or_null(r.ndcg)},
              {"rank_hat", r.rank_hat ? json(*r.rank_hat) : json(nullptr)},
              {"total_seconds", number_or_null(r.total_seconds)},
              {"seconds_per_iter", number_or_null(r.seconds_per_iter)},
              {"error", r.error}};
}

ExperimentResult result_from_json(const json& o) {
  ExperimentResult r;
  try {
    r.dataset = o.at("dataset").get<std::string>();
    r.solver = o.at("solver").get<std::string>();
    r.n_search = o.at("n_search").get<std::size_t>();
    r.n_query = o.at("n_query").get<std::size_t>();
    r.d = o.at("d").get<std::size_t>();
    r.rho = o.at("rho").get<double>();
    r.rank = o.at("rank").get<std::size_t>();
    r.lambda = o.at("lambda").get<double>();
    r.gamma = o.at("gamma").get<double>();
    r.iters = o.at("iters").get<std::size_t>();
    r.seed = o.at("seed").get<std::uint64_t>();
    r.rmse = number_or_nan(o.at("rmse"));
    r.recall = number_or_nan(o.at("recall"));
    r.ndcg = number_or_nan(o.at("ndcg"));
    if (!o.at("rank_hat").is_null()) r.rank_hat = o.at("rank_hat").get<std::size_t>();
    r.total_seconds = number_or_nan(o.at("total_seconds"));
    r.seconds_per_iter = number_or_nan(o.at("seconds_per_iter"));
    r.error = o.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("result row: ") + e.what());
  }
  return r;
}

void emit_results(const std::vector<ExperimentResult>& rows, const std::filesystem::path& path, ResultFormat format) {
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "no result rows to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());

  if (format == ResultFormat::Json) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    out << arr.dump(2) << '\n';
  } else {
    out << kResultColumns << '\n';
    for (const auto& r : rows) {
      out << csv_escape(r.dataset) << ',' << csv_escape(r.solver) << ',' << r.n_search << ',' << r.n_query << ','
          << r.d << ',' << format_double(r.rho) << ',' << r.rank << ',' << format_double(r.lambda) << ','
          << format_double(r.gamma) << ',' << r.iters << ',' << r.seed << ',' << format_double(r.rmse) << ','
          << format_double(r.recall) << ',' << format_double(r.ndcg) << ','
          << (r.rank_hat ? std::to_string(*r.rank_hat) : std::string()) << ',' << format_double(r.total_seconds)
          << ',' << format_double(r.seconds_per_iter) << ',' << csv_escape(r.error) << '\n';
    }
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

std::vector<ExperimentResult> load_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<ExperimentResult> rows;

  if (path.extension() == ".json") {
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorKind::ParseError, path.string() + ": expected a JSON array");
    for (const auto& o : doc) rows.push_back(result_from_json(o));
    return rows;
  }

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": empty results file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultColumns) throw Error(ErrorKind::ParseError, path.string() + ": unexpected header");
  const std::size_t ncols = column_names().size();
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != ncols) {
      throw Error(ErrorKind::RaggedRows, where + ": " + std::to_string(f.size()) + " fields, expected " +
                                             std::to_string(ncols));
    }
    ExperimentResult r;
    r.dataset = f[0];
    r.solver = f[1];
    r.n_search = parse_count<std::size_t>(f[2], where);
    r.n_query = parse_count<std::size_t>(f[3], where);
    r.d = parse_count<std::size_t>(f[4], where);
    r.rho = parse_double(f[5], where);
    r.rank = parse_count<std::size_t>(f[6], where);
    r.lambda = parse_double(f[7], where);
    r.gamma = parse_double(f[8], where);
    r.iters = parse_count<std::size_t>(f[9], where);
    r.seed = parse_count<std::uint64_t>(f[10], where);
    r.rmse = parse_double(f[11], where);
    r.recall = parse_double(f[12], where);
    r.ndcg = parse_double(f[13], where);
    if (!f[14].empty()) r.rank_hat = parse_count<std::size_t>(f[14], where);
    r.total_seconds = parse_double(f[15], where);
    r.seconds_per_iter = parse_double(f[16], where);
    r.error = f[17];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_report(const std::vector<ExperimentResult>& rows, const std::vector<std::string>& group_by) {
  if (group_by.empty()) throw Error(ErrorKind::ConfigError, "group-by needs at least one column");
  std::map<std::vector<std::string>, GroupStats> groups;
  std::vector<std::vector<std::string>> order;  // first-seen order
  std::map<std::string, GroupStats> timing;
  std::vector<std::string> solver_order;

  for (const auto& r : rows) {
    std::vector<std::string> key;
    for (const auto& col : group_by) key.push_back(group_value(r, col));
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    auto [tit, tinserted] = timing.try_emplace(r.solver);
    if (tinserted) solver_order.push_back(r.solver);
    for (GroupStats* g : {&it->second, &tit->second}) {
      ++g->runs;
      if (!r.error.empty()) ++g->failed;
      g->rmse.add(r.rmse);
      g->recall.add(r.recall);
      g->ndcg.add(r.ndcg);
      if (r.rank_hat) g->rank_hat.add(static_cast<double>(*r.rank_hat));
      g->total_seconds.add(r.total_seconds);
      g->seconds_per_iter.add(r.seconds_per_iter);
    }
  }

  std::vector<std::string> header = group_by;
  for (const char* h : {"runs", "failed", "rmse", "recall", "ndcg", "rank_hat", "sec/iter"}) header.emplace_back(h);
  std::vector<std::vector<std::string>> body;
  for (const auto& key : order) {
    const GroupStats& g = groups.at(key);
    auto line = key;
    line.push_back(std::to_string(g.runs));
    line.push_back(std::to_string(g.failed));
    line.push_back(cell(g.rmse.value(), "%.4f"));
    line.push_back(cell(g.recall.value(), "%.4f"));
    line.push_back(cell(g.ndcg.value(), "%.4f"));
    line.push_back(cell(g.rank_hat.value(), "%.1f"));
    line.push_back(cell(g.seconds_per_iter.value(), "%.3e"));
    body.push_back(std::move(line));
  }

  std::vector<std::vector<std::string>> tbody;
  for (const auto& s : solver_order) {
    const GroupStats& g = timing.at(s);
    tbody.push_back({s, std::to_string(g.runs), cell(g.total_seconds.value(), "%.3f"),
                     cell(g.seconds_per_iter.value(), "%.3e")});
  }

  return "Summary (mean over runs)\n" + render_table(header, body) + "\nTiming per solver\n" +
         render_table({"solver", "runs", "total_seconds", "sec/iter"}, tbody);
}

}  // namespace smc
