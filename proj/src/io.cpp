#include "smc/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "smc/error.hpp"

namespace smc {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

MaskedMatrix parse_csv(const std::filesystem::path& path, bool allow_missing) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());

  std::vector<double> values;
  std::vector<std::uint8_t> observed;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::size_t fields = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view field = trim(rest.substr(0, comma));
      ++fields;
      const std::string where = path.string() + ":" + std::to_string(line_no) + ":" + std::to_string(fields);
      if (field.empty()) {
        if (!allow_missing) throw Error(ErrorKind::ParseError, where + ": empty field");
        values.push_back(0.0);
        observed.push_back(0);
      } else {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
          throw Error(ErrorKind::ParseError, where + ": not a number: '" + std::string(field) + "'");
        }
        if (!std::isfinite(v)) throw Error(ErrorKind::ParseError, where + ": non-finite value");
        values.push_back(v);
        observed.push_back(1);
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      throw Error(ErrorKind::RaggedRows, path.string() + ":" + std::to_string(line_no) + ": " +
                                             std::to_string(fields) + " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::ParseError, path.string() + ": no data rows");

  MaskedMatrix out{DenseMatrix(rows, cols, std::move(values)), ObservationMask(rows, cols)};
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.mask.set(i, j, observed[i * cols + j] != 0);
  return out;
}

}  // namespace

DenseMatrix load_matrix_csv(const std::filesystem::path& path) { return parse_csv(path, false).values; }

MaskedMatrix load_masked_csv(const std::filesystem::path& path) { return parse_csv(path, true); }

void save_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (f == nullptr) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) std::fprintf(f, j == 0 ? "%.17g" : ",%.17g", m(i, j));
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

}  // namespace smc
