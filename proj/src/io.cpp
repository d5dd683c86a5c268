#include "cdm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace cdm {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace

BinaryMatrix parse_binary_csv(std::istream& in, const std::string& source) {
  std::vector<std::uint8_t> entries;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (rows == 0) {
      cols = fields.size();
    } else if (fields.size() != cols) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(cols) + " fields, found " +
                       std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f != "0" && f != "1") {
        throw ParseError(source + ":" + std::to_string(line_no) +
                         ": entry '" + f + "' is not 0 or 1");
      }
      entries.push_back(f == "1" ? 1 : 0);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(source + ": no data rows");
  return BinaryMatrix(rows, cols, std::move(entries));
}

BinaryMatrix read_binary_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_binary_csv(in, path.string());
}

QMatrix read_qmatrix(const std::filesystem::path& path) {
  auto entries = read_binary_csv(path);
  try {
    return QMatrix(std::move(entries));
  } catch (const std::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ResponseMatrix read_responses(const std::filesystem::path& path) {
  return ResponseMatrix(read_binary_csv(path));
}

GdinaTable parse_gdina_table(std::istream& in, const std::string& source) {
  GdinaTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& f : split_fields(line)) {
      if (f.empty()) continue;  // trailing commas pad shorter rows
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || v < 0.0 || v > 1.0) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": '" + f +
                         "' is not a probability");
      }
      row.push_back(v);
    }
    const std::size_t n = row.size();
    if (n < 2 || (n & (n - 1)) != 0) {
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": row length must be a power of two >= 2");
    }
    table.push_back(std::move(row));
  }
  if (table.empty()) throw ParseError(source + ": no table rows");
  return table;
}

GdinaTable read_gdina_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_gdina_table(in, path.string());
}

void write_binary_csv(const BinaryMatrix& m, std::ostream& out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << static_cast<int>(m(r, c));
    }
    out << '\n';
  }
}

void write_file_atomically(const std::filesystem::path& path,
                           const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cdm
