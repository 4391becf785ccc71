#include "core/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/common.hpp"

namespace faceqr {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    require(used == text.size(), ErrorCode::format, context + ": not a number: \"" + text + "\"");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    raise(ErrorCode::format, context + ": not a number: \"" + text + "\"");
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), ErrorCode::io, "cannot write CSV: " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) f << ',';
    f << header[i];
  }
  f << '\n';
  for (const auto& row : rows) {
    require(row.size() == header.size(), ErrorCode::internal,
            "CSV row width does not match header: " + path.string());
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << row[i];
    }
    f << '\n';
  }
  f.flush();
  require(f.good(), ErrorCode::io, "failed writing CSV: " + path.string());
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open CSV: " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && f.eof()) break;
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      require(fields.size() == table.header.size(), ErrorCode::format,
              "CSV row width mismatch in " + path.string());
      table.rows.push_back(std::move(fields));
    }
  }
  require(!first, ErrorCode::format, "CSV file is empty: " + path.string());
  return table;
}

}  // namespace faceqr
