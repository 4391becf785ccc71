#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace faceqr {

// Canonical number formatting for every CSV the project writes, so reruns
// with the same seed produce byte-identical files.
std::string format_double(double v);

double parse_double(const std::string& text, const std::string& context);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace faceqr
