#include "aif/csv.hpp"

#include <cmath>

#include <fmt/format.h>

#include "aif/error.hpp"

namespace aif::csv {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  return fmt::format("{:.6g}", v);
}

std::string num(std::optional<double> v) { return v ? num(*v) : std::string(); }

std::string flag(std::optional<bool> v) {
  if (!v) return {};
  return *v ? "1" : "0";
}

std::string integer(long long v) { return fmt::format("{}", v); }

Table::Table(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw DomainError("csv: empty header");
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != header_.size())
    throw DomainError(fmt::format("csv: row has {} cells, header has {}", row.size(), header_.size()));
  rows_.push_back(std::move(row));
}

std::string Table::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

}  // namespace aif::csv
