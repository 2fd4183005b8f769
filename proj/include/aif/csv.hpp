#pragma once

// Fixed-column CSV tables; floating cells carry 6 significant digits.

#include <optional>
#include <string>
#include <vector>

namespace aif::csv {

std::string num(double v);
std::string num(std::optional<double> v);  ///< empty cell when absent
std::string flag(std::optional<bool> v);   ///< "1", "0" or empty
std::string integer(long long v);

class Table {
 public:
  explicit Table(std::vector<std::string> header);

  /// Throws DomainError when the row width differs from the header.
  void add(std::vector<std::string> row);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace aif::csv
