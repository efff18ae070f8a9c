#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskmap {

// Single exception type; messages identify the failing input or block.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-fatal diagnostics collected while building an object; the CLI prints
// them to stderr, tests assert on their presence.
using Warnings = std::vector<std::string>;

std::vector<std::string> split(const std::string& line, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string trim(const std::string& s);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

// Calendar dates are plain ISO strings in all file formats.
std::chrono::sys_days parse_date(const std::string& iso, const std::string& context);
std::string format_date(std::chrono::sys_days d);

// Quantile with linear interpolation between order statistics
// (R's default, type 7). `sorted` must be ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double p);

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);  // denominator n-1

std::string format_full(double v);  // round-trip safe formatting

}  // namespace riskmap
