#include "moelab/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "moelab/errors.hpp"

namespace moe {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ArgumentError("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t u = 0; u < data.dim(); ++u) out += "x_" + std::to_string(u) + ",";
  out += "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t u = 0; u < data.dim(); ++u) {
      out += format_double(data.x(i, u));
      out += ',';
    }
    out += format_double(data.y()[i]);
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("dataset CSV is empty");
  const auto header = split(line, ',');
  const std::size_t d = header.size() - 1;
  if (d == 0 || header.back() != "y") throw ArgumentError("dataset CSV header must be x_0,...,x_{d-1},y");
  for (std::size_t u = 0; u < d; ++u)
    if (header[u] != "x_" + std::to_string(u)) throw ArgumentError("dataset CSV header must be x_0,...,x_{d-1},y");
  std::vector<std::vector<double>> cols(d);
  std::vector<double> ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line, ',');
    if (fields.size() != d + 1)
      throw ArgumentError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) + " fields");
    for (std::size_t u = 0; u < d; ++u) cols[u].push_back(parse_double(fields[u], line_no));
    ys.push_back(parse_double(fields[d], line_no));
  }
  std::vector<double> x;
  x.reserve(d * ys.size());
  for (const auto& c : cols) x.insert(x.end(), c.begin(), c.end());
  return Dataset(d, std::move(x), std::move(ys));
}

void save_dataset_csv(const std::string& path, const Dataset& data) { write_text_file(path, dataset_to_csv(data)); }

Dataset load_dataset_csv(const std::string& path) { return dataset_from_csv(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace moe
