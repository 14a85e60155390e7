#include "mnfd/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "mnfd/error.hpp"

namespace mnfd {

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    std::size_t a = pos, b = end;
    while (a < b && std::isspace(static_cast<unsigned char>(line[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(line[b - 1]))) --b;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, value);
    if (ec != std::errc() || ptr != line.data() + b)
      throw Error(ErrorCode::Io, "bad number on line " + std::to_string(line_no));
    row.push_back(value);
    pos = end + 1;
  }
  return row;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw Error(ErrorCode::Io, "truncated binary point file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

constexpr char kMagic[4] = {'M', 'N', 'F', 'D'};

}  // namespace

PointCloud load_csv(const std::string& path, bool has_weights, bool unit_ball) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    rows.push_back(parse_row(line, line_no));
    if (rows.back().size() != rows.front().size())
      throw Error(ErrorCode::Io, "ragged row on line " + std::to_string(line_no));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no points in " + path);
  const std::size_t cols = rows.front().size();
  const std::size_t n = has_weights ? cols - 1 : cols;
  if (n < 1) throw Error(ErrorCode::Io, "no coordinate columns");
  Mat pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.size()));
  Vec w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) pts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    w(static_cast<Eigen::Index>(i)) = has_weights ? rows[i][n] : 1.0;
  }
  return PointCloud(std::move(pts), std::move(w), unit_ball);
}

void save_csv(const std::string& path, const PointCloud& cloud, bool write_weights) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    for (Eigen::Index j = 0; j < p.size(); ++j) out << (j ? "," : "") << p(j);
    if (write_weights) out << "," << cloud.weight(i);
    out << "\n";
  }
}

PointCloud load_binary(const std::string& path, bool unit_ball) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::Io, "bad magic in " + path);
  const auto n = get_le<std::uint32_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  if (n < 1) throw Error(ErrorCode::Io, "zero ambient dimension");
  Mat pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      pts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = get_le<double>(in);
  Vec w(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) w(static_cast<Eigen::Index>(i)) = get_le<double>(in);
  return PointCloud(std::move(pts), std::move(w), unit_ball);
}

void save_binary(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.dim()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (Eigen::Index j = 0; j < cloud.dim(); ++j) put_le<double>(out, cloud.point(i)(j));
  for (std::size_t i = 0; i < cloud.size(); ++i) put_le<double>(out, cloud.weight(i));
}

PointCloud load_points(const std::string& path, bool has_weights, bool unit_ball) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in && std::memcmp(magic, kMagic, 4) == 0) return load_binary(path, unit_ball);
  return load_csv(path, has_weights, unit_ball);
}

}  // namespace mnfd
