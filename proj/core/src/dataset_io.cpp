#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "andikit/trajgen.hpp"

namespace andikit::traj {
namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("malformed number '" + std::string(s) + "' in dataset file");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("malformed integer '" + std::string(s) + "' in dataset file");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  std::string buf;
  buf.append(kDatasetHeader).push_back('\n');
  for (const auto& traj : data) {
    buf.append(to_string(traj.label)).push_back(',');
    append_double(buf, traj.alpha);
    buf.push_back(',');
    buf.append(std::to_string(traj.length())).push_back(',');
    buf.append(std::to_string(traj.params.seed)).push_back('\n');
    for (int coord = 0; coord < 2; ++coord) {
      for (std::size_t t = 0; t < traj.positions.size(); ++t) {
        if (t != 0) buf.push_back(',');
        append_double(buf, coord == 0 ? traj.positions[t].x : traj.positions[t].y);
      }
      buf.push_back('\n');
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    buf.clear();
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kDatasetHeader) {
    throw std::runtime_error("not an andikit dataset file (bad header)");
  }
  Dataset data;
  std::string xs;
  std::string ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto meta = split(line);
    if (meta.size() != 4) throw std::runtime_error("malformed dataset record header: " + line);
    Trajectory traj;
    traj.label = parse_mechanism(meta[0]);
    traj.alpha = parse_double(meta[1]);
    const auto length = parse_int<std::size_t>(meta[2]);
    traj.params.seed = parse_int<std::uint64_t>(meta[3]);
    if (!std::getline(in, xs) || !std::getline(in, ys)) {
      throw std::runtime_error("truncated dataset record");
    }
    const auto xv = split(xs);
    const auto yv = split(ys);
    if (xv.size() != length || yv.size() != length) {
      throw std::runtime_error("dataset record length does not match its header");
    }
    traj.positions.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
      traj.positions[t] = {parse_double(xv[t]), parse_double(yv[t])};
    }
    data.push_back(std::move(traj));
  }
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(out, data);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

}  // namespace andikit::traj
