#include "cablecal/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string current;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<double> parse_numbers(const std::string& text, int line_no) {
  std::vector<double> out;
  for (const std::string& f : split_fields(text)) {
    try {
      out.push_back(parse_double(f));
    } catch (const IoError& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw IoError("not a number: '" + text + "'");
  }
  return v;
}

DhTable parse_dh_table(std::istream& in) {
  std::vector<DhLink> links;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const std::vector<double> v = parse_numbers(body, line_no);
    if (v.size() != 4) {
      throw IoError("line " + std::to_string(line_no) +
                    ": expected 4 values (a d theta_offset alpha), got " +
                    std::to_string(v.size()));
    }
    links.push_back({v[0], v[1], v[2], v[3]});
  }
  if (links.empty()) throw IoError("DH table has no links");
  try {
    return DhTable(std::move(links));
  } catch (const InvalidParameter& e) {
    throw IoError(e.what());
  }
}

DhTable read_dh_table(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return parse_dh_table(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_dh_table(std::ostream& out, const DhTable& table) {
  out << "# a_mm d_mm theta_offset_rad alpha_rad\n";
  for (const DhLink& l : table.links()) {
    out << format_double(l.a) << ' ' << format_double(l.d) << ' '
        << format_double(l.theta_offset) << ' ' << format_double(l.alpha) << '\n';
  }
}

void write_dh_table(const std::filesystem::path& path, const DhTable& table) {
  std::ofstream out = open_out(path);
  write_dh_table(out, table);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Dataset parse_dataset(std::istream& in) {
  std::optional<Eigen::Vector3d> anchor;
  std::optional<std::uint64_t> seed;
  std::optional<Eigen::VectorXd> truth;
  std::optional<std::size_t> joints;
  std::vector<Sample> samples;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      const std::string meta = trim(body.substr(1));
      const auto colon = meta.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(meta.substr(0, colon));
      const std::string value = trim(meta.substr(colon + 1));
      if (key == "anchor_mm") {
        const std::vector<double> v = parse_numbers(value, line_no);
        if (v.size() != 3) {
          throw IoError("line " + std::to_string(line_no) + ": anchor_mm needs 3 values");
        }
        anchor = Eigen::Vector3d(v[0], v[1], v[2]);
      } else if (key == "seed") {
        std::uint64_t s = 0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), s);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
          throw IoError("line " + std::to_string(line_no) + ": bad seed '" + value + "'");
        }
        seed = s;
      } else if (key == "truth") {
        const std::vector<double> v = parse_numbers(value, line_no);
        truth = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      continue;
    }
    if (!joints) {
      const std::vector<std::string> cols = split_fields(body);
      if (cols.size() < 2 || cols.back() != "L_mm") {
        throw IoError("line " + std::to_string(line_no) +
                      ": expected header q1,...,qJ,L_mm");
      }
      for (std::size_t j = 0; j + 1 < cols.size(); ++j) {
        if (cols[j] != "q" + std::to_string(j + 1)) {
          throw IoError("line " + std::to_string(line_no) + ": unexpected column '" +
                        cols[j] + "'");
        }
      }
      joints = cols.size() - 1;
      continue;
    }
    const std::vector<double> v = parse_numbers(body, line_no);
    if (v.size() != *joints + 1) {
      throw IoError("line " + std::to_string(line_no) + ": expected " +
                    std::to_string(*joints + 1) + " values, got " + std::to_string(v.size()));
    }
    Sample s;
    s.q = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(*joints));
    s.length_mm = v.back();
    samples.push_back(std::move(s));
  }
  if (!joints) throw IoError("dataset has no header");
  if (!anchor) throw IoError("dataset lacks '# anchor_mm: x y z'");
  if (truth && static_cast<std::size_t>(truth->size()) != DeviationVector::dimension(*joints, false) &&
      static_cast<std::size_t>(truth->size()) != DeviationVector::dimension(*joints, true)) {
    throw IoError("truth vector has " + std::to_string(truth->size()) +
                  " entries, which fits no deviation layout for " +
                  std::to_string(*joints) + " joints");
  }
  try {
    return Dataset{MeasurementSet(*joints, *anchor, std::move(samples)), seed, truth};
  } catch (const Error& e) {
    throw IoError(e.what());
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return parse_dataset(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  const MeasurementSet& ms = data.ms;
  out << "# anchor_mm: " << format_double(ms.anchor().x()) << ' '
      << format_double(ms.anchor().y()) << ' ' << format_double(ms.anchor().z()) << '\n';
  if (data.seed) out << "# seed: " << *data.seed << '\n';
  if (data.truth) {
    out << "# truth:";
    for (Eigen::Index i = 0; i < data.truth->size(); ++i) {
      out << ' ' << format_double((*data.truth)[i]);
    }
    out << '\n';
  }
  for (std::size_t j = 0; j < ms.joint_count(); ++j) out << 'q' << j + 1 << ',';
  out << "L_mm\n";
  for (const Sample& s : ms.samples()) {
    for (Eigen::Index j = 0; j < s.q.size(); ++j) out << format_double(s.q[j]) << ',';
    out << format_double(s.length_mm) << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out = open_out(path);
  write_dataset(out, data);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::optional<DeviationVector> truth_deviation(const Dataset& data) {
  if (!data.truth) return std::nullopt;
  const std::size_t joints = data.ms.joint_count();
  const bool with_anchor =
      static_cast<std::size_t>(data.truth->size()) == DeviationVector::dimension(joints, true);
  return DeviationVector(joints, with_anchor, *data.truth);
}

}  // namespace cablecal
