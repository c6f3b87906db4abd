#include "nscomp/cli/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "nscomp/cli/fileio.hpp"
#include "nscomp/error.hpp"

namespace nscomp {

namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

constexpr char kMagic[4] = {'N', 'S', 'D', 'S'};

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFull) throw SizeError(std::string("dataset: ") + what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) {
    need(4, what);
    float v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw ParseError("dataset: truncated at byte " + std::to_string(pos_) + " while reading " + what);
    }
  }
  const std::string& bytes_;
  std::size_t pos_;
};

void check_labels(const Dataset& d) {
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    if (d.labels[i] >= d.classes) {
      throw ParseError("dataset: record " + std::to_string(i) + " has label " + std::to_string(d.labels[i]) +
                       " outside 0.." + std::to_string(d.classes - 1));
    }
  }
}

}  // namespace

void save_dataset_binary(const Dataset& data, const std::string& path) {
  data.validate();
  std::string out(kMagic, 4);
  put_u32(out, to_u32(data.size(), "count"));
  const Shape s = data.input_shape;
  if (s.is_flat()) {
    put_u32(out, 1);
    put_u32(out, to_u32(s.channels, "dimension"));
  } else {
    put_u32(out, 3);
    put_u32(out, to_u32(s.channels, "dimension"));
    put_u32(out, to_u32(s.height, "dimension"));
    put_u32(out, to_u32(s.width, "dimension"));
  }
  put_u32(out, data.classes);
  for (const auto& x : data.inputs)
    for (double v : x) {
      const float f = static_cast<float>(v);
      out.append(reinterpret_cast<const char*>(&f), 4);
    }
  for (std::uint32_t l : data.labels) put_u32(out, l);
  write_file_atomic(path, out);
}

Dataset dataset_from_binary(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("dataset: magic mismatch (expected NSDS)");
  }
  Reader r(bytes, 4);
  Dataset d;
  const std::uint32_t count = r.u32("count");
  const std::uint32_t rank = r.u32("rank");
  if (rank == 1) {
    d.input_shape = Shape::flat(r.u32("dims"));
  } else if (rank == 3) {
    d.input_shape.channels = r.u32("dims");
    d.input_shape.height = r.u32("dims");
    d.input_shape.width = r.u32("dims");
  } else {
    throw ParseError("dataset: unsupported rank " + std::to_string(rank));
  }
  d.classes = r.u32("classes");
  const std::size_t size = d.input_shape.size();
  const std::size_t expected = static_cast<std::size_t>(count) * (size + 1) * 4;
  if (r.remaining() != expected) {
    throw ParseError("dataset: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                     std::to_string(expected) + " for " + std::to_string(count) + " records");
  }
  d.inputs.assign(count, std::vector<double>(size));
  for (auto& x : d.inputs)
    for (double& v : x) v = r.f32("inputs");
  d.labels.resize(count);
  for (auto& l : d.labels) l = r.u32("labels");
  check_labels(d);
  d.validate();
  return d;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  data.validate();
  const Shape s = data.input_shape;
  std::string out = "# shape " + std::to_string(s.channels) + " " + std::to_string(s.height) + " " +
                    std::to_string(s.width) + " classes " + std::to_string(data.classes) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.inputs[i]) {
      auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(v));
      out.append(buf, res.ptr);
      out.push_back(',');
    }
    out += std::to_string(data.labels[i]);
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

Dataset dataset_from_csv(const std::string& text) {
  Dataset d;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::uint32_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream h(line.substr(1));
      std::string shape_kw, classes_kw;
      Shape s;
      std::uint32_t classes = 0;
      if (!(h >> shape_kw >> s.channels >> s.height >> s.width >> classes_kw >> classes) || shape_kw != "shape" ||
          classes_kw != "classes") {
        throw ParseError("dataset: line " + std::to_string(line_no) + ": malformed header");
      }
      d.input_shape = s;
      d.classes = classes;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw ParseError("dataset: line " + std::to_string(line_no) + ", field " + std::to_string(row.size() + 1) +
                         ": not a number");
      }
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() < 2) throw ParseError("dataset: line " + std::to_string(line_no) + ": need features and a label");
    const double label = row.back();
    row.pop_back();
    if (!(label >= 0.0) || label != std::floor(label) || label > 4e9) {
      throw ParseError("dataset: record " + std::to_string(d.size()) + " has an invalid label");
    }
    for (double& v : row) v = static_cast<float>(v);
    if (!d.inputs.empty() && row.size() != d.inputs.front().size()) {
      throw ParseError("dataset: line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                       " features, expected " + std::to_string(d.inputs.front().size()));
    }
    d.inputs.push_back(std::move(row));
    d.labels.push_back(static_cast<std::uint32_t>(label));
    max_label = std::max(max_label, d.labels.back());
  }
  if (d.inputs.empty()) throw ParseError("dataset: no records");
  if (!have_header) {
    d.input_shape = Shape::flat(d.inputs.front().size());
    d.classes = max_label + 1;
  }
  if (d.input_shape.size() != d.inputs.front().size()) {
    throw ParseError("dataset: header shape " + d.input_shape.str() + " does not match " +
                     std::to_string(d.inputs.front().size()) + " features");
  }
  check_labels(d);
  d.validate();
  return d;
}

Dataset load_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return dataset_from_binary(bytes);
  return dataset_from_csv(bytes);
}

}  // namespace nscomp
