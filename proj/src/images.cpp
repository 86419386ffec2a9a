#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mpsenc/targets.hpp"

namespace mpsenc::targets {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void require_power_of_two_square(std::size_t w, std::size_t h) {
  if (w != h || !is_power_of_two(w)) {
    throw ShapeError("image is " + std::to_string(w) + "x" + std::to_string(h) +
                     "; a square power-of-two image is required (pad or crop it first)");
  }
}

// Skips whitespace and '#' comments inside a PNM header.
void skip_header_space(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
}

std::size_t header_int(const std::string& s, std::size_t& pos) {
  skip_header_space(s, pos);
  const std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos == start) throw FormatError("malformed PGM header");
  return std::stoul(s.substr(start, pos - start));
}

Image read_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("not a binary PGM (P5) file");
  }
  std::size_t pos = 2;
  Image img;
  img.width = header_int(bytes, pos);
  img.height = header_int(bytes, pos);
  const std::size_t maxval = header_int(bytes, pos);
  if (maxval == 0 || maxval > 65535) throw FormatError("PGM maxval out of range");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("malformed PGM header");
  }
  ++pos;
  require_power_of_two_square(img.width, img.height);
  const std::size_t count = img.width * img.height;
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  if (bytes.size() - pos < count * bpp) throw FormatError("PGM pixel data is truncated");
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t v = static_cast<unsigned char>(bytes[pos + i * bpp]);
    if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i * bpp + 1]);
    if (v > maxval) throw FormatError("PGM pixel exceeds maxval");
    img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

Image read_csv(const std::string& text) {
  Image img;
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t cols = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
        values.push_back(v);
      } catch (const std::exception&) {
        throw FormatError("bad CSV cell '" + cell + "'");
      }
      ++cols;
    }
    if (img.height == 0) {
      img.width = cols;
    } else if (cols != img.width) {
      throw FormatError("ragged CSV image: row " + std::to_string(img.height + 1) + " has " +
                        std::to_string(cols) + " columns");
    }
    ++img.height;
  }
  if (img.height == 0) throw FormatError("empty CSV image");
  require_power_of_two_square(img.width, img.height);
  double hi = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw FormatError("CSV pixel values must be non-negative");
    hi = std::max(hi, v);
  }
  const double scale = hi > 1.0 ? 255.0 : 1.0;
  if (hi > 255.0) throw FormatError("CSV pixel values must lie in [0, 1] or [0, 255]");
  for (auto& v : values) v /= scale;
  img.pixels = std::move(values);
  return img;
}

Image read_raw(const std::string& bytes) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(bytes.size()))));
  if (side * side != bytes.size() || side == 0) {
    throw ShapeError("raw-u8 image of " + std::to_string(bytes.size()) +
                     " bytes is not square; pad or crop to a power-of-two square");
  }
  require_power_of_two_square(side, side);
  Image img;
  img.width = img.height = side;
  img.pixels.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  }
  return img;
}

double smoothstep(double edge, double width, double x) {
  // Logistic ramp: 0 well below edge, 1 well above.
  return 1.0 / (1.0 + std::exp(-(x - edge) / width));
}

double ellipse_level(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

ImageFormat parse_image_format(const std::string& name) {
  if (name == "pgm" || name == "PGM-P5" || name == "pgm-p5") return ImageFormat::Pgm;
  if (name == "csv" || name == "CSV") return ImageFormat::Csv;
  if (name == "raw-u8" || name == "raw") return ImageFormat::RawU8;
  throw InvalidParameter("unknown image format '" + name + "' (pgm, csv, raw-u8)");
}

ImageFormat image_format_from_path(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == "pgm") return ImageFormat::Pgm;
  if (ext == "csv") return ImageFormat::Csv;
  if (ext == "raw" || ext == "u8" || ext == "bin") return ImageFormat::RawU8;
  throw InvalidParameter("cannot infer image format from '" + path + "'; set image_format");
}

Image read_image(const std::string& path, ImageFormat format) {
  const std::string bytes = read_file(path);
  switch (format) {
    case ImageFormat::Pgm: return read_pgm(bytes);
    case ImageFormat::Csv: return read_csv(bytes);
    case ImageFormat::RawU8: return read_raw(bytes);
  }
  throw InvalidParameter("unknown image format");
}

TargetSpec ingest_image(const std::string& path, ImageFormat format) {
  TargetSpec spec;
  spec.kind = TargetKind::Image;
  spec.image = read_image(path, format);
  spec.n_qubits = 2 * log2_exact(spec.image.width);
  spec.validate();
  return spec;
}

void write_pgm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (double p : img.pixels) {
    const auto v = static_cast<unsigned char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
    f.put(static_cast<char>(v));
  }
  if (!f) throw FormatError("failed writing " + path);
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidParameter("cannot open config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_key_values(ss.str());
}

Image synthetic_chest_image(std::size_t side) {
  if (!is_power_of_two(side) || side < 2) throw ShapeError("side must be a power of two");
  Image img;
  img.width = img.height = side;
  img.pixels.resize(side * side);
  const double px = 1.0 / static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      // Pixel centres in [0, 1]^2; y grows downwards.
      const double x = (static_cast<double>(c) + 0.5) * px;
      const double y = (static_cast<double>(r) + 0.5) * px;

      // Torso silhouette against a dark background.
      const double torso = 1.0 - smoothstep(1.0, 0.035, ellipse_level(x, y, 0.5, 0.62, 0.47, 0.62));
      double v = 0.08 + 0.52 * torso;

      // Shoulders brighten the upper corners of the torso.
      v += 0.10 * torso * std::exp(-((y - 0.12) * (y - 0.12)) / 0.01);

      // Lung fields.
      const double left = 1.0 - smoothstep(1.0, 0.06, ellipse_level(x, y, 0.31, 0.50, 0.15, 0.31));
      const double right = 1.0 - smoothstep(1.0, 0.06, ellipse_level(x, y, 0.69, 0.50, 0.15, 0.31));
      const double lungs = std::max(left, right);
      v -= 0.36 * lungs;

      // Rib shadows: gentle periodic arcs inside the lungs.
      const double arc = y + 0.12 * (x - 0.5) * (x - 0.5);
      v += 0.05 * lungs * (0.5 + 0.5 * std::cos(2.0 * M_PI * arc * 6.0));

      // Spine and mediastinum.
      v += 0.22 * std::exp(-((x - 0.5) * (x - 0.5)) / (2.0 * 0.045 * 0.045)) * torso;
      const double heart = 1.0 - smoothstep(1.0, 0.08, ellipse_level(x, y, 0.56, 0.68, 0.14, 0.13));
      v += 0.20 * heart;

      // Diaphragm: brighter abdomen below the lungs.
      v += 0.18 * torso * smoothstep(0.86, 0.03, y + 0.25 * (x - 0.5) * (x - 0.5));

      img.pixels[r * side + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace mpsenc::targets
