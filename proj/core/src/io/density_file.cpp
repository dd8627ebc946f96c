#include "microtopt/io/density_file.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "microtopt/error.hpp"
#include "microtopt/io/export.hpp"

namespace microtopt::io {

namespace {

constexpr const char* kMagic = "microtopt-density";
constexpr int kVersion = 1;

double to_double(const std::string& tok) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || p != end)
    throw_error(ErrorKind::Io, "density file: malformed number '" + tok + "'");
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw_error(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace

void DensityField::validate() const {
  require(nx >= 1 && ny >= 1, "density field: resolution must be positive");
  require(l1 > 0.0 && l2 > 0.0 && thickness > 0.0, "density field: dimensions must be positive");
  require(rho.size() == static_cast<Eigen::Index>(nx) * ny,
          "density field: value count does not match nx * ny");
  for (Eigen::Index e = 0; e < rho.size(); ++e)
    require(rho[e] >= 0.0 && rho[e] <= 1.0, "density field: value outside [0, 1]");
}

RveMesh DensityField::mesh() const { return build_mesh(nx, ny, l1, l2, thickness); }

std::string format_density(const DensityField& field) {
  field.validate();
  std::string s = std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  s += std::to_string(field.nx) + " " + std::to_string(field.ny) + " " + format_double(field.l1) +
       " " + format_double(field.l2) + " " + format_double(field.thickness) + "\n";
  for (int j = 0; j < field.ny; ++j) {
    for (int i = 0; i < field.nx; ++i) {
      if (i) s += ' ';
      s += format_double(field.rho[j * field.nx + i]);
    }
    s += '\n';
  }
  return s;
}

DensityField parse_density(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic)
    throw_error(ErrorKind::Io, "density file: missing '" + std::string(kMagic) + "' header");
  if (version != kVersion)
    throw_error(ErrorKind::Io, "density file: unsupported format version " + std::to_string(version));
  DensityField f;
  std::string a, b, c, d, e;
  if (!(in >> a >> b >> c >> d >> e)) throw_error(ErrorKind::Io, "density file: truncated header");
  f.nx = static_cast<int>(to_double(a));
  f.ny = static_cast<int>(to_double(b));
  f.l1 = to_double(c);
  f.l2 = to_double(d);
  f.thickness = to_double(e);
  if (f.nx < 1 || f.ny < 1 || f.nx != to_double(a) || f.ny != to_double(b))
    throw_error(ErrorKind::Io, "density file: invalid resolution");
  std::vector<double> values;
  std::string tok;
  while (in >> tok) values.push_back(to_double(tok));
  if (values.size() != static_cast<std::size_t>(f.nx) * f.ny)
    throw_error(ErrorKind::Io, "density file: expected " + std::to_string(f.nx * f.ny) +
                                   " values, found " + std::to_string(values.size()));
  f.rho = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw_error(ErrorKind::Io, "density file: value outside [0, 1]");
  return f;
}

void save_density(const std::string& path, const DensityField& field) {
  write_text(path, format_density(field));
}

DensityField load_density(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::Io, "cannot open density file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_density(ss.str());
}

void save_density_csv(const std::string& path, const DensityField& field) {
  field.validate();
  std::string s;
  for (int j = 0; j < field.ny; ++j) {
    for (int i = 0; i < field.nx; ++i) {
      if (i) s += ',';
      s += format_double(field.rho[j * field.nx + i]);
    }
    s += '\n';
  }
  write_text(path, s);
}

}  // namespace microtopt::io
