#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "swirl/errors.hpp"
#include "swirl/ftle.hpp"
#include "swirl/monte_carlo.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// Shortest decimal form that round-trips a double exactly.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// FNV-1a 64-bit hash, used to fingerprint canonical config dumps.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot open " + path + " for writing");
  out << content;
  if (!out) throw MissingArtifact("short write to " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::string join_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    line += cells[i];
  }
  line += '\n';
  return line;
}

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

/// std::stod refuses subnormals (underflow sets ERANGE); strtod returns
/// them, which the lossless round-trip needs.
inline double parse_double(const std::string& cell) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + cell.size()) {
    throw MissingArtifact("bad numeric cell '" + cell + "'");
  }
  if (errno == ERANGE && !std::isfinite(v)) {
    throw MissingArtifact("numeric overflow in cell '" + cell + "'");
  }
  return v;
}

}  // namespace detail

/// Time-indexed numeric table: one row per step, t column first, %.17g
/// everywhere for lossless round-trips.
inline std::string format_timeseries_csv(const std::vector<std::string>& columns,
                                         const std::vector<VectorXd>& rows,
                                         double dt) {
  std::string out = detail::join_row(columns);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    std::vector<std::string> cells;
    cells.reserve(rows[t].size() + 1);
    cells.push_back(fmt_g17(static_cast<double>(t) * dt));
    for (int i = 0; i < rows[t].size(); ++i) cells.push_back(fmt_g17(rows[t][i]));
    out += detail::join_row(cells);
  }
  return out;
}

/// Parses a t-first CSV written by format_timeseries_csv back into its value
/// rows (the t column is dropped).
inline std::vector<VectorXd> parse_timeseries_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw MissingArtifact("empty CSV");
  std::vector<VectorXd> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_row(line);
    if (cells.size() < 2) throw MissingArtifact("CSV row with fewer than 2 columns");
    VectorXd v(cells.size() - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      v[static_cast<int>(i - 1)] = detail::parse_double(cells[i]);
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

/// Moment rows (mu1, mu2, s11, s22) labeled with their origin, so surrogate
/// and sampled histories can share one file.
inline std::string format_moments_csv(
    const std::vector<Eigen::Vector4d>& rows, const std::string& source,
    double dt, bool with_header = true) {
  std::string out = with_header ? "t,mu1,mu2,s11,s22,source\n" : "";
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out += detail::join_row({fmt_g17(static_cast<double>(t) * dt),
                             fmt_g17(rows[t][0]), fmt_g17(rows[t][1]),
                             fmt_g17(rows[t][2]), fmt_g17(rows[t][3]), source});
  }
  return out;
}

inline std::string format_ftle_csv(const FtleField& field) {
  std::string out = "x,y,sigma,flag\n";
  const FtleGridSpec& g = field.grid;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int idx = g.index(ix, iy);
      const Vec2 p = g.node(ix, iy);
      out += detail::join_row({fmt_g17(p.x()), fmt_g17(p.y()),
                               fmt_g17(field.sigma[idx]),
                               std::to_string(static_cast<int>(field.flags[idx]))});
    }
  }
  return out;
}

inline std::string format_density_csv(const DensityHistogram& h) {
  std::string out = "x,y,density\n";
  for (int iy = 0; iy < h.ny; ++iy) {
    for (int ix = 0; ix < h.nx; ++ix) {
      out += detail::join_row({fmt_g17(h.cell_cx(ix)), fmt_g17(h.cell_cy(iy)),
                               fmt_g17(h.density(iy, ix))});
    }
  }
  return out;
}

inline std::string format_ensemble_csv(const std::vector<ParticleEnsemble>& history,
                                       const std::vector<std::size_t>& snapshot_steps,
                                       double dt) {
  std::string out = "t,particle_id,x,y,flag\n";
  for (std::size_t s : snapshot_steps) {
    const ParticleEnsemble& e = history.at(s);
    for (int p = 0; p < e.n(); ++p) {
      out += detail::join_row({fmt_g17(static_cast<double>(s) * dt),
                               std::to_string(p), fmt_g17(e.points(p, 0)),
                               fmt_g17(e.points(p, 1)),
                               std::to_string(static_cast<int>(e.flags[p]))});
    }
  }
  return out;
}

/// Binary FTLE grid file. Little-endian layout:
///   magic "SWFT", u32 version=1,
///   f64 lo_x, lo_y, hi_x, hi_y, u32 nx, ny,
///   f64 t0, tau, dt,
///   nx*ny f64 sigma (row-major, x fastest), nx*ny u8 flags.
inline void write_ftle_binary(const std::string& path, const FtleField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot open " + path + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  auto put_f64 = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  out.write("SWFT", 4);
  put_u32(1);
  put_f64(field.grid.lo.x());
  put_f64(field.grid.lo.y());
  put_f64(field.grid.hi.x());
  put_f64(field.grid.hi.y());
  put_u32(static_cast<std::uint32_t>(field.grid.nx));
  put_u32(static_cast<std::uint32_t>(field.grid.ny));
  put_f64(field.t0);
  put_f64(field.tau);
  put_f64(field.dt);
  out.write(reinterpret_cast<const char*>(field.sigma.data()),
            static_cast<std::streamsize>(sizeof(double)) * field.sigma.size());
  out.write(reinterpret_cast<const char*>(field.flags.data()),
            static_cast<std::streamsize>(field.flags.size()));
  if (!out) throw MissingArtifact("short write to " + path);
}

inline FtleField read_ftle_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SWFT") {
    throw MissingArtifact(path + ": not an FTLE grid file");
  }
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get_f64 = [&]() {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != 1) {
    throw MissingArtifact(path + ": unsupported FTLE grid version " +
                          std::to_string(version));
  }
  FtleField field;
  field.grid.lo.x() = get_f64();
  field.grid.lo.y() = get_f64();
  field.grid.hi.x() = get_f64();
  field.grid.hi.y() = get_f64();
  field.grid.nx = static_cast<int>(get_u32());
  field.grid.ny = static_cast<int>(get_u32());
  field.t0 = get_f64();
  field.tau = get_f64();
  field.dt = get_f64();
  const int n = field.grid.nx * field.grid.ny;
  field.sigma.resize(n);
  in.read(reinterpret_cast<char*>(field.sigma.data()),
          static_cast<std::streamsize>(sizeof(double)) * n);
  field.flags.resize(n);
  in.read(reinterpret_cast<char*>(field.flags.data()),
          static_cast<std::streamsize>(n));
  if (!in) throw MissingArtifact(path + ": truncated FTLE grid file");
  return field;
}

}  // namespace swirl
