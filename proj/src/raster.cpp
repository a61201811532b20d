#include "channeldiff/raster.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace channeldiff::mapio {

std::optional<double> Raster::sample(double x, double y) const {
  // Work in cell-center coordinates.
  double fc = (x - x0_) / cell_ - 0.5;
  double fr = (y0_ + nrows_ * cell_ - y) / cell_ - 0.5;
  int c0 = static_cast<int>(std::floor(fc));
  int r0 = static_cast<int>(std::floor(fr));
  double tx = fc - c0;
  double ty = fr - r0;
  auto clamp = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  int c1 = clamp(c0 + 1, 0, ncols_ - 1);
  int r1 = clamp(r0 + 1, 0, nrows_ - 1);
  c0 = clamp(c0, 0, ncols_ - 1);
  r0 = clamp(r0, 0, nrows_ - 1);
  if (is_nodata(r0, c0) || is_nodata(r0, c1) || is_nodata(r1, c0) || is_nodata(r1, c1))
    return std::nullopt;
  double v00 = at(r0, c0), v01 = at(r0, c1), v10 = at(r1, c0), v11 = at(r1, c1);
  double top = v00 * (1 - tx) + v01 * tx;
  double bot = v10 * (1 - tx) + v11 * tx;
  return top * (1 - ty) + bot * ty;
}

std::string Raster::header_string() const {
  std::ostringstream os;
  os << "ncols " << ncols_ << " nrows " << nrows_ << " xllcorner " << x0_
     << " yllcorner " << y0_ << " cellsize " << cell_ << " nodata_value " << nodata_;
  return os.str();
}

namespace {

bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

}  // namespace

Raster load_raster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open raster file: " + path);

  int ncols = -1, nrows = -1;
  double x0 = 0, y0 = 0, cell = 0, nodata = -9999.0;
  bool have_nodata = false, have_x0 = false, have_y0 = false;
  std::string line;
  int lineno = 0;

  // Header: key/value lines until the first line starting with a number.
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) { data_start = in.tellg(); continue; }
    std::string lower;
    for (char ch : key) lower += static_cast<char>(std::tolower(ch));
    double val;
    if (lower == "ncols" || lower == "nrows" || lower == "xllcorner" ||
        lower == "yllcorner" || lower == "cellsize" || lower == "nodata_value") {
      std::string tok;
      if (!(ls >> tok) || !parse_double(tok, val))
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": malformed header value for '" + key + "'");
      if (lower == "ncols") ncols = static_cast<int>(val);
      else if (lower == "nrows") nrows = static_cast<int>(val);
      else if (lower == "xllcorner") { x0 = val; have_x0 = true; }
      else if (lower == "yllcorner") { y0 = val; have_y0 = true; }
      else if (lower == "cellsize") cell = val;
      else { nodata = val; have_nodata = true; }
      data_start = in.tellg();
    } else {
      break;  // first data line
    }
  }
  if (ncols < 1 || nrows < 1 || cell <= 0.0 || !have_x0 || !have_y0)
    throw ParseError(path +
                     ": malformed header (need ncols>=1, nrows>=1, cellsize>0, "
                     "xllcorner, yllcorner)");

  Raster r(ncols, nrows, x0, y0, cell, have_nodata ? nodata : -9999.0);

  in.clear();
  in.seekg(data_start);
  int header_lines = lineno - 1;
  lineno = header_lines;
  int row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    int col = 0;
    while (ls >> tok) {
      if (row >= nrows)
        throw ParseError(path + ":" + std::to_string(lineno) + ": more data rows than nrows=" +
                         std::to_string(nrows));
      if (col >= ncols)
        throw ParseError(path + ":" + std::to_string(lineno) + ": row has more than ncols=" +
                         std::to_string(ncols) + " values");
      double v;
      if (!parse_double(tok, v))
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric cell '" + tok + "'");
      r.at(row, col) = v;
      ++col;
    }
    if (col == 0) continue;  // blank line
    if (col != ncols)
      throw ParseError(path + ":" + std::to_string(lineno) + ": row has " + std::to_string(col) +
                       " values, expected ncols=" + std::to_string(ncols));
    ++row;
  }
  if (row != nrows)
    throw ParseError(path + ": got " + std::to_string(row) + " data rows, expected nrows=" +
                     std::to_string(nrows));
  return r;
}

void write_raster(const Raster& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  auto fmt = [](double v) {
    // Shortest representation that round-trips a double.
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
      std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
      double back;
      std::sscanf(buf, "%lf", &back);
      if (back == v) break;
    }
    return std::string(buf);
  };
  out << "ncols " << r.ncols() << "\n";
  out << "nrows " << r.nrows() << "\n";
  out << "xllcorner " << fmt(r.x0()) << "\n";
  out << "yllcorner " << fmt(r.y0()) << "\n";
  out << "cellsize " << fmt(r.cell_size()) << "\n";
  out << "nodata_value " << fmt(r.nodata_value()) << "\n";
  for (int row = 0; row < r.nrows(); ++row) {
    for (int col = 0; col < r.ncols(); ++col) {
      if (col) out << ' ';
      out << fmt(r.at(row, col));
    }
    out << "\n";
  }
}

}  // namespace channeldiff::mapio
