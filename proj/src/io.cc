#include "surfmatch/io.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "surfmatch/error.h"

namespace surfmatch {

namespace {

std::ifstream OpenInput(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot open input file " + path.string());
  }
  return in;
}

std::ofstream OpenOutput(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot open output file " + path.string());
  }
  return out;
}

[[noreturn]] void ParseFailure(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ": " + what);
}

std::string StripComment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

std::vector<std::string> Tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

std::optional<double> ParseDouble(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

void WriteShortest(std::ostream& out, double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.write(buf, ptr - buf);
}

std::string FormatSignificant(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

}  // namespace

std::string FormatFixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

PointCloud ReadCloud(std::istream& in) {
  std::vector<Point3> points;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto tokens = Tokens(StripComment(line));
    if (tokens.empty()) continue;
    if (tokens.size() != 3) ParseFailure(n, "expected 'x y z'");
    Point3 p;
    for (int k = 0; k < 3; ++k) {
      const auto v = ParseDouble(tokens[k]);
      if (!v) ParseFailure(n, "invalid number '" + tokens[k] + "'");
      p[k] = *v;
    }
    points.push_back(p);
  }
  return PointCloud(std::move(points));
}

PointCloud ReadCloud(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  try {
    return ReadCloud(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void WriteCloud(std::ostream& out, const PointCloud& cloud) {
  for (const Point3& p : cloud) {
    WriteShortest(out, p.x());
    out << ' ';
    WriteShortest(out, p.y());
    out << ' ';
    WriteShortest(out, p.z());
    out << '\n';
  }
}

void WriteCloud(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = OpenOutput(path);
  WriteCloud(out, cloud);
}

AsciiGrid ReadAsciiGrid(std::istream& in) {
  std::map<std::string, double> header;
  std::vector<double> raw;
  std::string line;
  std::size_t n = 0;
  bool in_body = false;
  while (std::getline(in, line)) {
    ++n;
    const auto tokens = Tokens(line);
    if (tokens.empty()) continue;
    if (!in_body && std::isalpha(static_cast<unsigned char>(tokens[0][0]))) {
      if (tokens.size() != 2) ParseFailure(n, "malformed header line");
      const auto v = ParseDouble(tokens[1]);
      if (!v) ParseFailure(n, "invalid header value '" + tokens[1] + "'");
      header[Lower(tokens[0])] = *v;
      continue;
    }
    in_body = true;
    for (const auto& tok : tokens) {
      const auto v = ParseDouble(tok);
      if (!v) ParseFailure(n, "invalid grid value '" + tok + "'");
      raw.push_back(*v);
    }
  }

  const auto get = [&](const std::string& key) -> std::optional<double> {
    const auto it = header.find(key);
    if (it == header.end()) return std::nullopt;
    return it->second;
  };
  const auto ncols = get("ncols");
  const auto nrows = get("nrows");
  const auto cellsize = get("cellsize");
  if (!ncols || !nrows || !cellsize || *ncols < 1 || *nrows < 1 ||
      *ncols != std::floor(*ncols) || *nrows != std::floor(*nrows) ||
      !(*cellsize > 0.0)) {
    throw Error(ErrorCode::kParseError,
                "grid header needs positive ncols, nrows and cellsize");
  }
  AsciiGrid grid;
  grid.spec.ncols = static_cast<std::size_t>(*ncols);
  grid.spec.nrows = static_cast<std::size_t>(*nrows);
  grid.spec.gsd = *cellsize;
  if (const auto x = get("xllcorner")) {
    grid.spec.origin_x = *x;
  } else if (const auto xc = get("xllcenter")) {
    grid.spec.origin_x = *xc - 0.5 * *cellsize;
  } else {
    throw Error(ErrorCode::kParseError, "grid header lacks xllcorner");
  }
  if (const auto y = get("yllcorner")) {
    grid.spec.origin_y = *y;
  } else if (const auto yc = get("yllcenter")) {
    grid.spec.origin_y = *yc - 0.5 * *cellsize;
  } else {
    throw Error(ErrorCode::kParseError, "grid header lacks yllcorner");
  }
  const double nodata = get("nodata_value").value_or(kNoDataValue);

  const std::size_t cells = grid.spec.num_cells();
  if (raw.size() != cells) {
    throw Error(ErrorCode::kParseError,
                "grid has " + std::to_string(raw.size()) + " values, header "
                "declares " + std::to_string(cells));
  }
  grid.values.resize(cells);
  for (std::size_t file_row = 0; file_row < grid.spec.nrows; ++file_row) {
    const std::size_t row = grid.spec.nrows - 1 - file_row;
    for (std::size_t col = 0; col < grid.spec.ncols; ++col) {
      const double v = raw[file_row * grid.spec.ncols + col];
      if (v != nodata) grid.values[grid.spec.Index(row, col)] = v;
    }
  }
  return grid;
}

AsciiGrid ReadAsciiGrid(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  try {
    return ReadAsciiGrid(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void WriteAsciiGrid(std::ostream& out, const GridSpec& spec,
                    const std::vector<std::optional<double>>& values) {
  out << "ncols " << spec.ncols << '\n'
      << "nrows " << spec.nrows << '\n'
      << "xllcorner " << FormatFixed(spec.origin_x, 6) << '\n'
      << "yllcorner " << FormatFixed(spec.origin_y, 6) << '\n'
      << "cellsize " << FormatFixed(spec.gsd, 6) << '\n'
      << "NODATA_value " << FormatFixed(kNoDataValue, 0) << '\n';
  std::string row_text;
  for (std::size_t r = spec.nrows; r-- > 0;) {
    row_text.clear();
    for (std::size_t col = 0; col < spec.ncols; ++col) {
      if (col > 0) row_text += ' ';
      const auto& v = values[spec.Index(r, col)];
      row_text += v ? FormatFixed(*v, 6) : FormatFixed(kNoDataValue, 0);
    }
    out << row_text << '\n';
  }
}

void WriteAsciiGrid(const std::filesystem::path& path, const GridSpec& spec,
                    const std::vector<std::optional<double>>& values) {
  auto out = OpenOutput(path);
  WriteAsciiGrid(out, spec, values);
}

std::filesystem::path SidecarPath(const std::filesystem::path& grid_path) {
  return std::filesystem::path(grid_path.string() + ".points.xyz");
}

AsciiGrid ToAsciiGrid(const RasterGrid& grid) {
  AsciiGrid out{grid.spec(), std::vector<std::optional<double>>(
                                 grid.spec().num_cells())};
  for (const CellEntry& e : grid.entries()) {
    out.values[e.cell] = e.point.z();
  }
  return out;
}

AsciiGrid ToAsciiGrid(const ErrorGrid& grid) {
  return {grid.spec, grid.values};
}

void WriteRasterGrid(const std::filesystem::path& grid_path,
                     const RasterGrid& grid) {
  const AsciiGrid ascii = ToAsciiGrid(grid);
  WriteAsciiGrid(grid_path, ascii.spec, ascii.values);
  WriteCloud(SidecarPath(grid_path), ExtractCloud(grid));
}

RasterGrid ReadRasterGrid(const std::filesystem::path& grid_path) {
  const AsciiGrid ascii = ReadAsciiGrid(grid_path);
  const std::filesystem::path sidecar = SidecarPath(grid_path);
  const PointCloud points = ReadCloud(sidecar);
  std::vector<CellEntry> entries;
  for (std::size_t cell = 0; cell < ascii.values.size(); ++cell) {
    if (!ascii.values[cell]) continue;
    if (entries.size() >= points.size()) break;
    entries.push_back({cell, points[entries.size()], entries.size()});
  }
  const std::size_t occupied = static_cast<std::size_t>(std::count_if(
      ascii.values.begin(), ascii.values.end(),
      [](const auto& v) { return v.has_value(); }));
  if (occupied != points.size()) {
    throw Error(ErrorCode::kParseError,
                sidecar.string() + ": " + std::to_string(points.size()) +
                    " points for " + std::to_string(occupied) +
                    " occupied cells");
  }
  try {
    return RasterGrid(ascii.spec, std::move(entries));
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, sidecar.string() + ": " + e.what());
  }
}

void WriteTransform(
    std::ostream& out, const TransformRecord& record,
    const std::vector<std::pair<std::string, std::string>>& extras) {
  const SimilarityTransform& t = record.transform;
  const std::pair<const char*, double> fields[] = {
      {"tx", t.tx()},       {"ty", t.ty()},   {"tz", t.tz()},
      {"omega", t.omega()}, {"phi", t.phi()}, {"kappa", t.kappa()},
      {"scale", t.scale()}, {"sigma0", record.sigma0}};
  for (const auto& [key, value] : fields) {
    out << key << " = " << FormatSignificant(value) << '\n';
  }
  for (const auto& [key, value] : extras) {
    out << key << " = " << value << '\n';
  }
}

TransformRecord ReadTransform(std::istream& in) {
  std::map<std::string, double> values;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string body = StripComment(line);
    if (Tokens(body).empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) ParseFailure(n, "expected 'key = value'");
    const auto key = Tokens(body.substr(0, eq));
    const auto value = Tokens(body.substr(eq + 1));
    if (key.size() != 1 || value.size() != 1) {
      ParseFailure(n, "expected 'key = value'");
    }
    if (const auto v = ParseDouble(value[0])) values[key[0]] = *v;
  }
  const auto get = [&](const char* key) {
    const auto it = values.find(key);
    if (it == values.end()) {
      throw Error(ErrorCode::kParseError,
                  std::string("transform file lacks '") + key + "'");
    }
    return it->second;
  };
  TransformRecord record;
  try {
    record.transform =
        SimilarityTransform(Vec3(get("tx"), get("ty"), get("tz")),
                            get("omega"), get("phi"), get("kappa"),
                            get("scale"));
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  const auto it = values.find("sigma0");
  record.sigma0 = it == values.end() ? 0.0 : it->second;
  return record;
}

TransformRecord ReadTransform(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  try {
    return ReadTransform(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<Polygon> ReadPolygons(std::istream& in) {
  std::vector<Polygon> polygons;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto tokens = Tokens(StripComment(line));
    if (tokens.empty()) continue;
    if (tokens.size() % 2 != 0) {
      ParseFailure(n, "polygon needs an even number of coordinates");
    }
    Polygon polygon;
    for (std::size_t k = 0; k < tokens.size(); k += 2) {
      const auto x = ParseDouble(tokens[k]);
      const auto y = ParseDouble(tokens[k + 1]);
      if (!x || !y) ParseFailure(n, "invalid polygon coordinate");
      polygon.emplace_back(*x, *y);
    }
    ValidatePolygon(polygon);
    polygons.push_back(std::move(polygon));
  }
  return polygons;
}

std::vector<Polygon> ReadPolygons(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  try {
    return ReadPolygons(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

MaskMode ParseMaskMode(const std::string& text) {
  if (text == "keep-inside") return MaskMode::kKeepInside;
  if (text == "keep-outside") return MaskMode::kKeepOutside;
  throw Error(ErrorCode::kInvalidArgument,
              "mask mode must be keep-inside or keep-outside, got '" + text +
                  "'");
}

std::vector<ScenarioEntry> ReadScenarioManifest(
    const std::filesystem::path& path) {
  auto in = OpenInput(path);
  std::vector<ScenarioEntry> entries;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto tokens = Tokens(StripComment(line));
    if (tokens.empty()) continue;
    if (tokens.size() != 3) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": line " + std::to_string(n) +
                      ": expected 'name mode polygon_file'");
    }
    ScenarioEntry entry;
    entry.name = tokens[0];
    try {
      entry.mode = ParseMaskMode(tokens[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path.string() + ": line " +
                                              std::to_string(n) + ": " +
                                              e.what());
    }
    entry.polygons = tokens[2];
    if (entry.polygons.is_relative()) {
      entry.polygons = path.parent_path() / entry.polygons;
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void WriteReport(std::ostream& out, const EvaluationReport& r) {
  out << "[" << r.scenario << "]\n"
      << "matching_percentage = " << FormatFixed(r.matching_percentage, 6)
      << '\n'
      << "completeness = " << FormatFixed(r.completeness, 6) << '\n'
      << "sigma0 = " << FormatFixed(r.sigma0, 6) << '\n'
      << "rmse = " << FormatFixed(r.rmse, 6) << '\n'
      << "std = " << FormatFixed(r.std, 6) << '\n'
      << "mean = " << FormatFixed(r.mean, 6) << '\n'
      << "minimum = " << FormatFixed(r.minimum, 6) << '\n'
      << "maximum = " << FormatFixed(r.maximum, 6) << '\n'
      << "blunder_count_3std = " << r.blunder_count_3std << '\n'
      << "blunder_percentage_3std = "
      << FormatFixed(r.blunder_percentage_3std, 6) << '\n'
      << "n_total = " << r.n_total << '\n'
      << "n_valid = " << r.n_valid << '\n'
      << "n_used = " << r.n_used << '\n';
}

void WriteReportTable(std::ostream& out,
                      const std::vector<EvaluationReport>& reports) {
  out << "metric";
  for (const auto& r : reports) out << '\t' << r.scenario;
  out << '\n';
  const auto row = [&](const char* label, auto getter, int decimals) {
    out << label;
    for (const auto& r : reports) out << '\t' << FormatFixed(getter(r), decimals);
    out << '\n';
  };
  row("Matching percentage (%)", [](const auto& r) { return r.matching_percentage; }, 1);
  row("Completeness (%)", [](const auto& r) { return r.completeness; }, 1);
  row("δ_0 (m)", [](const auto& r) { return r.sigma0; }, 3);
  row("RMSE (m)", [](const auto& r) { return r.rmse; }, 3);
  row("STD (m)", [](const auto& r) { return r.std; }, 3);
  row("MEAN (m)", [](const auto& r) { return r.mean; }, 3);
  row("Minimum (m)", [](const auto& r) { return r.minimum; }, 3);
  row("Maximum (m)", [](const auto& r) { return r.maximum; }, 3);
  out << '\n' << "blunders_larger_than_3_std\tnumber\tpercentage\n";
  for (const auto& r : reports) {
    out << r.scenario << '\t' << r.blunder_count_3std << '\t'
        << FormatFixed(r.blunder_percentage_3std, 2) << '\n';
  }
}

void WriteHistogram(std::ostream& out, const Histogram& h) {
  out << "# bin_width " << FormatFixed(h.bin_width, 6) << '\n'
      << "# underflow " << h.underflow << '\n'
      << "# overflow " << h.overflow << '\n';
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << FormatFixed(h.BinCenter(i), 6) << '\t' << h.counts[i] << '\n';
  }
}

void WriteIterationLog(std::ostream& out,
                       const std::vector<IterationLog>& log) {
  out << "iteration\tdelta\tused\tblunder\tinvalid\tobjective\t"
         "translation_update\trotation_update\tscale_update\tstep_halvings\n";
  for (const IterationLog& e : log) {
    out << e.iteration << '\t' << FormatSignificant(e.delta) << '\t' << e.used
        << '\t' << e.blunder << '\t' << e.invalid << '\t'
        << FormatSignificant(e.objective) << '\t'
        << FormatSignificant(e.translation_update) << '\t'
        << FormatSignificant(e.rotation_update) << '\t'
        << FormatSignificant(e.scale_update) << '\t' << e.step_halvings
        << '\n';
  }
}

void WriteLabels(std::ostream& out, const std::vector<bool>& is_blunder) {
  for (const bool b : is_blunder) {
    out << (b ? "blunder" : "clean") << '\n';
  }
}

}  // namespace surfmatch
