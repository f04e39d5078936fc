#include "mfgvar/field_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfgvar {

namespace {
constexpr char kMagic[8] = {'M', 'F', 'G', 'F', 'L', 'D', '0', '1'};
}

std::size_t FieldRecord::slice_size() const {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

std::size_t FieldRecord::slices() const {
  const std::size_t s = slice_size();
  return s == 0 ? 0 : values.size() / s;
}

FieldRecord record_of(const ScalarField& f) {
  FieldRecord r;
  r.shape = f.grid.shape();
  r.values = f.values;
  return r;
}

FieldRecord record_of(const std::vector<ScalarField>& slices, double horizon) {
  if (slices.empty()) throw DomainError("no slices to serialize");
  FieldRecord r;
  r.shape = slices.front().grid.shape();
  r.n_t = static_cast<int>(slices.size());
  r.horizon = horizon;
  for (const auto& s : slices) {
    if (s.grid != slices.front().grid) throw DomainError("slices on different grids");
    r.values.insert(r.values.end(), s.values.begin(), s.values.end());
  }
  return r;
}

ScalarField field_of(const FieldRecord& r) {
  return ScalarField(TorusGrid(r.shape), r.values);
}

std::vector<ScalarField> slices_of(const FieldRecord& r) {
  TorusGrid g(r.shape);
  const std::size_t n = g.size();
  if (r.values.size() % n != 0) throw DomainError("record size is not a multiple of the slice size");
  std::vector<ScalarField> out;
  for (std::size_t s = 0; s < r.values.size() / n; ++s)
    out.emplace_back(g, std::vector<double>(r.values.begin() + s * n, r.values.begin() + (s + 1) * n));
  return out;
}

void write_csv(const std::string& path, const FieldRecord& r) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "# dim=" << r.shape.size() << " n=";
  for (std::size_t a = 0; a < r.shape.size(); ++a) os << (a ? "," : "") << r.shape[a];
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r.horizon);
  os << " n_t=" << r.n_t << " horizon=" << buf << "\n";
  const std::size_t n = r.slice_size();
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", r.values[i]);
    os << buf << (((i + 1) % n == 0) ? "\n" : ",");
  }
}

FieldRecord read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(is, header);
  FieldRecord r;
  std::istringstream hs(header);
  std::string tok;
  int dim = -1;
  while (hs >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "dim") dim = std::stoi(val);
    else if (key == "n") {
      std::istringstream vs(val);
      std::string part;
      while (std::getline(vs, part, ',')) r.shape.push_back(std::stoi(part));
    } else if (key == "n_t") r.n_t = std::stoi(val);
    else if (key == "horizon") r.horizon = std::stod(val);
  }
  if (dim < 1 || static_cast<int>(r.shape.size()) != dim) throw DomainError("malformed field header in " + path);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ','))
      if (!cell.empty()) r.values.push_back(std::stod(cell));
  }
  if (r.values.size() % r.slice_size() != 0) throw DomainError("truncated field file " + path);
  return r;
}

void write_binary(const std::string& path, const FieldRecord& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  const std::int32_t dim = static_cast<std::int32_t>(r.shape.size());
  os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  for (int s : r.shape) {
    const std::int32_t v = s;
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  const std::int32_t nt = r.n_t;
  os.write(reinterpret_cast<const char*>(&nt), sizeof nt);
  os.write(reinterpret_cast<const char*>(&r.horizon), sizeof r.horizon);
  const std::uint64_t count = r.values.size();
  os.write(reinterpret_cast<const char*>(&count), sizeof count);
  os.write(reinterpret_cast<const char*>(r.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
}

FieldRecord read_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8)) throw DomainError("not a field file: " + path);
  FieldRecord r;
  std::int32_t dim = 0;
  is.read(reinterpret_cast<char*>(&dim), sizeof dim);
  if (dim < 1 || dim > 16) throw DomainError("bad dimension in " + path);
  for (int a = 0; a < dim; ++a) {
    std::int32_t v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    r.shape.push_back(v);
  }
  std::int32_t nt = 0;
  is.read(reinterpret_cast<char*>(&nt), sizeof nt);
  r.n_t = nt;
  is.read(reinterpret_cast<char*>(&r.horizon), sizeof r.horizon);
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof count);
  r.values.resize(count);
  is.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw DomainError("truncated field file " + path);
  return r;
}

}  // namespace mfgvar
