#pragma once

#include <string>
#include <vector>

#include "mfgvar/spectral.hpp"

namespace mfgvar {

// Flat on-disk layout shared by every field: header (dim, n per axis,
// n_t or 0, horizon) followed by row-major node values, time slowest.
struct FieldRecord {
  std::vector<int> shape;
  int n_t = 0;
  double horizon = 1.0;
  std::vector<double> values;

  std::size_t slice_size() const;
  std::size_t slices() const;
};

FieldRecord record_of(const ScalarField& f);
FieldRecord record_of(const std::vector<ScalarField>& slices, double horizon);
ScalarField field_of(const FieldRecord& r);
std::vector<ScalarField> slices_of(const FieldRecord& r);

void write_csv(const std::string& path, const FieldRecord& r);
FieldRecord read_csv(const std::string& path);
void write_binary(const std::string& path, const FieldRecord& r);
FieldRecord read_binary(const std::string& path);

}  // namespace mfgvar
