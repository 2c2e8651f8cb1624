#pragma once

#include <iosfwd>
#include <string>

#include "rkg/field_algebra.hpp"

namespace rkg {

/// Binary field format: one JSON header line
///   {"format":"rkg-field","version":1,"L":..,"J":..,"convention":"cos-halfline",
///    "dtype":"f64le","layout":"row-major"}
/// followed by (L+1)(J+1) little-endian doubles.
void write_field(std::ostream& os, const CoeffField& u);
CoeffField read_field(std::istream& is);
void save_field(const std::string& path, const CoeffField& u);
CoeffField load_field(const std::string& path);

/// CSV with header "l,j,value"; only nonzero entries are written.
void write_field_csv(std::ostream& os, const CoeffField& u);

}  // namespace rkg
