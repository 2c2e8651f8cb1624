#include "rkg/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "json.hpp"

namespace rkg {

static_assert(std::endian::native == std::endian::little, "field IO assumes little-endian hosts");

void write_field(std::ostream& os, const CoeffField& u) {
  nlohmann::ordered_json h;
  h["format"] = "rkg-field";
  h["version"] = 1;
  h["L"] = u.L();
  h["J"] = u.J();
  h["convention"] = "cos-halfline";
  h["dtype"] = "f64le";
  h["layout"] = "row-major";
  os << h.dump() << '\n';
  const auto& d = u.data();
  os.write(reinterpret_cast<const char*>(d.data()),
           static_cast<std::streamsize>(d.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write_field: stream error");
}

CoeffField read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_field: missing header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("read_field: bad header: ") + e.what());
  }
  if (h.value("format", "") != "rkg-field" || h.value("convention", "") != "cos-halfline" ||
      h.value("dtype", "") != "f64le") {
    throw std::runtime_error("read_field: unsupported header");
  }
  CoeffField u(h.at("L").get<int>(), h.at("J").get<int>());
  auto& d = u.data();
  is.read(reinterpret_cast<char*>(d.data()),
          static_cast<std::streamsize>(d.size() * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(d.size() * sizeof(double))) {
    throw std::runtime_error("read_field: truncated payload");
  }
  return u;
}

void save_field(const std::string& path, const CoeffField& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_field: cannot open " + path);
  write_field(os, u);
}

CoeffField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_field: cannot open " + path);
  return read_field(is);
}

void write_field_csv(std::ostream& os, const CoeffField& u) {
  os << "l,j,value\n" << std::setprecision(17);
  for (int l = 0; l <= u.L(); ++l) {
    for (int j = 0; j <= u.J(); ++j) {
      if (u(l, j) != 0.0) os << l << ',' << j << ',' << u(l, j) << '\n';
    }
  }
}

}  // namespace rkg
