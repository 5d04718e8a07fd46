#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "dyad/core/layers.hpp"
#include "dyad/core/lstm.hpp"

namespace dyad {

// Self-describing weight container:
//   magic "DYFW" | version u16 | layer count u32 | per-layer records.
// Record: kind u8, activation u8, eight u32 shape params
// [in, out, kernel, stride, pool, hidden, channels, in_len], blob count u32,
// then per blob rows u32, cols u32, f64 values. All integers and doubles are
// little-endian (written natively; this codebase targets LE hosts).
namespace dyfw {

inline constexpr char kMagic[4] = {'D', 'Y', 'F', 'W'};
inline constexpr std::uint16_t kVersion = 1;

enum class Kind : std::uint8_t {
  dense = 0,
  conv1d = 1,
  maxpool = 2,
  activation = 3,
  lstm_cell = 4,
};

struct Record {
  Kind kind = Kind::dense;
  Act act = Act::identity;
  std::uint32_t p[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::vector<Matrix> blobs;
};

inline Record to_record(const Layer& layer) {
  Record r;
  if (const auto* d = std::get_if<Dense>(&layer)) {
    r.kind = Kind::dense;
    r.p[0] = static_cast<std::uint32_t>(d->in);
    r.p[1] = static_cast<std::uint32_t>(d->out);
    r.blobs = {d->W, d->b};
  } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
    r.kind = Kind::conv1d;
    r.p[0] = static_cast<std::uint32_t>(c->in_ch);
    r.p[1] = static_cast<std::uint32_t>(c->out_ch);
    r.p[2] = static_cast<std::uint32_t>(c->kernel);
    r.p[3] = static_cast<std::uint32_t>(c->stride);
    r.p[7] = static_cast<std::uint32_t>(c->in_len);
    r.blobs = {c->W, c->b};
  } else if (const auto* m = std::get_if<MaxPool1d>(&layer)) {
    r.kind = Kind::maxpool;
    r.p[4] = static_cast<std::uint32_t>(m->width);
    r.p[6] = static_cast<std::uint32_t>(m->channels);
    r.p[7] = static_cast<std::uint32_t>(m->in_len);
  } else if (const auto* a = std::get_if<Activation>(&layer)) {
    r.kind = Kind::activation;
    r.act = a->act;
  }
  return r;
}

inline Record to_record(const LstmCell& cell) {
  Record r;
  r.kind = Kind::lstm_cell;
  r.p[0] = static_cast<std::uint32_t>(cell.in);
  r.p[5] = static_cast<std::uint32_t>(cell.hidden);
  r.blobs = {cell.Wx, cell.Wh, cell.b};
  return r;
}

inline Layer to_layer(const Record& r) {
  switch (r.kind) {
    case Kind::dense: {
      Dense d(r.p[0], r.p[1]);
      require(r.blobs.size() == 2, "dyfw: dense expects 2 blobs");
      d.W = r.blobs[0];
      d.b = r.blobs[1];
      return d;
    }
    case Kind::conv1d: {
      Conv1d c(r.p[0], r.p[1], r.p[2], r.p[3], r.p[7]);
      require(r.blobs.size() == 2, "dyfw: conv1d expects 2 blobs");
      c.W = r.blobs[0];
      c.b = r.blobs[1];
      return c;
    }
    case Kind::maxpool:
      return MaxPool1d(r.p[6], r.p[4], r.p[7]);
    case Kind::activation:
      return Activation(r.act);
    default:
      throw DataError("dyfw: record kind is not a chain layer");
  }
}

inline LstmCell to_lstm(const Record& r) {
  require(r.kind == Kind::lstm_cell, "dyfw: record is not an lstm cell");
  require(r.blobs.size() == 3, "dyfw: lstm expects 3 blobs");
  LstmCell cell(r.p[0], r.p[5]);
  cell.Wx = r.blobs[0];
  cell.Wh = r.blobs[1];
  cell.b = r.blobs[2];
  return cell;
}

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("dyfw: truncated file");
  return v;
}

}  // namespace detail

inline void write(std::ostream& os, const std::vector<Record>& records) {
  os.write(kMagic, 4);
  detail::put<std::uint16_t>(os, kVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const Record& r : records) {
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(r.kind));
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(r.act));
    for (std::uint32_t v : r.p) detail::put<std::uint32_t>(os, v);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(r.blobs.size()));
    for (const Matrix& m : r.blobs) {
      detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
      detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
  }
}

inline std::vector<Record> read(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("dyfw: bad magic (not a DYFW weight file)");
  const auto version = detail::get<std::uint16_t>(is);
  if (version != kVersion)
    throw DataError("dyfw: unsupported version " + std::to_string(version));
  const auto count = detail::get<std::uint32_t>(is);
  std::vector<Record> records(count);
  for (Record& r : records) {
    r.kind = static_cast<Kind>(detail::get<std::uint8_t>(is));
    r.act = static_cast<Act>(detail::get<std::uint8_t>(is));
    for (std::uint32_t& v : r.p) v = detail::get<std::uint32_t>(is);
    const auto nblobs = detail::get<std::uint32_t>(is);
    r.blobs.resize(nblobs);
    for (Matrix& m : r.blobs) {
      const auto rows = detail::get<std::uint32_t>(is);
      const auto cols = detail::get<std::uint32_t>(is);
      m = Matrix(rows, cols);
      is.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
      if (!is) throw DataError("dyfw: truncated weight blob");
    }
  }
  return records;
}

inline void write_file(const std::string& path, const std::vector<Record>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("dyfw: cannot open for write: " + path);
  write(os, records);
}

inline std::vector<Record> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("dyfw: cannot open: " + path);
  return read(is);
}

}  // namespace dyfw
}  // namespace dyad
