/*
 * Copyright 2026 The sccvfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SCCVFL_SERIALIZE_HPP_
#define SCCVFL_SERIALIZE_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"

namespace sccvfl {

// Flat binary snapshot of named tensors, little-endian:
//   magic "SCCVFLP1"                     8 bytes
//   u32 tensor count
//   per tensor: u16 name length, name bytes,
//               u8 rank, u64 dims[rank],
//               f64 values (row-major)
// Used for model snapshots and representation export consumed by the attack
// harness.
struct TensorBlob {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;

  Matrix as_matrix() const {
    check(dims.size() == 2, Error::Kind::kShape, "tensor is not rank 2");
    Matrix m(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
    std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
    return m;
  }
};

class Snapshot {
 public:
  void put_matrix(const std::string& name, const Matrix& m) {
    TensorBlob b;
    b.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    b.values.assign(m.data(), m.data() + m.size());
    tensors_[name] = std::move(b);
  }

  void put_vector(const std::string& name, const std::vector<double>& v) {
    TensorBlob b;
    b.dims = {static_cast<std::uint64_t>(v.size())};
    b.values = v;
    tensors_[name] = std::move(b);
  }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  const TensorBlob& get(const std::string& name) const {
    auto it = tensors_.find(name);
    check(it != tensors_.end(), Error::Kind::kIo, "snapshot tensor missing: " + name);
    return it->second;
  }

  const std::map<std::string, TensorBlob>& tensors() const { return tensors_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    check(f.good(), Error::Kind::kIo, "cannot open snapshot for writing: " + path);
    f.write(kMagic, 8);
    write_u32(f, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, blob] : tensors_) {
      check(name.size() < 65536, Error::Kind::kIo, "tensor name too long");
      write_u16(f, static_cast<std::uint16_t>(name.size()));
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      f.put(static_cast<char>(blob.dims.size()));
      for (std::uint64_t d : blob.dims) write_u64(f, d);
      f.write(reinterpret_cast<const char*>(blob.values.data()),
              static_cast<std::streamsize>(blob.values.size() * sizeof(double)));
    }
    check(f.good(), Error::Kind::kIo, "snapshot write failed: " + path);
  }

  static Snapshot load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), Error::Kind::kIo, "cannot open snapshot: " + path);
    char magic[8];
    f.read(magic, 8);
    check(f.good() && std::memcmp(magic, kMagic, 8) == 0, Error::Kind::kIo,
          "bad snapshot magic in " + path);
    Snapshot snap;
    const std::uint32_t count = read_u32(f);
    for (std::uint32_t t = 0; t < count; ++t) {
      const std::uint16_t name_len = read_u16(f);
      std::string name(name_len, '\0');
      f.read(name.data(), name_len);
      TensorBlob blob;
      const int rank = f.get();
      check(rank >= 0 && rank <= 8, Error::Kind::kIo, "bad tensor rank");
      std::uint64_t total = 1;
      for (int d = 0; d < rank; ++d) {
        blob.dims.push_back(read_u64(f));
        total *= blob.dims.back();
      }
      blob.values.resize(total);
      f.read(reinterpret_cast<char*>(blob.values.data()),
             static_cast<std::streamsize>(total * sizeof(double)));
      check(f.good(), Error::Kind::kIo, "truncated snapshot: " + path);
      snap.tensors_[name] = std::move(blob);
    }
    return snap;
  }

 private:
  static constexpr const char kMagic[9] = "SCCVFLP1";

  static void write_u16(std::ofstream& f, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    f.write(b, 2);
  }
  static void write_u32(std::ofstream& f, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    f.write(b, 4);
  }
  static void write_u64(std::ofstream& f, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    f.write(b, 8);
  }
  static std::uint16_t read_u16(std::ifstream& f) {
    unsigned char b[2];
    f.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  static std::uint32_t read_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  static std::uint64_t read_u64(std::ifstream& f) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::map<std::string, TensorBlob> tensors_;
};

}  // namespace sccvfl

#endif  // SCCVFL_SERIALIZE_HPP_
