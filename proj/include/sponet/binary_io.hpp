// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Little-endian fixed-width encoding shared by the dataset and checkpoint
// formats.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

namespace sponet::io
{

template <typename UInt>
void write_uint(std::ostream &out, UInt v)
{
  std::array<char, sizeof(UInt)> bytes;
  for (std::size_t i = 0; i < sizeof(UInt); i++)
  {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt read_uint(std::istream &in)
{
  std::array<unsigned char, sizeof(UInt)> bytes;
  if (!in.read(reinterpret_cast<char *>(bytes.data()), bytes.size()))
  {
    throw std::runtime_error("unexpected end of file");
  }
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); i++)
  {
    v |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return v;
}

inline void write_f64(std::ostream &out, double v) { write_uint(out, std::bit_cast<std::uint64_t>(v)); }

inline double read_f64(std::istream &in) { return std::bit_cast<double>(read_uint<std::uint64_t>(in)); }

inline void write_f64s(std::ostream &out, std::span<const double> v)
{
  for (double x : v)
  {
    write_f64(out, x);
  }
}

inline void read_f64s(std::istream &in, std::span<double> v)
{
  for (auto &x : v)
  {
    x = read_f64(in);
  }
}

inline void write_string(std::ostream &out, const std::string &s)
{
  write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream &in)
{
  const auto n = read_uint<std::uint32_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n))
  {
    throw std::runtime_error("unexpected end of file");
  }
  return s;
}

}  // namespace sponet::io
