#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ram/anchor_codec.hpp"
#include "ram/error.hpp"

namespace ram {

// Binary layout shared by the tensor ("RAMT") and predictor ("RAMP") files:
//   bytes 0..3   magic
//   bytes 4..19  four little-endian u32 header fields
//   then         little-endian IEEE-754 float32 payload
struct FlatHeader {
  std::array<char, 4> magic{};
  std::array<std::uint32_t, 4> fields{};
};

inline constexpr std::string_view kTensorMagic = "RAMT";
inline constexpr std::size_t kFlatHeaderBytes = 20;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void read_exact(std::istream& in, void* dst, std::size_t n, std::string_view what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error(ErrorCode::MalformedTensor, "truncated " + std::string(what));
  }
}

}  // namespace detail

inline void write_flat_header(std::ostream& out, const FlatHeader& header) {
  out.write(header.magic.data(), 4);
  for (std::uint32_t f : header.fields) detail::put_u32(out, f);
}

inline FlatHeader read_flat_header(std::istream& in, std::string_view expected_magic) {
  unsigned char raw[kFlatHeaderBytes];
  detail::read_exact(in, raw, kFlatHeaderBytes, "header");
  FlatHeader h;
  std::memcpy(h.magic.data(), raw, 4);
  if (std::string_view(h.magic.data(), 4) != expected_magic) {
    throw Error(ErrorCode::MalformedTensor, "bad magic, expected " + std::string(expected_magic));
  }
  for (std::size_t i = 0; i < 4; ++i) h.fields[i] = detail::get_u32(raw + 4 + 4 * i);
  return h;
}

inline void write_f32_payload(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    detail::put_u32(out, bits);
  }
}

inline std::vector<double> read_f32_payload(std::istream& in, std::size_t count) {
  std::vector<unsigned char> raw(count * 4);
  detail::read_exact(in, raw.data(), raw.size(), "payload");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(detail::get_u32(raw.data() + 4 * i)));
  }
  return values;
}

/// Writes the binary "RAMT" form: header {N, M, k, 6} then float32 values.
inline void write_tensor(std::ostream& out, const OutputTensor& tensor) {
  const auto& c = tensor.config();
  FlatHeader h;
  std::memcpy(h.magic.data(), kTensorMagic.data(), 4);
  h.fields = {static_cast<std::uint32_t>(c.grid_rows), static_cast<std::uint32_t>(c.grid_cols),
              static_cast<std::uint32_t>(c.anchors_per_cell), static_cast<std::uint32_t>(kChannelCount)};
  write_flat_header(out, h);
  write_f32_payload(out, tensor.values());
  if (!out) throw Error(ErrorCode::Io, "failed writing tensor");
}

/// Reads a "RAMT" tensor. The file only carries the grid shape; image size and
/// anchor dimensions come from `config`, whose shape must agree with the header.
inline OutputTensor read_tensor(std::istream& in, const AnchorGridConfig& config) {
  const FlatHeader h = read_flat_header(in, kTensorMagic);
  if (h.fields[3] != kChannelCount) {
    throw Error(ErrorCode::MalformedTensor, "channel count " + std::to_string(h.fields[3]) + ", expected 6");
  }
  if (h.fields[0] != static_cast<std::uint32_t>(config.grid_rows) ||
      h.fields[1] != static_cast<std::uint32_t>(config.grid_cols) ||
      h.fields[2] != static_cast<std::uint32_t>(config.anchors_per_cell)) {
    throw Error(ErrorCode::ConfigMismatch, "tensor shape " + std::to_string(h.fields[0]) + "x" +
                                               std::to_string(h.fields[1]) + "x" + std::to_string(h.fields[2]) +
                                               " does not match configured grid");
  }
  return OutputTensor(config, read_f32_payload(in, config.anchor_count() * kChannelCount));
}

/// Human-readable debug form: nested [row][col][anchor][channel] arrays.
inline nlohmann::json tensor_to_json(const OutputTensor& tensor) {
  const auto& c = tensor.config();
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < c.grid_rows; ++r) {
    nlohmann::json cols = nlohmann::json::array();
    for (int col = 0; col < c.grid_cols; ++col) {
      nlohmann::json anchors = nlohmann::json::array();
      for (int m = 0; m < c.anchors_per_cell; ++m) {
        nlohmann::json ch = nlohmann::json::array();
        for (std::size_t k = 0; k < kChannelCount; ++k) ch.push_back(tensor.at({r, col, m}, k));
        anchors.push_back(std::move(ch));
      }
      cols.push_back(std::move(anchors));
    }
    rows.push_back(std::move(cols));
  }
  return {{"magic", kTensorMagic},
          {"rows", c.grid_rows},
          {"cols", c.grid_cols},
          {"anchors", c.anchors_per_cell},
          {"channels", kChannelCount},
          {"channel_order", kChannelNames},
          {"values", std::move(rows)}};
}

inline OutputTensor tensor_from_json(const nlohmann::json& j, const AnchorGridConfig& config) {
  try {
    if (j.at("rows").get<int>() != config.grid_rows || j.at("cols").get<int>() != config.grid_cols ||
        j.at("anchors").get<int>() != config.anchors_per_cell) {
      throw Error(ErrorCode::ConfigMismatch, "JSON tensor shape does not match configured grid");
    }
    std::vector<double> values;
    values.reserve(config.anchor_count() * kChannelCount);
    for (const auto& row : j.at("values")) {
      for (const auto& col : row) {
        for (const auto& anchor : col) {
          if (anchor.size() != kChannelCount) throw Error(ErrorCode::MalformedTensor, "anchor needs 6 channels");
          for (const auto& v : anchor) values.push_back(v.get<double>());
        }
      }
    }
    return OutputTensor(config, std::move(values));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedTensor, e.what());
  }
}

}  // namespace ram
