#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pw {

/// One named float32 array of a versioned binary container.
struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// Layout: 4-byte magic, u32 count, then per array: u32 name length, name bytes, u32 rank,
/// u32 dims[rank], float32 data. All little-endian. Used for DCM checkpoints ("DCM1") and
/// feature banks ("FTB1").
struct TensorContainer {
    std::string magic;
    std::vector<NamedArray> arrays;

    const NamedArray* find(std::string_view name) const;

    friend bool operator==(const TensorContainer&, const TensorContainer&) = default;
};

std::vector<std::uint8_t> encode_container(const TensorContainer& container);
/// Throws FormatError on truncation or trailing bytes, and on a magic other than `expected_magic`
/// (reported as a version mismatch).
TensorContainer decode_container(const std::vector<std::uint8_t>& bytes, std::string_view expected_magic);

void write_container(const std::filesystem::path& path, const TensorContainer& container);
TensorContainer read_container(const std::filesystem::path& path, std::string_view expected_magic);

}  // namespace pw
