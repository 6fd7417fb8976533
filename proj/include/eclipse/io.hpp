#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "eclipse/tensor.hpp"

namespace eclipse {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary tensor record: "ECTN", u32 version, u32 rank, rank×u64 extents, then f64 values.
// All integers and values little-endian.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_string(std::ostream& out, const std::string& s);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
std::string read_string(std::istream& in);

}  // namespace eclipse
