#include "eclipse/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace eclipse {

namespace {

constexpr char kTensorMagic[4] = {'E', 'C', 'T', 'N'};
constexpr std::uint32_t kTensorVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void require(std::istream& in, const char* what) {
    if (!in) throw FormatError(std::string("truncated input while reading ") + what);
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    require(in, "u32");
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    require(in, "u64");
    return v;
}

std::string read_string(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    require(in, "string");
    return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kTensorMagic, 4);
    write_u32(out, kTensorVersion);
    write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) write_u64(out, e);
    const auto values = t.data();
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

Tensor read_tensor(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    require(in, "tensor magic");
    if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError("not a tensor record (bad magic)");
    const std::uint32_t version = read_u32(in);
    if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
    const std::uint32_t rank = read_u32(in);
    if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) e = read_u64(in);
    std::vector<double> values(shape_numel(shape));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    require(in, "tensor values");
    return Tensor::from(std::move(shape), std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_tensor(in);
}

}  // namespace eclipse
