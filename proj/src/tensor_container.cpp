#include "pw/tensor_container.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "pw/errors.hpp"

namespace pw {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xFFu));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("container truncated while reading ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    float f32() {
        const std::uint32_t bits = u32("array data");
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const NamedArray* TensorContainer::find(std::string_view name) const {
    for (const auto& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

std::vector<std::uint8_t> encode_container(const TensorContainer& c) {
    if (c.magic.size() != 4) throw FormatError("container magic must be 4 bytes");
    std::vector<std::uint8_t> out(c.magic.begin(), c.magic.end());
    put_u32(out, std::uint32_t(c.arrays.size()));
    for (const auto& a : c.arrays) {
        std::size_t expected = 1;
        for (auto d : a.dims) expected *= d;
        if (expected != a.data.size())
            throw DimensionError("container array '" + a.name + "' dims do not match its data size");
        put_u32(out, std::uint32_t(a.name.size()));
        out.insert(out.end(), a.name.begin(), a.name.end());
        put_u32(out, std::uint32_t(a.dims.size()));
        for (auto d : a.dims) put_u32(out, d);
        for (float f : a.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(out, bits);
        }
    }
    return out;
}

TensorContainer decode_container(const std::vector<std::uint8_t>& bytes, std::string_view expected_magic) {
    Reader r(bytes);
    TensorContainer c;
    c.magic = r.str(4, "magic");
    if (c.magic != expected_magic)
        throw FormatError("container version mismatch: expected '" + std::string(expected_magic) + "', found '" +
                          c.magic + "'");
    const std::uint32_t count = r.u32("array count");
    for (std::uint32_t k = 0; k < count; ++k) {
        NamedArray a;
        const std::uint32_t name_len = r.u32("name length");
        a.name = r.str(name_len, "array name");
        const std::uint32_t rank = r.u32("rank");
        r.need(std::size_t(rank) * 4, "dims");
        std::size_t elements = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            a.dims.push_back(r.u32("dims"));
            elements *= a.dims.back();
        }
        if (elements > r.remaining() / 4) throw FormatError("container truncated in array '" + a.name + "'");
        a.data.resize(elements);
        for (auto& f : a.data) f = r.f32();
        c.arrays.push_back(std::move(a));
    }
    if (r.remaining() != 0) throw FormatError("container has trailing bytes");
    return c;
}

void write_container(const std::filesystem::path& path, const TensorContainer& container) {
    const auto bytes = encode_container(container);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw FormatError("failed writing '" + path.string() + "'");
}

TensorContainer read_container(const std::filesystem::path& path, std::string_view expected_magic) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_container(bytes, expected_magic);
}

}  // namespace pw
