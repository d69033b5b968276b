#include "macvae/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "macvae/errors.hpp"

namespace macvae::checkpoint {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'C', 'V'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("checkpoint: truncated file");
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
    auto n = read_pod<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw DataError("checkpoint: truncated string");
    return s;
}

}  // namespace

void save(const std::string& path, const std::string& header, const ParameterStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_string(out, header);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(store.slots().size()));
    for (const auto& [name, slot] : store.slots()) {
        write_string(out, name);
        write_pod<std::uint8_t>(out, 0);  // dtype 0 = f64
        write_pod<std::uint32_t>(out, 2);
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(slot.rows));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(slot.cols));
        out.write(reinterpret_cast<const char*>(slot.value.data()),
                  static_cast<std::streamsize>(slot.value.size() * sizeof(double)));
    }
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

std::string load(const std::string& path, ParameterStore& store) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    std::string header = read_string(in);
    auto count = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(in);
        auto dtype = read_pod<std::uint8_t>(in);
        if (dtype != 0) throw DataError("checkpoint: unsupported dtype");
        auto ndim = read_pod<std::uint32_t>(in);
        if (ndim != 2) throw DataError("checkpoint: expected rank-2 tensor");
        auto rows = static_cast<int>(read_pod<std::uint64_t>(in));
        auto cols = static_cast<int>(read_pod<std::uint64_t>(in));
        if (!store.has(name)) store.add(name, rows, cols);
        auto& slot = store.slot(name);
        if (slot.rows != rows || slot.cols != cols)
            throw DataError("checkpoint: shape mismatch for tensor " + name);
        in.read(reinterpret_cast<char*>(slot.value.data()),
                static_cast<std::streamsize>(slot.value.size() * sizeof(double)));
        if (!in) throw DataError("checkpoint: truncated payload for " + name);
    }
    return header;
}

}  // namespace macvae::checkpoint
