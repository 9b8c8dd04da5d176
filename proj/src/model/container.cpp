#include "madt/model/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "madt/errors.hpp"

namespace madt::model {
namespace {

template <typename T>
void append_le(std::string& out, const nd::Tensor2<T>& t) {
    const std::size_t bytes = t.size() * sizeof(T);
    const std::size_t off = out.size();
    out.resize(off + bytes);
    std::memcpy(out.data() + off, t.data().data(), bytes);
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < t.size(); ++i)
            std::reverse(out.begin() + off + i * sizeof(T), out.begin() + off + (i + 1) * sizeof(T));
    }
}

template <typename T>
nd::Tensor2<T> read_le(const std::string& payload, std::size_t offset, std::size_t rows, std::size_t cols) {
    nd::Tensor2<T> t(rows, cols);
    const std::size_t bytes = t.size() * sizeof(T);
    if (offset + bytes > payload.size()) throw InputError("container: tensor payload out of range");
    std::memcpy(t.data().data(), payload.data() + offset, bytes);
    if constexpr (std::endian::native == std::endian::big) {
        auto* raw = reinterpret_cast<char*>(t.data().data());
        for (std::size_t i = 0; i < t.size(); ++i) std::reverse(raw + i * sizeof(T), raw + (i + 1) * sizeof(T));
    }
    return t;
}

}  // namespace

const AnyTensor* Container::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

template <typename Real>
nd::Tensor2<Real> Container::get(const std::string& name) const {
    const AnyTensor* t = find(name);
    if (!t) throw InputError("container: missing tensor '" + name + "'");
    return std::visit([](const auto& v) { return v.template cast<Real>(); }, *t);
}

template nd::Tensor2<float> Container::get<float>(const std::string&) const;
template nd::Tensor2<double> Container::get<double>(const std::string&) const;

const std::string& Container::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw InputError("container: missing metadata key '" + key + "'");
    return it->second;
}

void write_container(const std::filesystem::path& path, const Container& c) {
    std::string payload;
    std::ostringstream manifest;
    for (const auto& [k, v] : c.meta) {
        if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
            throw InputError("container: metadata key/value contains a separator: " + k);
        manifest << "meta " << k << ' ' << v << '\n';
    }
    for (const auto& [name, any] : c.tensors) {
        if (name.find_first_of(" \n") != std::string::npos)
            throw InputError("container: tensor name contains whitespace: " + name);
        std::visit(
            [&](const auto& t) {
                using T = typename std::decay_t<decltype(t)>::value_type;
                const std::size_t off = payload.size();
                append_le(payload, t);
                manifest << "tensor " << name << ' ' << (sizeof(T) == 4 ? "f32" : "f64") << ' ' << t.rows() << ' '
                         << t.cols() << ' ' << off << ' ' << payload.size() - off << '\n';
            },
            any);
    }
    const std::string m = manifest.str();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("container: cannot open " + path.string() + " for writing");
    out << "MADT-CONTAINER\n" << "format_version " << kContainerVersion << '\n' << "manifest_bytes " << m.size() << '\n';
    out.write(m.data(), std::streamsize(m.size()));
    out.write(payload.data(), std::streamsize(payload.size()));
    if (!out) throw InputError("container: write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("container: cannot open " + path.string());
    std::string magic, key;
    int version = 0;
    std::size_t manifest_bytes = 0;
    std::getline(in, magic);
    if (magic != "MADT-CONTAINER") throw InputError("container: bad magic in " + path.string());
    in >> key >> version;
    if (key != "format_version" || version != kContainerVersion)
        throw InputError("container: unsupported format version " + std::to_string(version));
    in >> key >> manifest_bytes;
    if (key != "manifest_bytes") throw InputError("container: missing manifest_bytes");
    in.get();
    std::string manifest(manifest_bytes, '\0');
    in.read(manifest.data(), std::streamsize(manifest_bytes));
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.eof() && in.fail()) throw InputError("container: truncated file " + path.string());

    Container c;
    std::istringstream ms(manifest);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.rfind("meta ", 0) == 0) {
            const auto sp = line.find(' ', 5);
            if (sp == std::string::npos) throw InputError("container: malformed meta line: " + line);
            c.meta[line.substr(5, sp - 5)] = line.substr(sp + 1);
        } else if (line.rfind("tensor ", 0) == 0) {
            std::istringstream ls(line.substr(7));
            std::string name, type;
            std::size_t rows = 0, cols = 0, off = 0, bytes = 0;
            if (!(ls >> name >> type >> rows >> cols >> off >> bytes))
                throw InputError("container: malformed tensor line: " + line);
            if (type == "f32" && bytes == rows * cols * 4)
                c.put(name, read_le<float>(payload, off, rows, cols));
            else if (type == "f64" && bytes == rows * cols * 8)
                c.put(name, read_le<double>(payload, off, rows, cols));
            else
                throw InputError("container: bad element type or size for tensor " + name);
        } else if (!line.empty()) {
            throw InputError("container: unknown manifest line: " + line);
        }
    }
    return c;
}

}  // namespace madt::model
