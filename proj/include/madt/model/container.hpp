#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "madt/ndgrad/tensor.hpp"

namespace madt::model {

// On-disk layout:
//
//   MADT-CONTAINER\n
//   format_version <int>\n
//   manifest_bytes <int>\n
//   <manifest: "meta <key> <value>\n" and
//    "tensor <name> <f32|f64> <rows> <cols> <offset> <bytes>\n" lines>
//   <payload: little-endian tensor data, offsets relative to payload start>
inline constexpr int kContainerVersion = 1;

using AnyTensor = std::variant<nd::Tensor2<float>, nd::Tensor2<double>>;

struct Container {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, AnyTensor>> tensors;

    void put(const std::string& name, nd::Tensor2<float> t) { tensors.emplace_back(name, std::move(t)); }
    void put(const std::string& name, nd::Tensor2<double> t) { tensors.emplace_back(name, std::move(t)); }
    const AnyTensor* find(const std::string& name) const;
    /// Tensor converted to Real; throws InputError when absent.
    template <typename Real>
    nd::Tensor2<Real> get(const std::string& name) const;
    const std::string& meta_at(const std::string& key) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace madt::model
