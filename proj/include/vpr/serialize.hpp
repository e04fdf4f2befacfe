#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vpr/common.hpp"
#include "vpr/params.hpp"

namespace vpr {

// Binary tensor container ("DTNS"):
//   magic 'DTNS' | version u8=1 | dtype u8 (0=f32, 1=f64) | ndim u8 |
//   reserved u8=0 | ndim x u64 LE extents | payload LE row-major.
// Checkpoint container ("DCKP"):
//   magic 'DCKP' | version u8=1 | count u32 LE |
//   count x { name_len u16 LE | UTF-8 name | embedded DTNS } |
//   CRC32 u32 LE over all preceding bytes.
// Both formats round-trip bit-identically; a corrupted checkpoint CRC is
// always detected on load.

struct TensorBlob {
    Shape shape;
    bool is_f64 = false;
    std::vector<float> f32;
    std::vector<double> f64;

    index_t count() const { return numel(shape); }
};

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t len,
                         std::uint32_t seed = 0);

std::vector<std::uint8_t> tensor_to_bytes(const TensorBlob& blob);
TensorBlob tensor_from_bytes(const std::uint8_t*& p, const std::uint8_t* end,
                             const std::string& origin);

void write_tensor_file(const std::string& path, const TensorBlob& blob);
TensorBlob read_tensor_file(const std::string& path);

using CheckpointEntries = std::vector<std::pair<std::string, TensorBlob>>;

void write_checkpoint(const std::string& path, const CheckpointEntries& entries);
CheckpointEntries read_checkpoint(const std::string& path);

// --- ParamStore bridges ---

template <typename T>
CheckpointEntries params_to_entries(const ParamStore<T>& store) {
    CheckpointEntries out;
    for (const auto& e : store.entries()) {
        TensorBlob blob;
        blob.shape = e.tensor.shape();
        if constexpr (sizeof(T) == 8) {
            blob.is_f64 = true;
            blob.f64.assign(e.tensor.data().begin(), e.tensor.data().end());
        } else {
            blob.f32.assign(e.tensor.data().begin(), e.tensor.data().end());
        }
        out.emplace_back(e.name, std::move(blob));
    }
    return out;
}

template <typename T>
void load_params_from_entries(ParamStore<T>& store,
                              const CheckpointEntries& entries,
                              const std::string& origin) {
    if (entries.size() != store.count())
        throw data_error(origin + ": checkpoint holds " +
                         std::to_string(entries.size()) + " tensors, model has " +
                         std::to_string(store.count()));
    for (const auto& [name, blob] : entries) {
        if (!store.has(name))
            throw data_error(origin + ": unknown param '" + name + "'");
        Tensor<T> t = store.at(name);
        if (t.shape() != blob.shape)
            throw data_error(origin + ": param '" + name + "' has shape " +
                             shape_str(blob.shape) + ", model expects " +
                             shape_str(t.shape()));
        auto& dst = t.data();
        if (blob.is_f64)
            for (std::size_t i = 0; i < dst.size(); ++i)
                dst[i] = static_cast<T>(blob.f64[i]);
        else
            for (std::size_t i = 0; i < dst.size(); ++i)
                dst[i] = static_cast<T>(blob.f32[i]);
    }
}

template <typename T>
void save_params(const std::string& path, const ParamStore<T>& store) {
    write_checkpoint(path, params_to_entries(store));
}

template <typename T>
void load_params(const std::string& path, ParamStore<T>& store) {
    load_params_from_entries(store, read_checkpoint(path), path);
}

}  // namespace vpr
