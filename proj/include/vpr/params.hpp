#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vpr/tensor.hpp"

namespace vpr {

// Named trainable tensors in insertion order. Names are hierarchical
// ("backbone.block3.attn.wq"); freezing is a name-set consulted by the
// optimizer, so frozen values stay bit-identical through training.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> tensor;
    };

    Tensor<T> add(const std::string& name, Tensor<T> t) {
        if (index_.count(name))
            throw config_error("param '" + name + "' already registered");
        t.set_requires_grad(true);
        index_[name] = entries_.size();
        entries_.push_back({name, t});
        return t;
    }

    Tensor<T> add_randn(const std::string& name, Shape shape, RngState& rng,
                        double stddev) {
        return add(name, Tensor<T>::randn(std::move(shape), rng, stddev));
    }

    Tensor<T> add_zeros(const std::string& name, Shape shape) {
        return add(name, Tensor<T>::zeros(std::move(shape)));
    }

    Tensor<T> add_filled(const std::string& name, Shape shape, T v) {
        return add(name, Tensor<T>::filled(std::move(shape), v));
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Tensor<T> at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw config_error("unknown param '" + name + "'");
        return entries_[it->second].tensor;
    }

    const std::vector<Entry>& entries() const { return entries_; }

    std::size_t count() const { return entries_.size(); }

    index_t total_elements(const std::string& prefix = "") const {
        index_t n = 0;
        for (const auto& e : entries_)
            if (e.name.rfind(prefix, 0) == 0) n += e.tensor.size();
        return n;
    }

    void zero_grads() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

    void freeze(const std::string& name) { frozen_.insert(name); }
    void unfreeze_all() { frozen_.clear(); }
    bool is_frozen(const std::string& name) const {
        return frozen_.count(name) > 0;
    }
    const std::unordered_set<std::string>& frozen_set() const { return frozen_; }

    // Freeze every param whose name matches `pred`.
    void freeze_if(const std::function<bool(const std::string&)>& pred) {
        for (const auto& e : entries_)
            if (pred(e.name)) frozen_.insert(e.name);
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_set<std::string> frozen_;
};

}  // namespace vpr
