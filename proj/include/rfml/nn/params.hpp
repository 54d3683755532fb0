#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rfml/nn/tensor.hpp"

namespace rfml::nn {

// Central registry for model parameters. Each parameter draws its init from a
// stream derived from (master seed, path), so adding or removing one module
// never shifts the values of another, and float/double builds of the same
// model start from identical numbers.
template <class T>
class ParamStore {
   public:
    explicit ParamStore(std::uint64_t master_seed) : master_(master_seed) {}

    Ptr<T> normal(const std::string& path, std::vector<std::size_t> shape, double stddev,
                  bool frozen = false) {
        Rng rng(derive_seed(master_, path));
        auto p = make_param<T>(std::move(shape), rng, stddev);
        if (frozen) freeze(p);
        entries_.emplace_back(path, p);
        return p;
    }

    Ptr<T> constant(const std::string& path, std::vector<std::size_t> shape, T fill,
                    bool frozen = false) {
        auto p = make_param_const<T>(std::move(shape), fill);
        if (frozen) freeze(p);
        entries_.emplace_back(path, p);
        return p;
    }

    const std::vector<std::pair<std::string, Ptr<T>>>& entries() const { return entries_; }

    std::vector<Ptr<T>> trainable() const {
        std::vector<Ptr<T>> out;
        for (const auto& [path, p] : entries_)
            if (!p->frozen) out.push_back(p);
        return out;
    }

    Ptr<T> find(const std::string& path) const {
        for (const auto& [p, t] : entries_)
            if (p == path) return t;
        return nullptr;
    }

    std::uint64_t master_seed() const { return master_; }

   private:
    std::uint64_t master_;
    std::vector<std::pair<std::string, Ptr<T>>> entries_;
};

}  // namespace rfml::nn
