#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamgrad/errors.hpp"
#include "hamgrad/geometry.hpp"

namespace hamgrad {

/// One finite real value per node, bound to a manifold by its geometry hash.
class ScalarField {
public:
    ScalarField() = default;

    ScalarField(const DiscreteManifold& m, std::vector<double> values)
        : binding_(m.hash()), values_(std::move(values)) {
        if (static_cast<int>(values_.size()) != m.size()) {
            throw FieldMismatch("field has " + std::to_string(values_.size()) +
                                " values, manifold has " + std::to_string(m.size()) + " nodes");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw FieldMismatch("non-finite field value at node " + std::to_string(i));
            }
        }
    }

    static ScalarField constant(const DiscreteManifold& m, double c) {
        return {m, std::vector<double>(static_cast<std::size_t>(m.size()), c)};
    }

    [[nodiscard]] std::uint64_t binding() const noexcept { return binding_; }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(values_.size()); }
    [[nodiscard]] double operator[](int i) const { return values_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    [[nodiscard]] bool bound_to(const DiscreteManifold& m) const noexcept {
        return binding_ == m.hash() && size() == m.size();
    }

    [[nodiscard]] double max() const { return *std::max_element(values_.begin(), values_.end()); }
    [[nodiscard]] double min() const { return *std::min_element(values_.begin(), values_.end()); }
    [[nodiscard]] double max_abs() const {
        double s = 0.0;
        for (double v : values_) s = std::max(s, std::abs(v));
        return s;
    }

    friend bool operator==(const ScalarField&, const ScalarField&) = default;

private:
    std::uint64_t binding_ = 0;
    std::vector<double> values_;
};

inline void require_bound(const DiscreteManifold& m, const ScalarField& f, const char* what) {
    if (!f.bound_to(m)) {
        throw FieldMismatch(std::string(what) + ": field is not bound to this manifold");
    }
}

/// Per-node symmetric d×d matrix (d ≤ 2), stored as (xx, xy, yy).
class TensorField {
public:
    TensorField() = default;
    TensorField(const DiscreteManifold& m, std::vector<std::array<double, 3>> entries)
        : binding_(m.hash()), dim_(m.dimension()), entries_(std::move(entries)) {
        if (static_cast<int>(entries_.size()) != m.size()) {
            throw FieldMismatch("tensor field size does not match manifold");
        }
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(entries_.size()); }
    [[nodiscard]] int dimension() const noexcept { return dim_; }
    [[nodiscard]] std::uint64_t binding() const noexcept { return binding_; }

    [[nodiscard]] double entry(int i, int a, int b) const {
        const auto& e = entries_[i];
        if (a == 0 && b == 0) return e[0];
        if (a == 1 && b == 1) return e[2];
        return e[1];
    }

    /// Smallest eigenvalue of the matrix at node i.
    [[nodiscard]] double min_eigenvalue(int i) const {
        const auto& e = entries_[i];
        if (dim_ == 1) return e[0];
        const double mean = 0.5 * (e[0] + e[2]);
        const double dev = std::hypot(0.5 * (e[0] - e[2]), e[1]);
        return mean - dev;
    }

private:
    std::uint64_t binding_ = 0;
    int dim_ = 1;
    std::vector<std::array<double, 3>> entries_;
};

} // namespace hamgrad
