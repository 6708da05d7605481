#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rose {

// Dense row-major 64-bit tensor. Shapes are immutable after construction;
// data is a plain contiguous buffer so kernels can work on raw pointers.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size()) {
            throw std::invalid_argument("tensor: shape/data size mismatch");
        }
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) {
            if (e == 0) throw std::invalid_argument("tensor: zero extent");
            n *= e;
        }
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        const std::size_t n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    std::size_t numel() const { return data.size(); }

    std::size_t rows() const {
        if (shape.size() != 2) throw std::invalid_argument("tensor: rows() needs rank 2");
        return shape[0];
    }

    std::size_t cols() const {
        if (shape.size() != 2) throw std::invalid_argument("tensor: cols() needs rank 2");
        return shape[1];
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

}  // namespace rose
