#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "socsim/cascade.hpp"

namespace soc {

/// Row-major 2D array with open-boundary neighbor lookup.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    bool contains(Coord c) const {
        return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
    }
    std::size_t index(Coord c) const {
        return static_cast<std::size_t>(c.row) * cols_ + c.col;
    }
    Coord coord(std::size_t i) const {
        return {static_cast<int>(i / cols_), static_cast<int>(i % cols_)};
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    T& at(Coord c) { return data_[index(c)]; }
    const T& at(Coord c) const { return data_[index(c)]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

}  // namespace soc
