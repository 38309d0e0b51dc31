#include "countingdino/grid.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "countingdino/errors.hpp"

namespace cdino {

Grid::Grid(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw ShapeError("grid payload does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

double Grid::sum() const noexcept {
    return std::accumulate(values_.begin(), values_.end(), 0.0);
}

double Grid::min() const {
    if (values_.empty()) throw ShapeError("min of an empty grid");
    return *std::min_element(values_.begin(), values_.end());
}

double Grid::max() const {
    if (values_.empty()) throw ShapeError("max of an empty grid");
    return *std::max_element(values_.begin(), values_.end());
}

}  // namespace cdino
