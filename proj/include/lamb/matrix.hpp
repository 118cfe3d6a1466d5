#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace lamb {

/// Dense column-major matrix of doubles. Columns are contiguous, which is
/// the access pattern of every per-variable statistic in this library.
class ColMatrix {
public:
	ColMatrix() = default;
	ColMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
	    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

	std::size_t rows() const noexcept { return rows_; }
	std::size_t cols() const noexcept { return cols_; }

	double& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }
	double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * rows_ + i]; }

	std::span<double> col(std::size_t j) noexcept { return {data_.data() + j * rows_, rows_}; }
	std::span<const double> col(std::size_t j) const noexcept { return {data_.data() + j * rows_, rows_}; }

	std::span<double> values() noexcept { return data_; }
	std::span<const double> values() const noexcept { return data_; }

	bool operator==(const ColMatrix&) const = default;

private:
	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> data_;
};

} // namespace lamb
