#pragma once

// Binary data matrix plus loaders/writers for the three supported input
// formats: transactions, dense 0/1 CSV and sparse (row,col) triplets.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lamb {

class DatasetError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

using Index = std::uint32_t;
using Cell = std::pair<std::size_t, std::size_t>;

/// Immutable n x d sparse binary matrix. Each column stores the sorted row
/// indices i with X_ij = 1.
class BinaryDataset {
public:
	BinaryDataset() = default;

	/// Builds a dataset from (row, col) cells. Out-of-range cells throw;
	/// duplicate cells are rejected unless `collapse_duplicates` is set.
	BinaryDataset(std::vector<std::string> row_labels, std::vector<std::string> col_labels,
	              const std::vector<Cell>& cells, bool collapse_duplicates = false)
	    : row_labels_(std::move(row_labels)), col_labels_(std::move(col_labels)),
	      columns_(col_labels_.size()) {
		const std::size_t n = row_labels_.size();
		const std::size_t d = col_labels_.size();
		for (const auto& [i, j] : cells) {
			if (i >= n || j >= d)
				throw DatasetError("cell (" + std::to_string(i) + "," + std::to_string(j) +
				                   ") outside " + std::to_string(n) + "x" + std::to_string(d) + " matrix");
			columns_[j].push_back(static_cast<Index>(i));
		}
		for (auto& col : columns_) {
			std::sort(col.begin(), col.end());
			const auto dup = std::adjacent_find(col.begin(), col.end());
			if (dup != col.end()) {
				if (!collapse_duplicates)
					throw DatasetError("duplicate cell in row " + std::to_string(*dup));
				col.erase(std::unique(col.begin(), col.end()), col.end());
			}
		}
	}

	std::size_t n() const noexcept { return row_labels_.size(); }
	std::size_t d() const noexcept { return col_labels_.size(); }

	const std::vector<std::string>& row_labels() const noexcept { return row_labels_; }
	const std::vector<std::string>& col_labels() const noexcept { return col_labels_; }

	/// Sorted row indices of the ones in column j.
	std::span<const Index> column(std::size_t j) const { return columns_.at(j); }
	std::size_t column_sum(std::size_t j) const { return columns_.at(j).size(); }

	bool get(std::size_t i, std::size_t j) const {
		const auto& col = columns_.at(j);
		return std::binary_search(col.begin(), col.end(), static_cast<Index>(i));
	}

	std::size_t cell_count() const noexcept {
		std::size_t total = 0;
		for (const auto& col : columns_)
			total += col.size();
		return total;
	}

	/// All cells sorted by (row, col).
	std::vector<Cell> cells() const {
		std::vector<Cell> out;
		out.reserve(cell_count());
		for (std::size_t j = 0; j < d(); ++j)
			for (Index i : columns_[j])
				out.emplace_back(i, j);
		std::sort(out.begin(), out.end());
		return out;
	}

	/// Row-wise view: for every row, the sorted column indices of its ones.
	std::vector<std::vector<Index>> rows() const {
		std::vector<std::vector<Index>> out(n());
		for (std::size_t j = 0; j < d(); ++j)
			for (Index i : columns_[j])
				out[i].push_back(static_cast<Index>(j));
		return out;
	}

	/// Column index for a label, if present.
	std::optional<std::size_t> find_column(std::string_view label) const {
		for (std::size_t j = 0; j < d(); ++j)
			if (col_labels_[j] == label)
				return j;
		return std::nullopt;
	}

	bool operator==(const BinaryDataset&) const = default;

private:
	std::vector<std::string> row_labels_;
	std::vector<std::string> col_labels_;
	std::vector<std::vector<Index>> columns_;
};

/// True when both datasets hold the same ones after matching rows and
/// columns by label (label order may differ).
inline bool same_content(const BinaryDataset& a, const BinaryDataset& b) {
	if (a.n() != b.n() || a.d() != b.d())
		return false;
	std::unordered_map<std::string, std::size_t> rows_b, cols_b;
	for (std::size_t i = 0; i < b.n(); ++i)
		rows_b.emplace(b.row_labels()[i], i);
	for (std::size_t j = 0; j < b.d(); ++j)
		cols_b.emplace(b.col_labels()[j], j);
	if (rows_b.size() != b.n() || cols_b.size() != b.d())
		return false;

	std::vector<std::size_t> row_map(a.n()), col_map(a.d());
	for (std::size_t i = 0; i < a.n(); ++i) {
		const auto it = rows_b.find(a.row_labels()[i]);
		if (it == rows_b.end())
			return false;
		row_map[i] = it->second;
	}
	for (std::size_t j = 0; j < a.d(); ++j) {
		const auto it = cols_b.find(a.col_labels()[j]);
		if (it == cols_b.end())
			return false;
		col_map[j] = it->second;
	}
	if (a.cell_count() != b.cell_count())
		return false;
	for (const auto& [i, j] : a.cells())
		if (!b.get(row_map[i], col_map[j]))
			return false;
	return true;
}

struct ColumnStats {
	std::vector<double> xbar;
};

/// Drops columns that are all zeros or all ones. Returns the filtered
/// dataset and the labels of the removed columns, in original order.
inline std::pair<BinaryDataset, std::vector<std::string>> filter_degenerate(const BinaryDataset& ds) {
	std::vector<std::string> kept_labels, removed;
	std::vector<std::size_t> kept;
	for (std::size_t j = 0; j < ds.d(); ++j) {
		const std::size_t s = ds.column_sum(j);
		if (s == 0 || s == ds.n()) {
			removed.push_back(ds.col_labels()[j]);
		} else {
			kept.push_back(j);
			kept_labels.push_back(ds.col_labels()[j]);
		}
	}
	std::vector<Cell> cells;
	for (std::size_t k = 0; k < kept.size(); ++k)
		for (Index i : ds.column(kept[k]))
			cells.emplace_back(i, k);
	return {BinaryDataset(ds.row_labels(), std::move(kept_labels), cells), std::move(removed)};
}

/// Column means X̄_j. Every column must be non-degenerate.
inline ColumnStats column_means(const BinaryDataset& ds) {
	ColumnStats stats;
	stats.xbar.resize(ds.d());
	for (std::size_t j = 0; j < ds.d(); ++j) {
		const std::size_t s = ds.column_sum(j);
		if (s == 0 || s == ds.n())
			throw DatasetError("column '" + ds.col_labels()[j] + "' is degenerate (sum " + std::to_string(s) +
			                   " of " + std::to_string(ds.n()) + "); run filter_degenerate first");
		stats.xbar[j] = static_cast<double>(s) / static_cast<double>(ds.n());
	}
	return stats;
}

// ---------------------------------------------------------------------------
// Input / output

enum class InputFormat { transactions, csv, triplets };

inline InputFormat parse_input_format(std::string_view name) {
	if (name == "transactions")
		return InputFormat::transactions;
	if (name == "csv")
		return InputFormat::csv;
	if (name == "triplets")
		return InputFormat::triplets;
	throw DatasetError("unknown input format '" + std::string(name) + "'");
}

inline std::string to_string(InputFormat f) {
	switch (f) {
	case InputFormat::transactions: return "transactions";
	case InputFormat::csv: return "csv";
	case InputFormat::triplets: return "triplets";
	}
	return "?";
}

struct TransactionOptions {
	std::size_t max_tokens_per_line = 1'000'000;
};

struct CsvOptions {
	std::optional<bool> has_header;     // auto-detected when unset
	std::optional<bool> has_row_labels; // auto-detected when unset
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw DatasetError("cannot read file '" + path + "'");
	return in;
}

inline void strip_cr(std::string& line) {
	if (!line.empty() && line.back() == '\r')
		line.pop_back();
}

inline bool is_blank(std::string_view line) {
	return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

inline std::string trim(std::string_view s) {
	const auto b = s.find_first_not_of(" \t");
	if (b == std::string_view::npos)
		return {};
	const auto e = s.find_last_not_of(" \t");
	return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV record. Supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv(std::string_view line) {
	std::vector<std::string> fields;
	std::string cur;
	bool quoted = false;
	bool was_quoted = false;
	for (std::size_t k = 0; k < line.size(); ++k) {
		const char c = line[k];
		if (quoted) {
			if (c == '"') {
				if (k + 1 < line.size() && line[k + 1] == '"') {
					cur.push_back('"');
					++k;
				} else {
					quoted = false;
				}
			} else {
				cur.push_back(c);
			}
		} else if (c == '"') {
			quoted = true;
			was_quoted = true;
		} else if (c == ',') {
			fields.push_back(was_quoted ? cur : trim(cur));
			cur.clear();
			was_quoted = false;
		} else {
			cur.push_back(c);
		}
	}
	if (quoted)
		throw DatasetError("unterminated quote in CSV line");
	fields.push_back(was_quoted ? cur : trim(cur));
	return fields;
}

inline std::string quote_csv(const std::string& field) {
	if (field.find_first_of(",\"\n\r") == std::string::npos && trim(field) == field)
		return field;
	std::string out = "\"";
	for (char c : field) {
		if (c == '"')
			out.push_back('"');
		out.push_back(c);
	}
	out.push_back('"');
	return out;
}

inline bool is_binary_cell(std::string_view s) { return s == "0" || s == "1"; }

inline std::vector<std::string> numbered_labels(std::size_t count, std::string_view prefix) {
	std::vector<std::string> out;
	out.reserve(count);
	for (std::size_t k = 0; k < count; ++k)
		out.push_back(std::string(prefix) + std::to_string(k + 1));
	return out;
}

} // namespace detail

/// One transaction per non-blank line; tokens separated by commas and/or
/// whitespace. Columns are the distinct tokens in lexicographic order; rows
/// are labelled 1..n by transaction order.
inline BinaryDataset parse_transactions(std::istream& in, const TransactionOptions& opts = {}) {
	std::vector<std::vector<std::string>> transactions;
	std::map<std::string, std::size_t> vocabulary;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		detail::strip_cr(line);
		if (detail::is_blank(line))
			continue;
		std::vector<std::string> tokens;
		std::string cur;
		auto flush = [&] {
			if (!cur.empty()) {
				tokens.push_back(std::move(cur));
				cur.clear();
				if (tokens.size() > opts.max_tokens_per_line)
					throw DatasetError("line " + std::to_string(line_no) + " exceeds the limit of " +
					                   std::to_string(opts.max_tokens_per_line) + " tokens");
			}
		};
		for (char c : line) {
			if (c == ',' || c == ' ' || c == '\t')
				flush();
			else
				cur.push_back(c);
		}
		flush();
		if (tokens.empty())
			continue;
		for (const auto& t : tokens)
			vocabulary.emplace(t, 0);
		transactions.push_back(std::move(tokens));
	}
	if (transactions.empty())
		throw DatasetError("no transactions found (empty input)");

	std::vector<std::string> col_labels;
	col_labels.reserve(vocabulary.size());
	for (auto& [token, idx] : vocabulary) {
		idx = col_labels.size();
		col_labels.push_back(token);
	}
	std::vector<Cell> cells;
	for (std::size_t i = 0; i < transactions.size(); ++i)
		for (const auto& t : transactions[i])
			cells.emplace_back(i, vocabulary.at(t));
	return BinaryDataset(detail::numbered_labels(transactions.size(), ""), std::move(col_labels), cells, true);
}

inline BinaryDataset load_transactions(const std::string& path, const TransactionOptions& opts = {}) {
	auto in = detail::open_input(path);
	return parse_transactions(in, opts);
}

/// Dense 0/1 CSV. A header row is detected when the first cell of the first
/// record is not 0/1; a row-label column when the header's first cell is
/// empty or some data record starts with a value other than 0/1. Either can
/// be forced through CsvOptions.
inline BinaryDataset parse_dense_csv(std::istream& in, const CsvOptions& opts = {}) {
	std::vector<std::vector<std::string>> records;
	std::string line;
	while (std::getline(in, line)) {
		detail::strip_cr(line);
		if (detail::is_blank(line))
			continue;
		records.push_back(detail::split_csv(line));
	}
	if (records.empty())
		throw DatasetError("CSV input is empty");

	const bool has_header = opts.has_header.value_or(!detail::is_binary_cell(records.front().front()));
	if (has_header && records.size() == 1)
		throw DatasetError("CSV input has a header but no data rows");
	const std::size_t first_data = has_header ? 1 : 0;
	bool has_row_labels = false;
	if (opts.has_row_labels) {
		has_row_labels = *opts.has_row_labels;
	} else {
		has_row_labels = has_header && records.front().front().empty();
		for (std::size_t r = first_data; r < records.size() && !has_row_labels; ++r)
			has_row_labels = !detail::is_binary_cell(records[r].front());
	}

	const std::size_t width = records[first_data].size();
	const std::size_t offset = has_row_labels ? 1 : 0;
	if (width <= offset)
		throw DatasetError("CSV rows contain no data columns");
	const std::size_t d = width - offset;

	std::vector<std::string> col_labels;
	if (has_header) {
		const auto& header = records.front();
		if (header.size() != width)
			throw DatasetError("CSV header has " + std::to_string(header.size()) + " fields, rows have " +
			                   std::to_string(width));
		col_labels.assign(header.begin() + static_cast<std::ptrdiff_t>(offset), header.end());
	} else {
		col_labels = detail::numbered_labels(d, "V");
	}

	std::vector<std::string> row_labels;
	std::vector<Cell> cells;
	for (std::size_t r = first_data; r < records.size(); ++r) {
		const auto& rec = records[r];
		const std::size_t i = r - first_data;
		if (rec.size() != width)
			throw DatasetError("ragged CSV: data row " + std::to_string(i) + " has " + std::to_string(rec.size()) +
			                   " fields, expected " + std::to_string(width));
		row_labels.push_back(has_row_labels ? rec.front() : std::to_string(i + 1));
		for (std::size_t j = 0; j < d; ++j) {
			const auto& v = rec[j + offset];
			if (!detail::is_binary_cell(v))
				throw DatasetError("non-binary value '" + v + "' at cell (" + std::to_string(i) + "," +
				                   std::to_string(j) + ")");
			if (v == "1")
				cells.emplace_back(i, j);
		}
	}
	return BinaryDataset(std::move(row_labels), std::move(col_labels), cells);
}

inline BinaryDataset load_dense_csv(const std::string& path, const CsvOptions& opts = {}) {
	auto in = detail::open_input(path);
	return parse_dense_csv(in, opts);
}

/// Lines "row_label,col_label" meaning X = 1. Rows keep first-appearance
/// order; columns are sorted lexicographically. Repeated pairs collapse.
inline BinaryDataset parse_triplets(std::istream& in) {
	std::vector<std::string> row_labels;
	std::unordered_map<std::string, std::size_t> row_index;
	std::map<std::string, std::size_t> col_index;
	std::vector<std::pair<std::size_t, std::string>> raw;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		detail::strip_cr(line);
		if (detail::is_blank(line))
			continue;
		auto fields = detail::split_csv(line);
		if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
			throw DatasetError("triplet line " + std::to_string(line_no) + " must be 'row_label,col_label'");
		auto [it, inserted] = row_index.emplace(fields[0], row_labels.size());
		if (inserted)
			row_labels.push_back(fields[0]);
		col_index.emplace(fields[1], 0);
		raw.emplace_back(it->second, std::move(fields[1]));
	}
	if (raw.empty())
		throw DatasetError("triplet input is empty");
	std::vector<std::string> col_labels;
	for (auto& [label, idx] : col_index) {
		idx = col_labels.size();
		col_labels.push_back(label);
	}
	std::vector<Cell> cells;
	cells.reserve(raw.size());
	for (const auto& [i, label] : raw)
		cells.emplace_back(i, col_index.at(label));
	return BinaryDataset(std::move(row_labels), std::move(col_labels), cells, true);
}

inline BinaryDataset load_triplets(const std::string& path) {
	auto in = detail::open_input(path);
	return parse_triplets(in);
}

inline BinaryDataset load_dataset(const std::string& path, InputFormat format, const CsvOptions& csv = {},
                                  const TransactionOptions& tx = {}) {
	switch (format) {
	case InputFormat::transactions: return load_transactions(path, tx);
	case InputFormat::csv: return load_dense_csv(path, csv);
	case InputFormat::triplets: return load_triplets(path);
	}
	throw DatasetError("unknown input format");
}

/// Dense CSV with a header row and a row-label column (empty corner cell).
inline void write_dense_csv(const BinaryDataset& ds, std::ostream& out) {
	out << "";
	for (const auto& label : ds.col_labels())
		out << ',' << detail::quote_csv(label);
	out << '\n';
	const auto rows = ds.rows();
	for (std::size_t i = 0; i < ds.n(); ++i) {
		out << detail::quote_csv(ds.row_labels()[i]);
		std::size_t next = 0;
		for (std::size_t j = 0; j < ds.d(); ++j) {
			const bool one = next < rows[i].size() && rows[i][next] == j;
			if (one)
				++next;
			out << ',' << (one ? '1' : '0');
		}
		out << '\n';
	}
}

/// One line per row listing the labels of its ones, space separated.
/// Row labels are not preserved by this format.
inline void write_transactions(const BinaryDataset& ds, std::ostream& out) {
	const auto rows = ds.rows();
	for (const auto& row : rows) {
		for (std::size_t k = 0; k < row.size(); ++k)
			out << (k ? " " : "") << ds.col_labels()[row[k]];
		out << '\n';
	}
}

inline void write_triplets(const BinaryDataset& ds, std::ostream& out) {
	for (const auto& [i, j] : ds.cells())
		out << detail::quote_csv(ds.row_labels()[i]) << ',' << detail::quote_csv(ds.col_labels()[j]) << '\n';
}

} // namespace lamb
