#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "conind/error.hpp"

namespace conind {

/// Images × neurons matrix of non-negative, finite activations (row-major).
class ActivationMatrix {
 public:
  ActivationMatrix() = default;

  ActivationMatrix(std::vector<std::string> image_ids, std::size_t neurons, std::vector<double> values)
      : image_ids_(std::move(image_ids)), neurons_(neurons), values_(std::move(values)) {
    if (values_.size() != image_ids_.size() * neurons_) throw Error("activation matrix shape mismatch");
    for (std::size_t r = 0; r < image_ids_.size(); ++r) {
      if (!rows_.emplace(image_ids_[r], r).second) throw Error("duplicate image_id '" + image_ids_[r] + "'");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error("non-finite activation");
      if (v < 0.0) throw Error("negative activation");
    }
  }

  std::size_t images() const noexcept { return image_ids_.size(); }
  std::size_t neurons() const noexcept { return neurons_; }
  const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }

  double at(std::size_t row, std::size_t neuron) const { return values_[row * neurons_ + neuron]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * neurons_, neurons_}; }

  std::vector<double> column(std::size_t neuron) const {
    if (neuron >= neurons_) throw Error("neuron index " + std::to_string(neuron) + " out of range");
    std::vector<double> col(image_ids_.size());
    for (std::size_t r = 0; r < col.size(); ++r) col[r] = at(r, neuron);
    return col;
  }

  /// Row index for an image id; throws UnknownImage.
  std::size_t row_of(const std::string& image_id) const {
    auto it = rows_.find(image_id);
    if (it == rows_.end()) throw UnknownImage(image_id);
    return it->second;
  }

 private:
  std::vector<std::string> image_ids_;
  std::size_t neurons_ = 0;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> rows_;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses the activation CSV: header `image_id,n0,...,n{K-1}`, then one row per image.
inline ActivationMatrix parse_activations(std::istream& in, const std::string& source = "<activations>") {
  std::string line;
  std::size_t line_no = 0;
  std::size_t neurons = 0;
  bool have_header = false;
  std::vector<std::string> ids;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (!have_header) {
      if (detail::trim(fields[0]) != "image_id") throw InputError(source, line_no, "header must start with 'image_id'");
      for (std::size_t k = 1; k < fields.size(); ++k) {
        if (detail::trim(fields[k]) != "n" + std::to_string(k - 1))
          throw InputError(source, line_no, "header column " + std::to_string(k) + " must be 'n" +
                                                std::to_string(k - 1) + "'");
      }
      neurons = fields.size() - 1;
      have_header = true;
      continue;
    }
    if (fields.size() != neurons + 1)
      throw InputError(source, line_no, "expected " + std::to_string(neurons + 1) + " fields, got " +
                                            std::to_string(fields.size()));
    std::string id(detail::trim(fields[0]));
    if (id.empty()) throw InputError(source, line_no, "empty image_id");
    if (!seen.emplace(id, line_no).second) throw InputError(source, line_no, "duplicate image_id '" + id + "'");
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto text = detail::trim(fields[k]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw InputError(source, line_no, "bad number '" + std::string(text) + "' in column n" + std::to_string(k - 1));
      if (!std::isfinite(v)) throw InputError(source, line_no, "non-finite activation in column n" + std::to_string(k - 1));
      if (v < 0.0) throw InputError(source, line_no, "negative activation in column n" + std::to_string(k - 1));
      values.push_back(v);
    }
    ids.push_back(std::move(id));
  }
  if (!have_header) throw InputError(source, 0, "missing header");
  return ActivationMatrix(std::move(ids), neurons, std::move(values));
}

inline ActivationMatrix load_activations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open activation file");
  return parse_activations(in, path);
}

/// Writes the CSV contract; values use the shortest round-trip representation.
inline void write_activations(std::ostream& out, const ActivationMatrix& m) {
  out << "image_id";
  for (std::size_t k = 0; k < m.neurons(); ++k) out << ",n" << k;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < m.images(); ++r) {
    out << m.image_ids()[r];
    for (double v : m.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

/// Positive/negative image sets of one neuron, in matrix row order.
struct NeuronPartition {
  std::size_t neuron = 0;
  double max_activation = 0.0;
  double hi_threshold = 0.0;
  double lo_threshold = 0.0;
  std::vector<std::string> positive_set;
  std::vector<std::string> negative_set;
};

/// Splits images by activation relative to the neuron's maximum.
///
/// Positive: a >= hi_fraction * max. Negative: a <= lo_fraction * max. Both bounds inclusive,
/// compared exactly. Images strictly between belong to neither set. Throws DeadNeuron when max == 0.
inline NeuronPartition partition_neuron(const ActivationMatrix& m, std::size_t neuron, double hi_fraction = 0.8,
                                        double lo_fraction = 0.2) {
  if (!(lo_fraction >= 0.0 && lo_fraction < hi_fraction && hi_fraction <= 1.0))
    throw Error("fractions must satisfy 0 <= lo < hi <= 1");
  if (neuron >= m.neurons()) throw Error("neuron index " + std::to_string(neuron) + " out of range");

  NeuronPartition p;
  p.neuron = neuron;
  for (std::size_t r = 0; r < m.images(); ++r) p.max_activation = std::max(p.max_activation, m.at(r, neuron));
  if (p.max_activation == 0.0) throw DeadNeuron(neuron);
  p.hi_threshold = hi_fraction * p.max_activation;
  p.lo_threshold = lo_fraction * p.max_activation;
  for (std::size_t r = 0; r < m.images(); ++r) {
    const double a = m.at(r, neuron);
    if (a >= p.hi_threshold) {
      p.positive_set.push_back(m.image_ids()[r]);
    } else if (a <= p.lo_threshold) {
      p.negative_set.push_back(m.image_ids()[r]);
    }
  }
  return p;
}

}  // namespace conind
