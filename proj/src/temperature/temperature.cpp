#include "ltood/temperature/temperature.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ltood/error.hpp"

namespace ltood::temperature {

const char* variant_name(Variant v) {
  return v == Variant::sqrt ? "sqrt" : "linear";
}

Variant parse_variant(const std::string& s) {
  if (s == "sqrt") return Variant::sqrt;
  if (s == "linear") return Variant::linear;
  throw std::invalid_argument("unknown temperature variant '" + s +
                              "' (expected sqrt or linear)");
}

Schedule::Schedule(double tau, int epochs, Variant variant,
                   std::vector<double> normalized)
    : tau_(tau), epochs_(epochs), variant_(variant),
      normalized_(std::move(normalized)) {
  if (!(tau_ > 0.0)) throw DomainError("temperature tau must be positive");
  if (epochs_ < 1) throw std::invalid_argument("schedule needs E >= 1");
  if (normalized_.empty()) throw std::invalid_argument("schedule needs classes");
  for (double n : normalized_) {
    if (!(n >= 0.0 && n < 1.0)) {
      // n_c = 1 (a single nonzero class) would drive the temperature to 0.
      throw DomainError("normalized class count must lie in [0, 1), got " +
                        std::to_string(n));
    }
  }
}

double Schedule::adjust(int epoch, int cls) const {
  if (epoch < 0 || epoch > epochs_) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(epochs_) + "]");
  }
  if (cls < 0 || cls >= num_classes()) {
    throw std::out_of_range("class " + std::to_string(cls) + " out of range");
  }
  const double progress = static_cast<double>(epoch) / epochs_;
  const double n = normalized_[static_cast<std::size_t>(cls)];
  const double t = variant_ == Variant::sqrt
                       ? tau_ * (1.0 - std::sqrt(progress) * std::sqrt(n))
                       : tau_ * (1.0 - progress * n);
  assert(t > 0.0);
  return t;
}

std::vector<double> Schedule::at_epoch(int epoch) const {
  std::vector<double> out;
  for (int c = 0; c < num_classes(); ++c) out.push_back(adjust(epoch, c));
  return out;
}

nd::Tensor Schedule::table() const {
  const auto rows = static_cast<std::size_t>(epochs_ + 1);
  const auto cols = static_cast<std::size_t>(num_classes());
  nd::Tensor t = nd::Tensor::zeros({rows, cols});
  for (std::size_t e = 0; e < rows; ++e) {
    for (std::size_t c = 0; c < cols; ++c) {
      t(e, c) = adjust(static_cast<int>(e), static_cast<int>(c));
    }
  }
  return t;
}

void write_table_csv(std::ostream& os, const Schedule& s) {
  os << "epoch";
  for (int c = 1; c <= s.num_classes(); ++c) os << ",class_" << c;
  os << '\n';
  const nd::Tensor t = s.table();
  char buf[32];
  for (std::size_t e = 0; e < t.rows(); ++e) {
    os << e;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, t(e, c));
      (void)ec;
      os << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    os << '\n';
  }
}

}  // namespace ltood::temperature
