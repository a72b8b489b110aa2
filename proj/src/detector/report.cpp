#include <cstdio>
#include <sstream>
#include <string>

#include "ltood/detector/detector.hpp"

namespace ltood::detector {

using nlohmann::json;

namespace {

json pool_json(const PoolMetrics& p) {
  return {{"name", p.name},   {"auroc", p.auroc},       {"aupr", p.aupr},
          {"fpr95", p.fpr95}, {"eta", p.eta},           {"id_count", p.id_count},
          {"ood_count", p.ood_count}};
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

// Right-aligns by display width; multi-byte UTF-8 sequences count once.
std::string pad_left(const std::string& s, std::size_t width) {
  std::size_t cols = 0;
  for (unsigned char ch : s) cols += (ch & 0xC0) != 0x80;
  return std::string(width > cols ? width - cols : 0, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

json to_json(const MetricsReport& r) {
  json pools = json::array();
  for (const auto& p : r.pools) pools.push_back(pool_json(p));
  return {{"pools", pools},
          {"average", pool_json(r.average)},
          {"acc", r.accuracy.acc},
          {"head_acc", optional_json(r.accuracy.head_acc)},
          {"tail_acc", optional_json(r.accuracy.tail_acc)},
          {"head_samples", r.accuracy.head_count},
          {"tail_samples", r.accuracy.tail_count}};
}

std::string to_table(const MetricsReport& r) {
  constexpr std::size_t kName = 16;
  constexpr std::size_t kCol = 9;
  std::ostringstream os;
  os << pad_right("D_out^test", kName);
  for (const char* h : {"AUROC↑", "AUPR↑", "FPR95↓", "ACC↑"}) os << pad_left(h, kCol);
  os << '\n';
  auto row = [&](const PoolMetrics& p) {
    os << pad_right(p.name, kName);
    for (double v : {p.auroc, p.aupr, p.fpr95, r.accuracy.acc}) os << pad_left(pct(v), kCol);
    os << '\n';
  };
  for (const auto& p : r.pools) row(p);
  os << std::string(kName + 4 * kCol, '-') << '\n';
  row(r.average);
  auto opt = [](const std::optional<double>& v) { return v ? pct(*v) : std::string("n/a"); };
  os << "ID accuracy: overall " << pct(r.accuracy.acc) << "  head "
     << opt(r.accuracy.head_acc) << "  tail " << opt(r.accuracy.tail_acc) << '\n';
  return os.str();
}

}  // namespace ltood::detector
