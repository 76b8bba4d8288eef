#pragma once

// Synthetic benchmark generators in UCR row format (label first, comma
// separated). Both families are machine-generated by construction:
//
// CBF (cylinder / bell / funnel, Saito 1994): x(t) = (6+eta)*chi_[a,b](t)*g(t)
// + eps(t) with a ~ U{16..32}, b-a ~ U{32..96}, eta, eps(t) ~ N(0,1); g is 1
// for the cylinder, the rising ramp (t-a)/(b-a) for the bell and the falling
// ramp (b-t)/(b-a) for the funnel. Labels: 1=cylinder, 2=bell, 3=funnel.
//
// TwoPatterns (Geurts 2001): standard normal background with two
// non-overlapping step patterns (amplitude +-5) embedded at random positions;
// the ordered pair (up/down, up/down) defines four classes:
// 1=DD, 2=DU, 3=UD, 4=UU.

#include <fstream>

#include "core.hpp"
#include "random.hpp"

namespace itsc {

namespace detail {

inline void write_ucr_rows(const std::string& path,
                           const std::vector<std::pair<int, std::vector<double>>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write dataset file: " + path);
  char buf[64];
  for (const auto& [label, values] : rows) {
    out << label;
    for (const double v : values) {
      std::snprintf(buf, sizeof(buf), ",%.9g", v);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace detail

inline std::vector<double> make_cbf_series(int cls, int length, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> start_dist(16, 32);
  std::uniform_int_distribution<int> width_dist(32, 96);
  const int a = start_dist(rng);
  const int b = a + width_dist(rng);
  const double amp = 6.0 + gauss(rng);
  std::vector<double> x(length);
  for (int t = 1; t <= length; ++t) {
    double shape = 0.0;
    if (t >= a && t <= b) {
      switch (cls) {
        case 0: shape = 1.0; break;                                              // cylinder
        case 1: shape = static_cast<double>(t - a) / (b - a); break;             // bell
        default: shape = static_cast<double>(b - t) / (b - a); break;            // funnel
      }
    }
    x[t - 1] = amp * shape + gauss(rng);
  }
  return x;
}

// Balanced CBF file: per_class samples of each of the three classes, T=length.
inline void write_cbf_ucr(const std::string& path, int per_class, int length,
                          std::uint64_t seed) {
  require(per_class >= 1 && length >= 16, "write_cbf_ucr: bad sizes");
  Rng rng(mix_seed(seed, 0x636266ULL));
  std::vector<std::pair<int, std::vector<double>>> rows;
  rows.reserve(static_cast<std::size_t>(per_class) * 3);
  for (int i = 0; i < per_class; ++i)
    for (int cls = 0; cls < 3; ++cls) rows.emplace_back(cls + 1, make_cbf_series(cls, length, rng));
  detail::write_ucr_rows(path, rows);
}

inline std::vector<double> make_two_patterns_series(int cls, int length, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> width_dist(21, 32);
  const int w1 = width_dist(rng), w2 = width_dist(rng);
  // place both windows without overlap: gap >= 1 between them
  std::uniform_int_distribution<int> s1_dist(0, length - w1 - w2 - 2);
  const int s1 = s1_dist(rng);
  std::uniform_int_distribution<int> s2_dist(s1 + w1 + 1, length - w2 - 1);
  const int s2 = s2_dist(rng);
  std::vector<double> x(length);
  for (int t = 0; t < length; ++t) x[t] = gauss(rng);
  const bool first_up = cls == 2 || cls == 3;   // classes: 0=DD 1=DU 2=UD 3=UU
  const bool second_up = cls == 1 || cls == 3;
  auto put_step = [&](int start, int width, bool up) {
    const int half = width / 2;
    for (int t = 0; t < width; ++t)
      x[start + t] = (t < half) == up ? -5.0 : 5.0;
  };
  put_step(s1, w1, first_up);
  put_step(s2, w2, second_up);
  return x;
}

inline void write_two_patterns_ucr(const std::string& path, int per_class, int length,
                                   std::uint64_t seed) {
  require(per_class >= 1 && length >= 70, "write_two_patterns_ucr: bad sizes");
  Rng rng(mix_seed(seed, 0x74776f70ULL));
  std::vector<std::pair<int, std::vector<double>>> rows;
  rows.reserve(static_cast<std::size_t>(per_class) * 4);
  for (int i = 0; i < per_class; ++i)
    for (int cls = 0; cls < 4; ++cls)
      rows.emplace_back(cls + 1, make_two_patterns_series(cls, length, rng));
  detail::write_ucr_rows(path, rows);
}

}  // namespace itsc
