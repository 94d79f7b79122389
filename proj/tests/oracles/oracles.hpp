#pragma once
// Naive reference implementations used only by the tests. They follow the
// textbook definitions directly and share no code with the library.
#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Dist {
  std::vector<double> pf;
  std::vector<double> pm;
};

/// Lowercase alphabetic runs; anything else separates.
inline std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// +1 female, -1 male, 0 neutral; ties go to the first gendered word.
inline int lean(const std::string& s, const std::set<std::string>& fem, const std::set<std::string>& mal) {
  int f = 0, m = 0, first = 0;
  for (const auto& w : words(s)) {
    int g = fem.count(w) ? 1 : mal.count(w) ? -1 : 0;
    if (g == 0) continue;
    if (first == 0) first = g;
    (g > 0 ? f : m) += 1;
  }
  if (f > m) return 1;
  if (m > f) return -1;
  return first;
}

inline double gas(const std::vector<std::string>& conts, const std::set<std::string>& fem,
                  const std::set<std::string>& mal) {
  double hits = 0;
  for (const auto& c : conts) {
    bool any = false;
    for (const auto& w : words(c)) any = any || fem.count(w) || mal.count(w);
    hits += any ? 1 : 0;
  }
  return hits / static_cast<double>(conts.size());
}

struct Split {
  double f, m, delta;
};

inline Split gas_split(const std::vector<std::string>& conts, const std::set<std::string>& fem,
                       const std::set<std::string>& mal) {
  double nf = 0, nm = 0;
  for (const auto& c : conts) {
    int l = lean(c, fem, mal);
    if (l > 0) nf += 1;
    if (l < 0) nm += 1;
  }
  if (nf + nm == 0) return {0, 0, 0};
  double f = nf / (nf + nm), m = nm / (nf + nm);
  return {f, m, std::fabs(f - m)};
}

inline double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

inline double gld(const std::vector<Dist>& X) {
  double total = 0;
  for (const auto& x : X) {
    double F = sum(x.pf), M = sum(x.pm);
    total += (F + M) == 0 ? 0.0 : std::fabs(F - M) / (F + M);
  }
  return total / static_cast<double>(X.size());
}

/// a ln(2a/(a+b)) with 0 ln 0 = 0.
inline double xlog(double a, double b) { return a == 0 ? 0.0 : a * std::log(2 * a / (a + b)); }

inline double add_raw(const std::vector<Dist>& X, double eps) {
  double total = 0;
  for (const auto& x : X) {
    for (std::size_t i = 0; i < x.pf.size(); ++i) {
      double a = x.pf[i] + eps, b = x.pm[i] + eps;
      total += xlog(a, b) + xlog(b, a);
    }
  }
  return total / (2.0 * static_cast<double>(X.size()));
}

struct Losses {
  double d, g, l;
};

inline Losses losses(const std::vector<Dist>& X, double eps) {
  Losses out{0, 0, 0};
  for (const auto& x : X) {
    for (std::size_t i = 0; i < x.pf.size(); ++i) {
      double a = x.pf[i] + eps, b = x.pm[i] + eps;
      out.d += 0.5 * (xlog(a, b) + xlog(b, a));
    }
    double F = sum(x.pf), M = sum(x.pm);
    out.g += F + M;
    out.l += (F + M) == 0 ? 0.0 : std::fabs(F - M) / (F + M);
  }
  return out;
}

/// Central differences of f at x.
inline std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Decoding by explicit set construction.
struct Decoded {
  std::vector<long double> probs;
  std::set<std::size_t> support;
};

inline std::vector<long double> softmax_ld(const std::vector<double>& logits, double tau) {
  std::vector<long double> out(logits.size());
  if (tau == 0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    out[best] = 1;
    return out;
  }
  long double mx = *std::max_element(logits.begin(), logits.end());
  long double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += std::exp((logits[i] - mx) / tau);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp((logits[i] - mx) / tau) / z;
  return out;
}

/// Rank of i: entries before it in descending-probability, lowest-index-first order.
inline std::size_t rank_of(const std::vector<long double>& p, std::size_t i) {
  std::size_t r = 0;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (p[j] > p[i] || (p[j] == p[i] && j < i)) ++r;
  return r;
}

inline std::set<std::size_t> top_k_set(const std::vector<long double>& p, std::size_t k) {
  std::set<std::size_t> s;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (k == 0 || rank_of(p, i) < k) s.insert(i);
  return s;
}

/// Entry i is kept iff the mass strictly ahead of it is still below p.
inline std::set<std::size_t> top_p_set(const std::vector<long double>& q, double p) {
  std::set<std::size_t> s;
  if (p >= 1.0) {
    for (std::size_t i = 0; i < q.size(); ++i) s.insert(i);
    return s;
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::size_t r = rank_of(q, i);
    long double ahead = 0;
    for (std::size_t j = 0; j < q.size(); ++j)
      if (rank_of(q, j) < r) ahead += q[j];
    if (ahead < p) s.insert(i);
  }
  return s;
}

inline std::vector<long double> restrict(const std::vector<long double>& p, const std::set<std::size_t>& keep) {
  long double z = 0;
  for (auto i : keep) z += p[i];
  std::vector<long double> out(p.size(), 0.0L);
  for (auto i : keep) out[i] = p[i] / z;
  return out;
}

inline Decoded decode(const std::vector<double>& logits, double tau, std::size_t k, double p) {
  auto q = softmax_ld(logits, tau);
  if (tau == 0) return {q, top_k_set(q, 1)};
  auto kq = restrict(q, top_k_set(q, k));
  std::set<std::size_t> nonzero;
  for (std::size_t i = 0; i < kq.size(); ++i)
    if (kq[i] > 0) nonzero.insert(i);
  auto ps = top_p_set(kq, p);
  std::set<std::size_t> both;
  for (auto i : ps)
    if (nonzero.count(i)) both.insert(i);
  return {restrict(kq, both), both};
}

}  // namespace oracle
