#pragma once

// Straight-line reference for the reward terms. Written from the formulas,
// not from the engine: every input is a number the caller already knows.

#include <algorithm>
#include <cmath>

namespace oracle {

struct Inputs {
  bool afmt = false;  // answer pair in order
  bool tfmt = false;  // think pair in order
  bool rfmt = false;  // rethink pair in order
  bool zfmt = false;  // zoom nested in think with at least one box
  double n_u = 0;     // unique words in the think reasoning
  double total = 0;   // total words in the think reasoning
  double n_u_rethink = 0;
  bool exact = false;         // answer equals ground truth after trim + lowercase
  double gpt = 0;             // judge score for non-exact answers
  bool have_judge = true;
  double k = 0;
  double n = 0;
  bool stage2 = false;
  bool counting = false;
  double gt_count = 0;
};

struct Terms {
  double afmt, tfmt, rfmt, zfmt, fmt, ans, zoom, revo, T, S, f_d, total;
};

inline double ind(bool b) { return b ? 1.0 : 0.0; }

inline Terms evaluate(const Inputs& x) {
  Terms t{};
  t.f_d = x.total > 0 ? x.n_u / x.total : 0.0;
  t.afmt = ind(x.afmt);
  t.tfmt = 0.5 * ind(x.tfmt);
  t.rfmt = 0.5 * ind(x.rfmt);
  t.zfmt = ind(x.zfmt) * ind(x.n_u >= 5) *
           (0.1 * ind(t.f_d < 0.4) + ind(t.f_d >= 0.4) * (0.5 + 0.5 * std::min(1.0, std::log(x.n_u + 1) / std::log(20.0))));
  t.fmt = t.afmt + t.tfmt + t.rfmt + t.zfmt;

  const double passes = x.have_judge && !x.exact ? ind(x.gpt >= 0.7) : 0.0;
  t.ans = ind(x.afmt) * std::max(ind(x.exact), 0.5 * passes);

  t.T = ind(x.zfmt) * ind(x.n_u >= 5) * (0.1 * ind(t.f_d < 0.4) + ind(t.f_d >= 0.4));
  t.S = ind(x.zfmt) * (0.1 + 0.9 * ind(x.n_u >= 5) * ind(t.f_d >= 0.4));
  const double f_box = x.n > 0 ? x.k / x.n : 0.0;
  const double g_box = x.n - x.k;
  double h_box = 0;
  if (x.gt_count > 0) h_box = x.k / x.gt_count;
  else h_box = x.k == 0 ? 1.0 : 0.0;
  double z = 0;
  if (x.n == 0) z = 0;
  else if (!x.stage2) z = t.T * f_box;
  else if (x.counting) z = t.S * std::max(0.0, std::min(1.0, h_box) - 0.05 * g_box);
  else z = t.S * f_box;
  t.zoom = std::min(1.0, std::max(0.0, z));

  t.revo = (0.5 + 0.5 * ind(x.afmt)) * ind(x.n_u_rethink >= 5) * std::min(1.0, 0.2 * std::sqrt(x.n_u_rethink));

  t.total = 0.5 * t.zfmt + 0.1 * (t.afmt + t.tfmt + t.rfmt) + 2.0 * t.ans + 1.0 * t.zoom + 0.5 * t.revo;
  return t;
}

}  // namespace oracle
