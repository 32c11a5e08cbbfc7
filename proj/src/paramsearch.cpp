#include "kneadlab/paramsearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kneadlab/errors.hpp"
#include "kneadlab/fastmap.hpp"
#include "kneadlab/parallel.hpp"

namespace kneadlab {

namespace {

constexpr mpfr_prec_t kLow = 64;

double log2_abs(const Real& x) { return log_abs(x) / std::log(2.0); }

mpfr_prec_t round64(double bits) {
  if (!(bits > 128)) return 128;
  return static_cast<mpfr_prec_t>(std::ceil(bits / 64.0)) * 64;
}

Real with_prec(const Real& x, mpfr_prec_t p) {
  Real r(p);
  mpfr_set(r.get(), x.get(), MPFR_RNDN);
  return r;
}

// Symbol of x as seen by a comparison against target symbol t. For a
// critical target only the side of that critical point matters.
Symbol classify_against(const BimodalMap& m, const BigReal& x, Symbol t, std::size_t i) {
  if (t == Symbol::C1) {
    Sign s = certified_sign(x - m.c1());
    if (s == Sign::Undecidable) throw AmbiguousSymbol(i, "undecidable near c1");
    return s == Sign::Negative ? Symbol::I1 : s == Sign::Zero ? Symbol::C1 : Symbol::I2;
  }
  if (t == Symbol::C2) {
    Sign s = certified_sign(x - m.c2());
    if (s == Sign::Undecidable) throw AmbiguousSymbol(i, "undecidable near c2");
    return s == Sign::Negative ? Symbol::I2 : s == Sign::Zero ? Symbol::C2 : Symbol::I3;
  }
  return classify(m, x, i);
}

// Shooting function F(gamma) = g(c2) - x0, where x0 has itinerary m through
// the current map. F < 0 exactly when the kneading precedes m.
struct Shot {
  Real gamma;
  Real F;
  Real dF{kLow};
  double log2_gain = 0;    // log2 prod |g'(x_i)| over the pullback
  double log2_suffix = 0;  // largest log2 of a tail of that product
  bool clamped = false;
  mpfr_prec_t prec = 0;

  // log2 of the absolute error of F from rounding in the pullback
  double log2_err() const { return -static_cast<double>(prec) + log2_suffix - log2_gain + 8; }
  bool reliable() const { return F.is_zero() ? false : log2_abs(F) > log2_err() + 8; }
  int sign() const { return F.sgn(); }
};

Shot shoot(Family family, const Word& laps, int j, const Real& gamma, mpfr_prec_t P) {
  BimodalMap m = make_map(family, BigReal::exact(gamma), PrecisionContext(P));
  FastMap fm(m);
  const mpfr_prec_t wp = fm.prec();
  Shot s;
  s.gamma = gamma;
  s.prec = wp;
  Real x = fm.critical(j);
  Real dx = with_prec(j == 1 ? fm.dc1() : fm.dc2(), kLow);
  Real gx(wp), d(wp), dg(kLow);
  double suffix = 0, best = 0;
  for (std::size_t i = laps.size(); i-- > 0;) {
    bool cl = false;
    x = fm.inverse(lap_index(laps[i]), x, &cl);
    s.clamped = s.clamped || cl;
    fm.eval_d(x, gx, d);
    fm.dgamma_near(x, dg);
    mpfr_sub(dx.get(), dx.get(), dg.get(), MPFR_RNDN);
    if (!d.is_zero()) mpfr_div(dx.get(), dx.get(), d.get(), MPFR_RNDN);
    if (!d.is_zero()) suffix += log2_abs(d);
    best = std::max(best, suffix);
  }
  s.log2_gain = suffix;
  s.log2_suffix = best;
  s.F = Real(wp);
  mpfr_sub(s.F.get(), fm.v().get(), x.get(), MPFR_RNDN);
  // g'(c2) vanishes, so only the explicit parameter dependence remains
  Real dv(kLow);
  fm.dgamma_low(fm.c2(), dv);
  mpfr_sub(s.dF.get(), dv.get(), dx.get(), MPFR_RNDN);
  return s;
}

bool inside(const Real& x, const Real& a, const Real& b) {
  return mpfr_cmp(x.get(), a.get()) > 0 && mpfr_cmp(x.get(), b.get()) < 0;
}

Real offset(const Real& c, double log2_delta, int sgn, mpfr_prec_t p) {
  Real r(p);
  Real d(kLow);
  mpfr_set_ui_2exp(d.get(), 1, static_cast<long>(std::floor(log2_delta)), MPFR_RNDN);
  if (sgn < 0)
    mpfr_sub(r.get(), c.get(), d.get(), MPFR_RNDD);
  else
    mpfr_add(r.get(), c.get(), d.get(), MPFR_RNDU);
  return r;
}

}  // namespace

Real ParamInterval::point(std::size_t i, std::size_t n) const {
  if (i == 0) return lo.value();
  if (i >= n) return hi.value();
  const mpfr_prec_t p = std::max(lo.prec(), hi.prec()) + 64;
  Real w(p), r(p);
  mpfr_sub(w.get(), hi.value().get(), lo.value().get(), MPFR_RNDN);
  mpfr_mul_ui(w.get(), w.get(), static_cast<unsigned long>(i), MPFR_RNDN);
  mpfr_div_ui(w.get(), w.get(), static_cast<unsigned long>(n), MPFR_RNDN);
  mpfr_add(r.get(), lo.value().get(), w.get(), MPFR_RNDN);
  return r;
}

Ordering compare_kneading(Family family, const Real& gamma, const ItinerarySeq& target, mpfr_prec_t& bits,
                          std::size_t max_depth, mpfr_prec_t max_bits) {
  const std::size_t depth = target.is_finite() ? *target.length() : max_depth;
  bits = std::max<mpfr_prec_t>(bits, 64);
  for (;;) {
    BimodalMap m = make_map(family, BigReal::exact(gamma), PrecisionContext(bits));
    try {
      BigReal v = m.eval(m.c2());
      int parity = 1;
      for (std::size_t i = 0; i < depth; ++i) {
        const Symbol t = target.at(i);
        const Symbol s = classify_against(m, v, t, i);
        if (s != t) {
          const bool below = s < t;
          return below == (parity > 0) ? Ordering::Less : Ordering::Greater;
        }
        if (is_critical(s)) return Ordering::Equal;
        parity *= sign(s);
        v = m.eval(v);
      }
      return Ordering::Equal;
    } catch (const AmbiguousSymbol&) {
      if (bits * 2 > max_bits) throw;
      bits *= 2;
    }
  }
}

Word certified_kneading(Family family, const Real& gamma, std::size_t depth, mpfr_prec_t& bits) {
  bits = std::max<mpfr_prec_t>(bits, 64);
  for (;;) {
    try {
      return kneading2(make_map(family, BigReal::exact(gamma), PrecisionContext(bits)), depth);
    } catch (const AmbiguousSymbol&) {
      if (bits * 2 > kMaxSearchBits) throw;
      bits *= 2;
    }
  }
}

OrbitProfile profile_at(Family family, const Real& gamma, std::size_t depth, std::size_t symbols,
                        mpfr_prec_t& bits, const std::vector<std::size_t>& keep) {
  bits = std::max<mpfr_prec_t>(bits, 64);
  for (;;) {
    OrbitProfile pr = orbit_profile(make_map(family, BigReal::exact(gamma), PrecisionContext(bits)), depth, keep);
    if (!pr.ambiguous_at || *pr.ambiguous_at >= symbols) return pr;
    if (bits * 2 > kMaxSearchBits)
      throw AmbiguousSymbol(*pr.ambiguous_at, "orbit symbol undecidable at maximal precision");
    bits *= 2;
  }
}

bool certify_prefix(const ParamInterval& interval, const Word& prefix, int samples, mpfr_prec_t bits) {
  const std::size_t n = static_cast<std::size_t>(std::max(samples, 0)) + 1;
  std::vector<char> ok(n + 1, 0);
  parallel_for(n + 1, [&](std::size_t i) {
    mpfr_prec_t b = std::max(bits, interval.bits);
    Word k = certified_kneading(interval.family, interval.point(i, n), prefix.size(), b);
    ok[i] = k.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), k.begin());
  });
  return std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
}

ParamInterval full_window(Family family, const PrecisionContext& ctx) {
  ParamInterval w;
  w.family = family;
  w.lo = BigReal(0, ctx.bits);
  w.hi = parameter_bound(family);
  w.bits = ctx.bits;
  mpfr_prec_t b = ctx.bits;
  Word klo = certified_kneading(family, w.lo.value(), 16, b);
  Word khi = certified_kneading(family, w.hi.value(), 16, b);
  std::size_t c = 0;
  while (c < klo.size() && c < khi.size() && klo[c] == khi[c] && is_lap(klo[c])) ++c;
  Word prefix(klo.begin(), klo.begin() + static_cast<long>(c));
  while (!prefix.empty() && !certify_prefix(w, prefix, w.samples, b)) prefix.pop_back();
  w.certified_prefix = prefix;
  return w;
}

FastPullback fast_pullback(const FastMap& fm, const Word& w, int j) {
  FastPullback out;
  out.x = fm.critical(j);
  Real gx(fm.prec()), d(fm.prec()), e(fm.prec());
  out.log_d.assign(w.size(), -std::numeric_limits<double>::infinity());
  out.log2_gap.assign(w.size(), -std::numeric_limits<double>::infinity());
  auto gap = [&](const Real& c) {
    mpfr_sub(e.get(), out.x.get(), c.get(), MPFR_RNDN);
    return e.is_zero() ? -std::numeric_limits<double>::infinity() : log2_abs(e);
  };
  for (std::size_t i = w.size(); i-- > 0;) {
    bool cl = false;
    out.x = fm.inverse(lap_index(w[i]), out.x, &cl);
    out.clamped = out.clamped || cl;
    fm.eval_d(out.x, gx, d);
    if (!d.is_zero()) {
      const double l2 = log2_abs(d);
      out.log2_gain += l2;
      out.log_d[i] = l2 * 0.69314718055994530942;
    }
    out.log2_gap[i] = std::min(gap(fm.c1()), gap(fm.c2()));
  }
  return out;
}

FoundParam find_param_bracket(Family family, const ItinerarySeq& m, const ParamInterval& window,
                              const FindOptions& opts) {
  if (!m.is_finite() || m.head().empty()) throw InvalidArgument("find_param needs a finite target");
  const Word& w = m.head();
  const Word laps(w.begin(), w.end() - 1);
  for (Symbol s : laps)
    if (!is_lap(s)) throw InvalidSequence("target has a critical symbol before its end");
  if (!is_minimal(m)) throw NotMinimal("target " + m.text() + " is not minimal");
  const int j = w.back() == Symbol::C1 ? 1 : 2;
  const double tol_log2 = opts.tol_log2.value_or(-static_cast<double>(opts.bits) / 2);
  const Real& a0 = window.lo.value();
  const Real& b0 = window.hi.value();
  if (mpfr_cmp(a0.get(), b0.get()) >= 0) throw InvalidArgument("empty parameter window");

  FoundParam out;
  mpfr_prec_t base = std::max({opts.bits, window.bits, a0.prec(), b0.prec()});
  {
    mpfr_prec_t cap = std::min(kMaxSearchBits, std::max<mpfr_prec_t>(base * 8, 8192));
    auto order = [&](const Real& g) -> std::optional<Ordering> {
      mpfr_prec_t b = base;
      try {
        Ordering o = compare_kneading(family, g, m, b, w.size(), cap);
        base = std::max(base, b);
        return o;
      } catch (const AmbiguousSymbol&) {
        return std::nullopt;
      }
    };
    auto olo = order(a0);
    auto ohi = order(b0);
    if (olo != Ordering::Less || ohi != Ordering::Greater)
      throw OrderViolation("target " + m.text() + " not strictly between the window's kneading sequences");
  }

  // precision able to separate points of the window
  Real width(kLow);
  mpfr_sub(width.get(), b0.get(), a0.get(), MPFR_RNDD);
  mpfr_prec_t P = std::max(base, round64(-log2_abs(width) + 128));
  auto shot_at = [&](const Real& g) {
    for (;;) {
      Shot s = shoot(family, laps, j, g, P);
      ++out.evaluations;
      mpfr_prec_t need = round64(s.log2_suffix - tol_log2 + 96);
      if (need > P) {
        P = need;
        continue;
      }
      if (s.reliable() || P * 2 > kMaxSearchBits) return s;
      double want = 1.5 * static_cast<double>(P);
      if (!s.F.is_zero()) want = std::max(want, s.log2_suffix - s.log2_gain - log2_abs(s.F) + 64);
      P = round64(want);
    }
  };

  Real a = a0, b = b0;
  Shot sa = shot_at(a), sb = shot_at(b);
  Real center;
  double tolg_log2 = 0;
  bool converged = false;
  if (sa.sign() < 0 && sb.sign() > 0) {
    auto newton_len = [](const Shot& s) {
      if (s.dF.is_zero()) return std::numeric_limits<double>::infinity();
      return log2_abs(s.F) - log2_abs(s.dF);
    };
    Shot cur = newton_len(sa) < newton_len(sb) ? sa : sb;
    double last_step = std::numeric_limits<double>::infinity();
    double prev_step = last_step;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const double dF = cur.dF.is_zero() ? 0.0 : log2_abs(cur.dF);
      tolg_log2 = tol_log2 - dF - cur.log2_gain;
      const mpfr_prec_t pg = std::max({P + 64, a.prec(), b.prec(), round64(-tolg_log2 + 64)});
      Real wab(kLow);
      mpfr_sub(wab.get(), b.get(), a.get(), MPFR_RNDU);
      if (cur.F.is_zero()) {
        center = cur.gamma;
        converged = true;
        break;
      }
      if (log2_abs(wab) <= tolg_log2 + 1) {
        center = exact_midpoint(a, b);
        converged = true;
        break;
      }
      Real cand(pg);
      bool have = false;
      if (!cur.clamped && !cur.dF.is_zero()) {
        Real q(kLow);
        mpfr_div(q.get(), cur.F.get(), cur.dF.get(), MPFR_RNDN);
        const double step = log2_abs(q);
        if (step <= tolg_log2 - 2) {
          center = cur.gamma;
          converged = true;
          break;
        }
        mpfr_sub(cand.get(), cur.gamma.get(), q.get(), MPFR_RNDN);
        // insist on steps shrinking at least like bisection
        have = inside(cand, a, b) && step < prev_step - 1;
        prev_step = last_step;
        last_step = step;
      }
      if (!have) {
        // secant between the bracket ends, then midpoint
        Real fa = with_prec(sa.F, kLow), fb = with_prec(sb.F, kLow), den(kLow), t(kLow);
        mpfr_sub(den.get(), fb.get(), fa.get(), MPFR_RNDN);
        mpfr_div(t.get(), fa.get(), den.get(), MPFR_RNDN);
        Real wd(pg);
        mpfr_sub(wd.get(), b.get(), a.get(), MPFR_RNDN);
        mpfr_mul(wd.get(), wd.get(), t.get(), MPFR_RNDN);
        mpfr_sub(cand.get(), a.get(), wd.get(), MPFR_RNDN);
        // fraction of the bracket from a; may lie far below double range
        Real tt(kLow);
        mpfr_neg(tt.get(), t.get(), MPFR_RNDN);
        const bool proper = tt.sgn() > 0 && mpfr_cmp_ui(tt.get(), 1) < 0;
        const bool near_a = mpfr_cmp_d(tt.get(), 1.0 / 64) < 0;
        const bool near_b = mpfr_cmp_d(tt.get(), 63.0 / 64) > 0;
        if (proper && inside(cand, a, b) && (near_a || near_b)) {
          // root hugging one end: step to the geometric mean of the secant
          // fraction and the midpoint, halving its log distance each time
          Real frac(kLow), wf(pg);
          if (near_a) {
            mpfr_sqrt(frac.get(), tt.get(), MPFR_RNDN);
          } else {
            mpfr_sub(den.get(), fa.get(), fb.get(), MPFR_RNDN);
            mpfr_div(frac.get(), fb.get(), den.get(), MPFR_RNDN);  // 1 - tt
            mpfr_sqrt(frac.get(), frac.get(), MPFR_RNDN);
          }
          mpfr_sub(wf.get(), b.get(), a.get(), MPFR_RNDN);
          mpfr_mul(wf.get(), wf.get(), frac.get(), MPFR_RNDN);
          if (near_a)
            mpfr_add(cand.get(), a.get(), wf.get(), MPFR_RNDN);
          else
            mpfr_sub(cand.get(), b.get(), wf.get(), MPFR_RNDN);
        }
        if (!proper || !inside(cand, a, b) || it % 3 == 2) cand = exact_midpoint(a, b);
        last_step = prev_step = std::numeric_limits<double>::infinity();
      }
      Shot s = shot_at(cand);
      if (s.sign() == 0) {
        center = cand;
        converged = true;
        break;
      }
      if (s.sign() < 0) {
        a = cand;
        sa = s;
      } else {
        b = cand;
        sb = s;
      }
      cur = std::move(s);
    }
  }

  // certification of the bracket ends
  mpfr_prec_t cert = std::max(P, base);
  if (converged) {
    const mpfr_prec_t pg = std::max({P + 64, a0.prec(), b0.prec(), round64(-tolg_log2 + 64)});
    for (int widen = 0; widen < 6; ++widen, tolg_log2 += 4) {
      Real lo = offset(center, tolg_log2, -1, pg), hi = offset(center, tolg_log2, +1, pg);
      if (!inside(lo, a0, b0)) lo = a0;
      if (!inside(hi, a0, b0)) hi = b0;
      try {
        mpfr_prec_t bl = cert;
        Ordering ol = compare_kneading(family, lo, m, bl, w.size());
        mpfr_prec_t bh = cert;
        Ordering oh = compare_kneading(family, hi, m, bh, w.size());
        if (ol != Ordering::Less || oh != Ordering::Greater) continue;
        out.lo = lo;
        out.hi = hi;
        out.bits = std::max(bl, bh);
        BigReal mid = BigReal::exact(exact_midpoint(lo, hi));
        Real half(kLow);
        mpfr_sub(half.get(), hi.get(), lo.get(), MPFR_RNDU);
        mpfr_div_2ui(half.get(), half.get(), 1, MPFR_RNDU);
        out.gamma = mid.widened(half);
        return out;
      } catch (const AmbiguousSymbol&) {
        cert *= 2;
      }
    }
  }

  // certified bisection on kneading comparisons
  out.bisection_fallback = true;
  Real lo = a0, hi = b0;
  mpfr_prec_t bits = cert;
  const double goal = converged ? tolg_log2 : tol_log2 - 4;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Real wab(kLow);
    mpfr_sub(wab.get(), hi.get(), lo.get(), MPFR_RNDU);
    if (log2_abs(wab) <= goal) {
      out.lo = lo;
      out.hi = hi;
      out.bits = bits;
      Real half(kLow);
      mpfr_div_2ui(half.get(), wab.get(), 1, MPFR_RNDU);
      out.gamma = BigReal::exact(exact_midpoint(lo, hi)).widened(half);
      return out;
    }
    Real mid = exact_midpoint(lo, hi);
    Ordering o;
    try {
      o = compare_kneading(family, mid, m, bits, w.size());
    } catch (const AmbiguousSymbol&) {
      break;
    }
    ++out.evaluations;
    if (o == Ordering::Less)
      lo = mid;
    else if (o == Ordering::Greater)
      hi = mid;
    else
      break;
  }
  throw BracketLost("could not isolate a parameter for " + m.text());
}

BigReal find_param(Family family, const ItinerarySeq& m, const ParamInterval& window, const PrecisionContext& ctx) {
  FindOptions o;
  o.bits = ctx.bits;
  return find_param_bracket(family, m, window, o).gamma;
}

ConvPair conv_pair(Family family, const Word& s, std::size_t k, const ParamInterval& window,
                   const FindOptions& opts) {
  ConvPair out;
  out.s_prime = s + repeat(Symbol::I2, k + 1);
  if (sign(out.s_prime) != 1) throw ParityViolation("sign of S I2^(k+1) is negative");
  const ItinerarySeq m1 = ItinerarySeq::finite(out.s_prime + Word{Symbol::C1});
  const ItinerarySeq m2 = ItinerarySeq::finite(out.s_prime + Word{Symbol::C2});
  if (!is_minimal(m1) || !is_minimal(m2)) throw NotMinimal("S I2^(k+1) c_j is not minimal");

  out.first = find_param_bracket(family, m1, window, opts);
  ParamInterval right = window;
  right.lo = BigReal::exact(out.first.hi);
  right.bits = std::max(window.bits, out.first.bits);
  out.second = find_param_bracket(family, m2, right, opts);
  if (mpfr_cmp(out.first.hi.get(), out.second.lo.get()) >= 0)
    throw BracketLost("brackets of the two parameters overlap");

  ParamInterval& iv = out.interval;
  iv.family = family;
  iv.lo = BigReal::exact(out.first.hi);
  iv.hi = BigReal::exact(out.second.lo);
  iv.samples = window.samples;
  iv.bits = std::max(out.first.bits, out.second.bits);
  iv.certified_prefix = out.s_prime + Word{Symbol::I2};
  if (!certify_prefix(iv, iv.certified_prefix, iv.samples, iv.bits))
    throw BracketLost("sampled kneading prefix failed on the new interval");
  return out;
}

}  // namespace kneadlab
