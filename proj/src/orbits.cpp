#include "kneadlab/orbits.hpp"

#include <algorithm>
#include <memory>

#include "kneadlab/errors.hpp"

namespace kneadlab {

namespace {

// Lap of lap symbol as closed interval of exact points.
void lap_bounds(const FastMap& fm, int lap, Real& lo, Real& hi) {
  const mpfr_prec_t p = fm.prec();
  lo = Real(p);
  hi = Real(p);
  switch (lap) {
    case 1:
      mpfr_set_zero(lo.get(), 1);
      mpfr_set(hi.get(), fm.c1().get(), MPFR_RNDN);
      break;
    case 2:
      mpfr_set(lo.get(), fm.c1().get(), MPFR_RNDN);
      mpfr_set(hi.get(), fm.c2().get(), MPFR_RNDN);
      break;
    default:
      mpfr_set(lo.get(), fm.c2().get(), MPFR_RNDN);
      mpfr_set_ui(hi.get(), 1, MPFR_RNDN);
      break;
  }
}

// The map itself, or a copy rebuilt when more working bits are requested.
class MapLadder {
 public:
  explicit MapLadder(const BimodalMap& m) : base_(m), higher_(std::make_shared<std::vector<BimodalMap>>()) {}
  const BimodalMap& at(mpfr_prec_t bits) const {
    if (bits <= base_.prec()) return base_;
    for (const auto& h : *higher_)
      if (h.prec() >= bits) return h;
    higher_->push_back(make_map(base_.family(), base_.gamma(), PrecisionContext(bits)));
    return higher_->back();
  }

 private:
  const BimodalMap& base_;
  std::shared_ptr<std::vector<BimodalMap>> higher_;
};

}  // namespace

BigReal OrbitDiagnostics::d_np(std::size_t n, std::size_t p) const {
  if (n + p >= d.size()) throw InvalidArgument("d_np: index beyond computed depth");
  return d[n + p] / d[n];
}

Symbol classify(const BimodalMap& m, const BigReal& x, std::size_t index) {
  Sign s1 = certified_sign(x - m.c1());
  if (s1 == Sign::Undecidable)
    throw AmbiguousSymbol(index, "symbol at index " + std::to_string(index) + " undecidable near c1");
  if (s1 == Sign::Negative) return Symbol::I1;
  if (s1 == Sign::Zero) return Symbol::C1;
  Sign s2 = certified_sign(x - m.c2());
  if (s2 == Sign::Undecidable)
    throw AmbiguousSymbol(index, "symbol at index " + std::to_string(index) + " undecidable near c2");
  if (s2 == Sign::Negative) return Symbol::I2;
  if (s2 == Sign::Zero) return Symbol::C2;
  return Symbol::I3;
}

Word itinerary(const BimodalMap& m, const BigReal& x, std::size_t depth) {
  Word w;
  w.reserve(depth);
  BigReal cur = x;
  for (std::size_t n = 0; n < depth; ++n) {
    Symbol s = classify(m, cur, n);
    w.push_back(s);
    if (is_critical(s)) break;
    if (n + 1 < depth) cur = m.eval(cur);
  }
  return w;
}

Word kneading2(const BimodalMap& m, std::size_t depth) { return itinerary(m, m.eval(m.c2()), depth); }

Word kneading_at(Family family, const BigReal& gamma, std::size_t depth, const PrecisionContext& ctx) {
  PrecisionContext c = ctx;
  for (;;) {
    BimodalMap m = make_map(family, gamma, c);
    try {
      return kneading2(m, depth);
    } catch (const AmbiguousSymbol&) {
      if (!c.can_escalate()) throw;
      c = c.escalated();
    }
  }
}

BigReal fixed_point_r(const BimodalMap& m) {
  MapLadder ladder(m);
  SmoothFunction f = [ladder](const BigReal& x, mpfr_prec_t bits) {
    BigReal v, d;
    ladder.at(bits).eval_jet(x, v, d);
    return std::make_pair(v - x, d - BigReal(1));
  };
  Real tol(kErrPrec);
  mpfr_set_ui_2exp(tol.get(), 1, -static_cast<long>(m.prec()) + 8, MPFR_RNDN);
  RootBracket br = refine_root(f, BigReal::exact(m.c1().value()), BigReal::exact(m.c2().value()),
                               BigReal::exact(tol), PrecisionContext(m.prec()));
  return br.enclosure();
}

BigReal branch_inverse(const FastMap& fm, Symbol lap, const BigReal& y) {
  if (!is_lap(lap)) throw InvalidArgument("branch_inverse needs a lap symbol");
  const BimodalMap& m = fm.map();
  const int j = lap_index(lap);
  const bool increasing = j != 2;
  Real lap_lo, lap_hi;
  lap_bounds(fm, j, lap_lo, lap_hi);
  bool clamped = false;
  Real xh = fm.inverse(j, y.value(), &clamped);
  const mpfr_prec_t p = fm.prec();

  Real e(kErrPrec);
  long ex = xh.is_zero() ? 0 : mpfr_get_exp(xh.get());
  mpfr_set_ui_2exp(e.get(), 1, ex - static_cast<long>(p) + 8, MPFR_RNDU);
  if (!y.err().is_zero()) {
    Real gx(p), dg(p);
    fm.eval_d(xh, gx, dg);
    if (!dg.is_zero()) {
      Real e2(kErrPrec);
      mpfr_div(e2.get(), y.err().get(), dg.get(), MPFR_RNDU);
      mpfr_abs(e2.get(), e2.get(), MPFR_RNDU);
      mpfr_mul_2ui(e2.get(), e2.get(), 1, MPFR_RNDU);
      if (mpfr_cmp(e2.get(), e.get()) > 0) mpfr_set(e.get(), e2.get(), MPFR_RNDU);
    }
  }
  for (int attempt = 0; attempt < 80; ++attempt) {
    Real lo(p + 2), hi(p + 2);
    mpfr_sub(lo.get(), xh.get(), e.get(), MPFR_RNDD);
    mpfr_add(hi.get(), xh.get(), e.get(), MPFR_RNDU);
    bool lo_end = false, hi_end = false;
    if (mpfr_cmp(lo.get(), lap_lo.get()) <= 0) {
      mpfr_set(lo.get(), lap_lo.get(), MPFR_RNDN);
      lo_end = true;
    }
    if (mpfr_cmp(hi.get(), lap_hi.get()) >= 0) {
      mpfr_set(hi.get(), lap_hi.get(), MPFR_RNDN);
      hi_end = true;
    }
    BigReal glo = m.eval(BigReal::exact(lo)) - y;
    BigReal ghi = m.eval(BigReal::exact(hi)) - y;
    Sign slo = certified_sign(glo), shi = certified_sign(ghi);
    const Sign want_lo = increasing ? Sign::Negative : Sign::Positive;
    const Sign want_hi = increasing ? Sign::Positive : Sign::Negative;
    if (slo == want_lo && shi == want_hi) {
      BigReal out = BigReal::exact(exact_midpoint(lo, hi));
      Real w(kErrPrec);
      mpfr_sub(w.get(), hi.get(), lo.get(), MPFR_RNDU);
      mpfr_div_2ui(w.get(), w.get(), 1, MPFR_RNDU);
      return out.at_prec(p).widened(w);
    }
    // a certified sign on the wrong side at a lap end means y is off the branch image
    if ((lo_end && decided(slo) && slo != want_lo) || (hi_end && decided(shi) && shi != want_hi))
      throw NotRealizable("branch_inverse: value outside the image of lap " + std::to_string(j));
    if (lo_end && hi_end)
      throw NotRealizable("branch_inverse: preimage in lap " + std::to_string(j) + " not separable");
    mpfr_mul_2ui(e.get(), e.get(), 2, MPFR_RNDU);
  }
  throw NotRealizable("branch_inverse: enclosure did not certify");
}

BigReal branch_inverse(const BimodalMap& m, Symbol lap, const BigReal& y) {
  FastMap fm(m);
  return branch_inverse(fm, lap, y);
}

BigReal realize_point(const BimodalMap& m, const ItinerarySeq& iota) {
  if (!iota.is_finite()) throw InvalidArgument("realize_point needs a finite sequence");
  const Word& w = iota.head();
  const std::size_t n = w.size();
  // admissibility against the map's kneading prefix
  Word k;
  bool k_finite = false;
  try {
    k = kneading2(m, n + 2);
    k_finite = is_critical(k.back());
  } catch (const AmbiguousSymbol& a) {
    k = kneading2(m, a.index());
  }
  std::optional<bool> adm;
  if (k_finite)
    adm = is_admissible(iota, ItinerarySeq::finite(k));
  else
    adm = is_admissible_prefix(iota, k);
  if (adm && !*adm) throw NotAdmissible("sequence " + iota.text() + " is not admissible for this map");

  const BigReal& target = w.back() == Symbol::C1 ? m.c1() : m.c2();
  if (n == 1) return target;
  FastMap fm(m);
  BigReal x = target;
  for (std::size_t i = n - 1; i-- > 0;) x = branch_inverse(fm, w[i], x);
  return x;
}

bool realizes(const BimodalMap& m, const BigReal& x, const ItinerarySeq& iota) {
  if (!iota.is_finite()) throw InvalidArgument("realizes needs a finite sequence");
  const Word& w = iota.head();
  BigReal cur = x;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    try {
      if (classify(m, cur, i) != w[i]) return false;
    } catch (const AmbiguousSymbol&) {
      return false;
    }
    cur = m.eval(cur);
  }
  const BigReal& c = w.back() == Symbol::C1 ? m.c1() : m.c2();
  Sign s = certified_sign(cur - c);
  return s == Sign::Zero || s == Sign::Undecidable;
}

std::vector<Period2Orbit> period2_orbits(const BimodalMap& m) {
  FastMap fm(m);
  MapLadder ladder(m);
  SmoothFunction f = [ladder](const BigReal& x, mpfr_prec_t bits) {
    const BimodalMap& g = ladder.at(bits);
    BigReal v1, d1, v2, d2;
    g.eval_jet(x, v1, d1);
    g.eval_jet(v1, v2, d2);
    return std::make_pair(v2 - x, d1 * d2 - BigReal(1));
  };
  std::vector<Period2Orbit> out;
  struct Labels {
    Symbol a, b;
  };
  const Labels labels[3] = {{Symbol::I1, Symbol::I2}, {Symbol::I1, Symbol::I3}, {Symbol::I2, Symbol::I3}};
  Real tol(kErrPrec);
  mpfr_set_ui_2exp(tol.get(), 1, -static_cast<long>(m.prec()) + 8, MPFR_RNDN);
  // an inexact parameter blurs g^2(x) - x by about its err; stop above that
  Real blur(kErrPrec);
  mpfr_mul_2si(blur.get(), m.gamma().err().get(), 16, MPFR_RNDU);
  if (mpfr_cmp(blur.get(), tol.get()) > 0) tol = blur;
  for (const Labels& s : labels) {
    BigReal lo, hi;
    try {
      if (s.a == Symbol::I1 && s.b == Symbol::I2) {
        lo = branch_inverse(fm, Symbol::I1, m.c1());
        hi = branch_inverse(fm, Symbol::I1, m.c2());
      } else if (s.a == Symbol::I1) {
        lo = branch_inverse(fm, Symbol::I1, m.c2());
        hi = m.c1();
      } else {
        lo = m.c1();
        hi = branch_inverse(fm, Symbol::I2, m.c2());
      }
      RootBracket br = refine_root(f, BigReal::exact(lo.value()), BigReal::exact(hi.value()),
                                   BigReal::exact(tol), PrecisionContext(m.prec()));
      Period2Orbit o;
      o.label = {s.a, s.b};
      o.p = br.enclosure();
      BigReal dp, dq;
      m.eval_jet(o.p, o.q, dp);
      BigReal back;
      m.eval_jet(o.q, back, dq);
      o.multiplier = abs(dp * dq);
      out.push_back(std::move(o));
    } catch (const NotRealizable& e) {
      throw NotFound(std::string("period-2 orbit bracket: ") + e.what());
    } catch (const NoSignChange& e) {
      throw NotFound(std::string("period-2 orbit bracket: ") + e.what());
    }
  }
  return out;
}

OrbitDiagnostics diagnostics(const BimodalMap& m, std::size_t depth) {
  OrbitDiagnostics od;
  od.depth = depth;
  od.v.reserve(depth);
  od.d.reserve(depth);
  if (depth == 0) return od;
  BigReal v = m.eval(m.c2());
  BigReal d(1, m.prec());
  for (std::size_t n = 0; n < depth; ++n) {
    od.v.push_back(v);
    od.d.push_back(d);
    if (n + 1 == depth) break;
    BigReal nv, dv;
    m.eval_jet(v, nv, dv);
    d = d * abs(dv);
    v = std::move(nv);
  }
  return od;
}

BigReal lap_multiplier(const BimodalMap& m, int j) {
  switch (j) {
    case 1: return abs(m.deriv(BigReal(0, m.prec())));
    case 2: return abs(m.deriv(fixed_point_r(m)));
    case 3: return abs(m.deriv(BigReal(1, m.prec())));
    default: throw InvalidArgument("lap index must be 1, 2 or 3");
  }
}

OrbitProfile orbit_profile(const BimodalMap& m, std::size_t depth, const std::vector<std::size_t>& keep) {
  OrbitProfile pr;
  pr.symbols.reserve(depth);
  pr.v.reserve(depth);
  pr.log_d_lo.reserve(depth + 1);
  pr.log_d_hi.reserve(depth + 1);
  pr.log_d_lo.push_back(0.0);
  pr.log_d_hi.push_back(0.0);
  std::vector<std::size_t> want = keep;
  std::sort(want.begin(), want.end());
  std::size_t wi = 0;
  BigReal v = m.eval(m.c2());
  for (std::size_t n = 0; n < depth; ++n) {
    pr.v.push_back(v.to_double());
    while (wi < want.size() && want[wi] < n) ++wi;
    if (wi < want.size() && want[wi] == n) pr.kept.emplace_back(n, v);
    if (!pr.ambiguous_at) {
      try {
        pr.symbols.push_back(classify(m, v, n));
      } catch (const AmbiguousSymbol&) {
        pr.ambiguous_at = n;
      }
    }
    BigReal nv, dv;
    m.eval_jet(v, nv, dv);
    auto [lo, hi] = log_abs_bounds(dv);
    pr.log_d_lo.push_back(pr.log_d_lo.back() + lo);
    pr.log_d_hi.push_back(pr.log_d_hi.back() + hi);
    v = std::move(nv);
  }
  return pr;
}

}  // namespace kneadlab
