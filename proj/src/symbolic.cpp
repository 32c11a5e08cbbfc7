#include "kneadlab/symbolic.hpp"

#include <algorithm>

#include "kneadlab/errors.hpp"

namespace kneadlab {

int sign(Symbol s) {
  switch (s) {
    case Symbol::I1:
    case Symbol::I3: return 1;
    case Symbol::I2: return -1;
    default: return 0;
  }
}

int sign(const Word& w) {
  int s = 1;
  for (Symbol x : w) s *= sign(x);
  return s;
}

char symbol_char(Symbol s) {
  static constexpr char chars[] = {'1', 'A', '2', 'B', '3'};
  return chars[static_cast<int>(s)];
}

Symbol symbol_from_char(char c) {
  switch (c) {
    case '1': return Symbol::I1;
    case 'A': return Symbol::C1;
    case '2': return Symbol::I2;
    case 'B': return Symbol::C2;
    case '3': return Symbol::I3;
    default: throw InvalidSequence(std::string("unknown symbol '") + c + "'");
  }
}

Symbol lap_symbol(int j) {
  switch (j) {
    case 1: return Symbol::I1;
    case 2: return Symbol::I2;
    case 3: return Symbol::I3;
    default: throw InvalidArgument("lap index must be 1, 2 or 3");
  }
}

int lap_index(Symbol s) {
  switch (s) {
    case Symbol::I1: return 1;
    case Symbol::I2: return 2;
    case Symbol::I3: return 3;
    default: throw InvalidArgument("critical symbol has no lap index");
  }
}

const char* to_string(Ordering o) {
  switch (o) {
    case Ordering::Less: return "Less";
    case Ordering::Equal: return "Equal";
    case Ordering::Greater: return "Greater";
  }
  return "?";
}

std::string to_text(const Word& w) {
  std::string s;
  s.reserve(w.size());
  for (Symbol x : w) s += symbol_char(x);
  return s;
}

Word word_from_text(std::string_view text) {
  Word w;
  w.reserve(text.size());
  for (char c : text) w.push_back(symbol_from_char(c));
  return w;
}

Word power(const Word& s, std::size_t n) {
  Word out;
  out.reserve(s.size() * n);
  for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), s.begin(), s.end());
  return out;
}

Word operator+(Word a, const Word& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Word repeat(Symbol s, std::size_t n) { return Word(n, s); }

// ---------------------------------------------------------------------------

ItinerarySeq ItinerarySeq::finite(Word head) {
  if (head.empty()) throw InvalidSequence("finite sequence must be nonempty");
  if (!is_critical(head.back())) throw InvalidSequence("finite sequence must end in a critical symbol");
  for (std::size_t i = 0; i + 1 < head.size(); ++i)
    if (is_critical(head[i])) throw InvalidSequence("critical symbol before the last position");
  return ItinerarySeq(std::move(head), std::nullopt);
}

ItinerarySeq ItinerarySeq::periodic(Word head, Symbol tail) {
  if (!is_lap(tail)) throw InvalidSequence("repeated tail must be a lap symbol");
  for (Symbol s : head)
    if (is_critical(s)) throw InvalidSequence("infinite sequence contains a critical symbol");
  while (!head.empty() && head.back() == tail) head.pop_back();
  return ItinerarySeq(std::move(head), tail);
}

ItinerarySeq ItinerarySeq::from_word(const Word& w) { return finite(w); }

ItinerarySeq ItinerarySeq::parse(std::string_view text) {
  constexpr std::string_view inf = "^inf";
  if (text.size() >= inf.size() && text.substr(text.size() - inf.size()) == inf) {
    std::string_view body = text.substr(0, text.size() - inf.size());
    if (body.empty()) throw InvalidSequence("'^inf' needs a symbol to repeat");
    Word head = word_from_text(body.substr(0, body.size() - 1));
    return periodic(std::move(head), symbol_from_char(body.back()));
  }
  if (text.empty()) throw InvalidSequence("empty sequence");
  return finite(word_from_text(text));
}

std::optional<std::size_t> ItinerarySeq::length() const {
  if (tail_) return std::nullopt;
  return head_.size();
}

Symbol ItinerarySeq::at(std::size_t i) const {
  if (i < head_.size()) return head_[i];
  if (tail_) return *tail_;
  throw InvalidArgument("index past the end of a finite sequence");
}

Word ItinerarySeq::prefix(std::size_t n) const {
  if (!tail_) return Word(head_.begin(), head_.begin() + static_cast<long>(std::min(n, head_.size())));
  Word w(head_.begin(), head_.begin() + static_cast<long>(std::min(n, head_.size())));
  while (w.size() < n) w.push_back(*tail_);
  return w;
}

std::string ItinerarySeq::text() const {
  std::string s = to_text(head_);
  if (tail_) {
    s += symbol_char(*tail_);
    s += "^inf";
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

Ordering signed_order(Symbol x, Symbol y, int sg) {
  bool less = static_cast<int>(x) < static_cast<int>(y);
  if (sg < 0) less = !less;
  return less ? Ordering::Less : Ordering::Greater;
}

}  // namespace

Ordering cmp(const ItinerarySeq& a, const ItinerarySeq& b) {
  const bool both_infinite = !a.is_finite() && !b.is_finite();
  const std::size_t stable = std::max(a.head().size(), b.head().size());
  int sg = 1;
  for (std::size_t i = 0;; ++i) {
    if (both_infinite && i > stable) return Ordering::Equal;
    Symbol x = a.at(i);
    Symbol y = b.at(i);
    if (x != y) return signed_order(x, y, sg);
    if (is_critical(x)) return Ordering::Equal;
    sg *= sign(x);
  }
}

std::optional<Ordering> cmp_with_prefix(const ItinerarySeq& a, const Word& b) {
  int sg = 1;
  for (std::size_t i = 0; i < b.size(); ++i) {
    Symbol x = a.at(i);
    Symbol y = b[i];
    if (x != y) return signed_order(x, y, sg);
    if (is_critical(x)) return Ordering::Equal;
    sg *= sign(x);
  }
  return std::nullopt;
}

std::optional<Ordering> cmp_words(const Word& a, const Word& b) {
  int sg = 1;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return signed_order(a[i], b[i], sg);
    if (is_critical(a[i])) return Ordering::Equal;
    sg *= sign(a[i]);
  }
  return std::nullopt;
}

ItinerarySeq shift(const ItinerarySeq& a) {
  if (a.is_finite()) {
    if (a.head().size() <= 1) throw ShiftOfCritical("shift of a single critical symbol");
    return ItinerarySeq::finite(Word(a.head().begin() + 1, a.head().end()));
  }
  if (a.head().empty()) return a;
  return ItinerarySeq::periodic(Word(a.head().begin() + 1, a.head().end()), *a.tail());
}

ItinerarySeq shift(const ItinerarySeq& a, std::size_t k) {
  if (k == 0) return a;
  if (a.is_finite()) {
    if (k >= a.head().size()) throw ShiftOfCritical("shift past the critical symbol");
    return ItinerarySeq::finite(Word(a.head().begin() + static_cast<long>(k), a.head().end()));
  }
  std::size_t drop = std::min(k, a.head().size());
  return ItinerarySeq::periodic(Word(a.head().begin() + static_cast<long>(drop), a.head().end()),
                                *a.tail());
}

namespace {

// Number of distinct shifts worth checking (k = 0 .. count-1).
std::size_t shift_count(const ItinerarySeq& a) {
  return a.is_finite() ? a.head().size() : a.head().size() + 1;
}

std::size_t leading_i1(const ItinerarySeq& a) {
  std::size_t j = 0;
  while (j < a.head().size() && a.head()[j] == Symbol::I1) ++j;
  return j;
}

}  // namespace

bool is_minimal(const ItinerarySeq& m) {
  const std::size_t n = shift_count(m);
  const std::size_t len = m.is_finite() ? m.head().size() : 0;
  // m against its k-th shift, read in place
  for (std::size_t k = 1; k < n; ++k) {
    int sg = 1;
    for (std::size_t i = 0;; ++i) {
      if (!m.is_finite() && i > m.head().size()) break;  // both tails reached
      if (m.is_finite() && i + k >= len) break;
      Symbol x = m.at(i), y = m.at(i + k);
      if (x != y) {
        if (signed_order(x, y, sg) == Ordering::Greater) return false;
        break;
      }
      if (is_critical(x)) break;
      sg *= sign(x);
    }
  }
  return true;
}

bool is_admissible(const ItinerarySeq& iota, const ItinerarySeq& k) {
  std::size_t j = leading_i1(iota);
  if (j == iota.head().size() && !iota.is_finite() && *iota.tail() == Symbol::I1) return false;
  for (std::size_t p = j; p < shift_count(iota); ++p)
    if (cmp(shift(iota, p), k) == Ordering::Less) return false;
  return true;
}

std::optional<bool> is_admissible_prefix(const ItinerarySeq& iota, const Word& k_prefix) {
  std::size_t j = leading_i1(iota);
  if (j == iota.head().size() && !iota.is_finite() && *iota.tail() == Symbol::I1) return false;
  for (std::size_t p = j; p < shift_count(iota); ++p) {
    auto o = cmp_with_prefix(shift(iota, p), k_prefix);
    if (!o) return std::nullopt;
    if (*o == Ordering::Less) return false;
  }
  return true;
}

ItinerarySeq concat_power(const Word& s, std::size_t n, const ItinerarySeq& tail) {
  if (s.empty()) throw InvalidSequence("concat_power needs a nonempty word");
  for (Symbol x : s)
    if (is_critical(x)) throw InvalidSequence("concat_power word must consist of lap symbols");
  Word head = power(s, n) + tail.head();
  if (tail.is_finite()) return ItinerarySeq::finite(std::move(head));
  return ItinerarySeq::periodic(std::move(head), *tail.tail());
}

}  // namespace kneadlab
