#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kneadlab {

// Listed in their natural (positional) order.
enum class Symbol : std::uint8_t { I1 = 0, C1 = 1, I2 = 2, C2 = 3, I3 = 4 };

enum class Ordering { Less = -1, Equal = 0, Greater = 1 };

using Word = std::vector<Symbol>;

inline bool is_critical(Symbol s) { return s == Symbol::C1 || s == Symbol::C2; }
inline bool is_lap(Symbol s) { return !is_critical(s); }
int sign(Symbol s);              // +1, 0 or -1
int sign(const Word& w);         // product of symbol signs
char symbol_char(Symbol s);      // "1","A","2","B","3"
Symbol symbol_from_char(char c);
Symbol lap_symbol(int j);        // 1..3
int lap_index(Symbol s);         // 1..3 for laps
const char* to_string(Ordering o);

std::string to_text(const Word& w);
Word word_from_text(std::string_view text);  // laps and critical symbols, no tail
Word power(const Word& s, std::size_t n);
Word operator+(Word a, const Word& b);
Word repeat(Symbol s, std::size_t n);

// A finite sequence ending in a critical symbol, or an eventually constant
// infinite sequence head·s^inf.
class ItinerarySeq {
 public:
  static ItinerarySeq finite(Word head);
  static ItinerarySeq periodic(Word head, Symbol tail);
  static ItinerarySeq parse(std::string_view text);
  // Finite when the word ends in a critical symbol; otherwise throws.
  static ItinerarySeq from_word(const Word& w);

  const Word& head() const { return head_; }
  const std::optional<Symbol>& tail() const { return tail_; }
  bool is_finite() const { return !tail_; }
  // Number of symbols; nullopt for infinite sequences.
  std::optional<std::size_t> length() const;
  Symbol at(std::size_t i) const;  // i < length
  // First n symbols (fewer if the sequence is shorter).
  Word prefix(std::size_t n) const;
  std::string text() const;

  bool operator==(const ItinerarySeq& o) const { return head_ == o.head_ && tail_ == o.tail_; }
  bool operator!=(const ItinerarySeq& o) const { return !(*this == o); }

 private:
  ItinerarySeq(Word head, std::optional<Symbol> tail) : head_(std::move(head)), tail_(tail) {}
  Word head_;
  std::optional<Symbol> tail_;
};

Ordering cmp(const ItinerarySeq& a, const ItinerarySeq& b);
inline bool precedes(const ItinerarySeq& a, const ItinerarySeq& b) { return cmp(a, b) == Ordering::Less; }

// Comparison of a sequence against a finite observed prefix of another
// sequence (e.g. a kneading prefix). nullopt when the prefix is too short to
// decide.
std::optional<Ordering> cmp_with_prefix(const ItinerarySeq& a, const Word& b_prefix);
// Signed comparison of two words at their first difference; nullopt when one
// is a prefix of the other.
std::optional<Ordering> cmp_words(const Word& a, const Word& b);

ItinerarySeq shift(const ItinerarySeq& a);
ItinerarySeq shift(const ItinerarySeq& a, std::size_t k);

bool is_minimal(const ItinerarySeq& m);
bool is_admissible(const ItinerarySeq& iota, const ItinerarySeq& k);
// Same test against a kneading sequence known only through a prefix; nullopt
// if the prefix does not decide some comparison.
std::optional<bool> is_admissible_prefix(const ItinerarySeq& iota, const Word& k_prefix);

ItinerarySeq concat_power(const Word& s, std::size_t n, const ItinerarySeq& tail);

}  // namespace kneadlab
