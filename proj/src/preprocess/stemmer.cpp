#include "transicd/stemmer.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "utf8.hpp"

namespace transicd::preprocess {
namespace {

using Word = std::u32string;
using View = std::u32string_view;

bool is_vowel(char32_t c) {
  return c == U'a' || c == U'e' || c == U'i' || c == U'o' || c == U'u' || c == U'y';
}

bool is_vowel_wxy(char32_t c) { return is_vowel(c) || c == U'w' || c == U'x' || c == U'Y'; }

bool is_valid_li(char32_t c) {
  return View(U"cdeghkmnrt").find(c) != View::npos;
}

bool is_double(View tail) {
  static constexpr std::array<View, 9> kDoubles = {U"bb", U"dd", U"ff", U"gg", U"mm",
                                                   U"nn", U"pp", U"rr", U"tt"};
  return std::find(kDoubles.begin(), kDoubles.end(), tail) != kDoubles.end();
}

bool ends_with(View w, View suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

struct Rule {
  View suffix;
  int action;
};

// Longest rule whose suffix ends `w`; nullptr when none matches.
template <std::size_t N>
const Rule* longest_suffix(View w, const std::array<Rule, N>& rules) {
  const Rule* best = nullptr;
  for (const Rule& r : rules)
    if (ends_with(w, r.suffix) && (!best || r.suffix.size() > best->suffix.size())) best = &r;
  return best;
}

void replace_tail(Word& w, std::size_t suffix_len, View replacement) {
  w.replace(w.size() - suffix_len, suffix_len, replacement);
}

// Position just past the first non-vowel that follows a vowel, at or after `from`.
std::size_t region_after(View w, std::size_t from) {
  std::size_t i = from;
  while (i < w.size() && !is_vowel(w[i])) ++i;
  if (i >= w.size()) return w.size();
  ++i;
  while (i < w.size() && is_vowel(w[i])) ++i;
  if (i >= w.size()) return w.size();
  return i + 1;
}

class Stemmer {
 public:
  explicit Stemmer(Word w) : w_(std::move(w)) {}

  Word run() {
    if (exception()) return w_;
    if (w_.size() < 3) return w_;
    prelude();
    mark_regions();
    step_1a();
    step_1b();
    step_1c();
    step_2();
    step_3();
    step_4();
    step_5();
    std::replace(w_.begin(), w_.end(), U'Y', U'y');
    return w_;
  }

 private:
  bool exception() {
    static constexpr std::array<std::pair<View, View>, 15> kWords = {{
        {U"andes", U"andes"}, {U"atlas", U"atlas"},   {U"bias", U"bias"},
        {U"cosmos", U"cosmos"}, {U"early", U"earli"}, {U"gently", U"gentl"},
        {U"howe", U"howe"},   {U"idly", U"idl"},      {U"news", U"news"},
        {U"only", U"onli"},   {U"singly", U"singl"},  {U"skies", U"sky"},
        {U"skis", U"ski"},    {U"sky", U"sky"},       {U"ugly", U"ugli"},
    }};
    for (const auto& [from, to] : kWords) {
      if (w_ == from) {
        w_ = Word(to);
        return true;
      }
    }
    return false;
  }

  void prelude() {
    if (!w_.empty() && w_[0] == U'\'') w_.erase(0, 1);
    if (!w_.empty() && w_[0] == U'y') w_[0] = U'Y';
    for (std::size_t i = 0; i + 1 < w_.size(); ++i)
      if (is_vowel(w_[i]) && w_[i + 1] == U'y') w_[i + 1] = U'Y';
  }

  void mark_regions() {
    static constexpr std::array<View, 9> kPrefixes = {U"arsen", U"commun", U"emerg",
                                                      U"gener", U"inter",  U"later",
                                                      U"organ", U"past",   U"univers"};
    std::size_t prefix = 0;
    for (View p : kPrefixes)
      if (View(w_).substr(0, p.size()) == p) prefix = std::max(prefix, p.size());
    p1_ = prefix ? prefix : region_after(w_, 0);
    p2_ = p1_ >= w_.size() ? w_.size() : region_after(w_, p1_);
  }

  bool in_r1(std::size_t pos) const { return pos >= p1_; }
  bool in_r2(std::size_t pos) const { return pos >= p2_; }

  // Checks the characters before `end` for a short syllable.
  bool short_syllable(std::size_t end) const {
    View w = View(w_).substr(0, end);
    const std::size_t n = w.size();
    if (n >= 3 && !is_vowel_wxy(w[n - 1]) && is_vowel(w[n - 2]) && !is_vowel(w[n - 3]))
      return true;
    if (n == 2 && !is_vowel(w[1]) && is_vowel(w[0])) return true;
    return ends_with(w, U"past");
  }

  void step_1a() {
    static constexpr std::array<Rule, 3> kApostrophe = {{{U"'", 1}, {U"'s'", 1}, {U"'s", 1}}};
    if (const Rule* r = longest_suffix(w_, kApostrophe)) replace_tail(w_, r->suffix.size(), U"");

    static constexpr std::array<Rule, 6> kRules = {{
        {U"ied", 2}, {U"s", 3}, {U"ies", 2}, {U"sses", 1}, {U"ss", 0}, {U"us", 0},
    }};
    const Rule* r = longest_suffix(w_, kRules);
    if (!r) return;
    const std::size_t start = w_.size() - r->suffix.size();
    switch (r->action) {
      case 1:
        replace_tail(w_, r->suffix.size(), U"ss");
        break;
      case 2:
        replace_tail(w_, r->suffix.size(), start >= 2 ? View(U"i") : View(U"ie"));
        break;
      case 3: {
        // Delete the s if a vowel occurs before the letter preceding it.
        if (start == 0) return;
        for (std::size_t i = 0; i + 1 < start; ++i) {
          if (is_vowel(w_[i])) {
            w_.pop_back();
            return;
          }
        }
        break;
      }
      default:
        break;
    }
  }

  void step_1b() {
    static constexpr std::array<Rule, 6> kRules = {{
        {U"ed", 2}, {U"eed", 1}, {U"ing", 3}, {U"edly", 2}, {U"eedly", 1}, {U"ingly", 2},
    }};
    const Rule* r = longest_suffix(w_, kRules);
    if (!r) return;
    const std::size_t start = w_.size() - r->suffix.size();
    View stem = View(w_).substr(0, start);

    if (r->action == 1) {
      if (!in_r1(start)) return;
      if (stem == U"succ" || stem == U"proc" || stem == U"exc") return;
      replace_tail(w_, r->suffix.size(), U"ee");
      return;
    }
    if (r->action == 3) {
      static constexpr std::array<Rule, 7> kIng = {{
          {U"even", 2}, {U"cann", 2}, {U"inn", 2}, {U"earr", 2}, {U"herr", 2}, {U"out", 2}, {U"y", 1},
      }};
      if (const Rule* before = longest_suffix(stem, kIng)) {
        if (before->action == 1) {
          // consonant + y + ing, e.g. "dying" -> "die"
          if (stem.size() == 2 && !is_vowel(stem[0])) {
            replace_tail(w_, r->suffix.size() + 1, U"ie");
            return;
          }
        } else if (stem.size() == before->suffix.size()) {
          return;
        }
      }
    }

    // Delete the suffix if the preceding part contains a vowel.
    if (std::none_of(stem.begin(), stem.end(), is_vowel)) return;
    w_.erase(start);

    static constexpr std::array<View, 3> kAddE = {U"at", U"bl", U"iz"};
    for (View s : kAddE) {
      if (ends_with(w_, s)) {
        w_.push_back(U'e');
        return;
      }
    }
    const std::size_t n = w_.size();
    if (n >= 2 && is_double(View(w_).substr(n - 2))) {
      if (n == 3 && View(U"aeo").find(w_[0]) != View::npos) return;
      w_.pop_back();
      return;
    }
    if (n == p1_ && short_syllable(n)) w_.push_back(U'e');
  }

  void step_1c() {
    const std::size_t n = w_.size();
    if (n < 3) return;
    if (w_[n - 1] != U'y' && w_[n - 1] != U'Y') return;
    if (is_vowel(w_[n - 2])) return;
    w_[n - 1] = U'i';
  }

  void step_2() {
    static constexpr std::array<Rule, 25> kRules = {{
        {U"anci", 3},    {U"enci", 2},    {U"ogi", 14},     {U"li", 16},      {U"bli", 12},
        {U"abli", 4},    {U"alli", 8},    {U"fulli", 9},    {U"lessli", 15},  {U"ousli", 10},
        {U"entli", 5},   {U"aliti", 8},   {U"biliti", 12},  {U"iviti", 11},   {U"tional", 1},
        {U"ational", 7}, {U"alism", 8},   {U"ation", 7},    {U"ization", 6},  {U"izer", 6},
        {U"ator", 7},    {U"iveness", 11}, {U"fulness", 9}, {U"ousness", 10}, {U"ogist", 13},
    }};
    const Rule* r = longest_suffix(w_, kRules);
    if (!r) return;
    const std::size_t len = r->suffix.size();
    const std::size_t start = w_.size() - len;
    if (!in_r1(start)) return;
    static constexpr std::array<View, 16> kReplacement = {
        U"",    U"tion", U"ence", U"ance", U"able", U"ent", U"ize", U"ate",
        U"al",  U"ful",  U"ous",  U"ive",  U"ble",  U"og",  U"og",  U"less"};
    switch (r->action) {
      case 14:
        if (start == 0 || w_[start - 1] != U'l') return;
        replace_tail(w_, len, U"og");
        return;
      case 16:
        if (start == 0 || !is_valid_li(w_[start - 1])) return;
        replace_tail(w_, len, U"");
        return;
      default:
        replace_tail(w_, len, kReplacement[static_cast<std::size_t>(r->action)]);
    }
  }

  void step_3() {
    static constexpr std::array<Rule, 9> kRules = {{
        {U"icate", 4}, {U"ative", 6}, {U"alize", 3}, {U"iciti", 4}, {U"ical", 4},
        {U"tional", 1}, {U"ational", 2}, {U"ful", 5}, {U"ness", 5},
    }};
    const Rule* r = longest_suffix(w_, kRules);
    if (!r) return;
    const std::size_t len = r->suffix.size();
    const std::size_t start = w_.size() - len;
    if (!in_r1(start)) return;
    switch (r->action) {
      case 1: replace_tail(w_, len, U"tion"); break;
      case 2: replace_tail(w_, len, U"ate"); break;
      case 3: replace_tail(w_, len, U"al"); break;
      case 4: replace_tail(w_, len, U"ic"); break;
      case 5: replace_tail(w_, len, U""); break;
      case 6:
        if (in_r2(start)) replace_tail(w_, len, U"");
        break;
    }
  }

  void step_4() {
    static constexpr std::array<Rule, 18> kRules = {{
        {U"ic", 1},  {U"ance", 1}, {U"ence", 1}, {U"able", 1}, {U"ible", 1}, {U"ate", 1},
        {U"ive", 1}, {U"ize", 1},  {U"iti", 1},  {U"al", 1},   {U"ism", 1},  {U"ion", 2},
        {U"er", 1},  {U"ous", 1},  {U"ant", 1},  {U"ent", 1},  {U"ment", 1}, {U"ement", 1},
    }};
    const Rule* r = longest_suffix(w_, kRules);
    if (!r) return;
    const std::size_t len = r->suffix.size();
    const std::size_t start = w_.size() - len;
    if (!in_r2(start)) return;
    if (r->action == 2 && (start == 0 || (w_[start - 1] != U's' && w_[start - 1] != U't'))) return;
    w_.erase(start);
  }

  void step_5() {
    const std::size_t n = w_.size();
    if (n == 0) return;
    const std::size_t start = n - 1;
    if (w_[start] == U'e') {
      if (in_r2(start) || (in_r1(start) && !short_syllable(start))) w_.pop_back();
    } else if (w_[start] == U'l') {
      if (in_r2(start) && start > 0 && w_[start - 1] == U'l') w_.pop_back();
    }
  }

  Word w_;
  std::size_t p1_ = 0;
  std::size_t p2_ = 0;
};

}  // namespace

std::string snowball_stem(std::string_view word) {
  return utf8::encode(Stemmer(utf8::decode(word)).run());
}

}  // namespace transicd::preprocess
