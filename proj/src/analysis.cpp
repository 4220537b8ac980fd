#include "cgbench/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "cgbench/error.hpp"

namespace cgbench {

namespace detail {
const std::string& embedded_asset(const std::string& name);
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_number(const std::string& w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
}

// "id0", "id18"
bool is_id_token(const std::string& w) { return w.size() > 2 && w.compare(0, 2, "id") == 0 && is_number(w.substr(2)); }

struct Token {
  std::string word;  // empty for a break
  bool is_break() const { return word.empty(); }
};

// Words are runs of letters/digits with inner hyphens or apostrophes. Any
// other punctuation ends the current phrase.
std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back({lower(cur)});
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_alnum(c) || (static_cast<unsigned char>(c) & 0x80)) {
      cur += c;
    } else if ((c == '-' || c == '\'') && !cur.empty() && i + 1 < text.size() && is_alnum(text[i + 1])) {
      cur += c;
    } else if (is_space(c)) {
      flush();
    } else {
      flush();
      out.push_back({""});
    }
  }
  flush();
  return out;
}

const std::set<std::string> kDeterminers{"the", "a", "an", "this", "that", "some"};
const std::set<std::string> kPieceHeads{"piece", "pieces", "tile", "tiles"};
const std::set<std::string> kGenericAdjectives{
    "other",    "same",   "next",   "last",  "first",  "second",  "third",      "fourth", "final",
    "remaining", "small", "big",    "large", "little", "dark",    "light",      "bright", "pale",
    "striped",  "spotted", "dotted", "checkered", "checked", "diagonal", "vertical", "horizontal",
    "wavy",     "curly",  "plain",  "new",   "square", "round",   "colored",    "coloured"};
// Words that end a "with ..." modifier.
const std::set<std::string> kPostmodStop{
    "at",    "in",   "on",     "to",     "into",  "onto",  "from",  "then",  "now",   "and",  "but",
    "or",    "please", "here", "there",  "place", "put",   "move",  "rotate", "remove", "turn", "goes",
    "go",    "is",   "should", "it",     "so",    "under", "above", "below", "beside", "next", "done",
    "ok",    "okay", "which",  "where",  "when",  "if",    "for",   "by",    "as",    "was",  "are"};

class Chunker {
 public:
  Chunker(const std::vector<Token>& toks, const Lexicon& lex) : t_(toks), lex_(lex) {}

  std::vector<std::string> run() {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < t_.size()) {
      std::size_t end = 0;
      if (match_np(i, end) || match_identifier(i, end)) {
        if (keep(i, end)) out.push_back(join(i, end));
        i = end;
      } else {
        ++i;
      }
    }
    return out;
  }

 private:
  const std::string& w(std::size_t i) const {
    static const std::string empty;
    return i < t_.size() ? t_[i].word : empty;
  }

  bool pattern_noun(const std::string& s) const {
    if (lex_.patterns.count(s)) return true;
    return s.size() > 1 && s.back() == 's' && lex_.patterns.count(s.substr(0, s.size() - 1));
  }
  bool head(const std::string& s) const { return kPieceHeads.count(s) || s == "one" || pattern_noun(s); }
  bool premod(const std::string& s) const {
    return lex_.colors.count(s) || lex_.patterns.count(s) || kGenericAdjectives.count(s) || s == "pattern";
  }
  bool identifier_at(std::size_t i, std::size_t& end) const {
    if (is_id_token(w(i))) {
      end = i + 1;
      return true;
    }
    if (w(i) == "id" && is_number(w(i + 1))) {
      end = i + 2;
      return true;
    }
    return false;
  }

  bool match_np(std::size_t i, std::size_t& end) const {
    std::size_t j = i;
    if (kDeterminers.count(w(j))) ++j;
    std::optional<std::size_t> h;
    while (j < t_.size() && !t_[j].is_break() && (premod(w(j)) || head(w(j)))) {
      if (head(w(j)) || w(j) == "pattern") h = j;
      ++j;
    }
    if (!h) return false;
    end = *h + 1;
    if (kPieceHeads.count(w(*h))) {
      std::size_t id_end = 0;
      if (is_number(w(end))) {
        ++end;
      } else if (identifier_at(end, id_end)) {
        end = id_end;
      }
    }
    if (w(end) == "with") {
      std::size_t k = end + 1;
      while (k < t_.size() && k - end - 1 < 6 && !t_[k].is_break() && !kPostmodStop.count(w(k))) ++k;
      while (k > end + 1 && (kDeterminers.count(w(k - 1)) || w(k - 1) == "with")) --k;
      if (k > end + 1) end = k;
    }
    return true;
  }

  bool match_identifier(std::size_t i, std::size_t& end) const { return identifier_at(i, end); }

  bool keep(std::size_t i, std::size_t end) const {
    for (std::size_t k = i; k < end; ++k) {
      const std::string& s = w(k);
      if (lex_.contains(s) || pattern_noun(s) || kPieceHeads.count(s) || is_id_token(s) || s == "id") return true;
    }
    return false;
  }

  std::string join(std::size_t i, std::size_t end) const {
    std::string out;
    for (std::size_t k = i; k < end; ++k) {
      if (!out.empty()) out += ' ';
      out += w(k);
    }
    return out;
  }

  const std::vector<Token>& t_;
  const Lexicon& lex_;
};

const std::regex& identifier_regex() {
  static const std::regex re(R"(\bid\s*\d+|\bpiece\s+\d+|\(\s*\d+\s*,\s*\d+\s*\)|\b\d+\s*,\s*\d+\b)",
                             std::regex::icase | std::regex::optimize);
  return re;
}

// Canonical Worker commands are moves, not references; they are removed
// before a Worker message is classified.
std::string strip_commands(const std::string& text) {
  static const std::regex moves(R"(\b(place\s+\d+\s+at\s+\d+\s*,\s*\d+|rotate\s+\d+\s+\d+|remove\s+\d+)\b|\bthen\b)",
                                std::regex::icase);
  static const std::regex control(R"(\b(DONE|NOOP)\b)");
  return std::regex_replace(std::regex_replace(text, moves, " "), control, " ");
}

// Lowercase with whitespace runs collapsed; punctuation kept.
std::string collapse(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (is_space(c)) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    cur += c;
    if (c == '.' || c == '!' || c == '?' || c == '\n') {
      out.push_back(normalize_phrase(cur) + (c == '?' ? "?" : ""));
      cur.clear();
    }
  }
  if (!normalize_phrase(cur).empty()) out.push_back(normalize_phrase(cur));
  out.erase(std::remove_if(out.begin(), out.end(), [](const std::string& s) { return s.empty() || s == "?"; }),
            out.end());
  return out;
}

// Questions that move on rather than ask about a reference.
bool continuation_question(const std::string& s) {
  static const std::regex re(
      R"(^(so |and |ok |okay |great |good )?(what('s| is)? (next|now)|what next|what should i do( next| now)?|what do i do( next| now)?|anything else|next( one)?|shall we (finish|continue|move on)[a-z ]*|can you confirm|are we done)\?$)");
  return std::regex_match(s, re);
}

bool repair_cue(const std::string& text) {
  static const std::regex start(R"(^(no|nope|not|the one|i mean|i meant|sorry|oops|actually|wait)\b)");
  static const std::regex anywhere(
      R"(\b(wrong|instead|incorrect|mistake|should be|not the|rather|other one|not part of|needs turning|undo|take it (out|off)|i meant)\b)");
  return std::regex_search(text, start) || std::regex_search(text, anywhere);
}

bool acceptance_cue(const std::string& text) {
  static const std::regex re(
      R"(\b(ok|okay|done|got it|yes|yep|yeah|sure|great|perfect|good|agreed|agree|correct|thanks|thank you|alright|nice|cool|complete|finished|looks good)\b)");
  return std::regex_search(text, re);
}

bool placement_cue(const std::string& text) {
  static const std::regex re(R"(\b(place|put|move|rotate|turn|flip|swap|set|drag)\b)");
  return std::regex_search(text, re);
}

}  // namespace

int word_count(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::vector<Utterance> segment_turns(const SessionLog& log) {
  std::vector<Utterance> out;
  for (const auto& e : log.events) {
    if (e.actor == Actor::System) continue;
    const auto* chat = e.as<ChatEvent>();
    if (chat == nullptr || word_count(chat->text) == 0) continue;
    Utterance u;
    u.session_id = log.header.session_id;
    u.trial_index = e.trial_index;
    u.actor = e.actor;
    u.text = chat->text;
    u.word_count = word_count(chat->text);
    u.turn_index = static_cast<int>(out.size());
    u.seq = e.seq;
    out.push_back(std::move(u));
  }
  return out;
}

Lexicon Lexicon::from_catalog(const PieceCatalog& catalog) {
  Lexicon lex;
  for (const auto& c : catalog.colors()) lex.colors.insert(lower(c));
  for (const auto& p : catalog.patterns()) lex.patterns.insert(lower(p));
  return lex;
}

std::string normalize_phrase(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back())) && out.back() != ')') out.pop_back();
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> extract_piece_noun_phrases(std::string_view text, const Lexicon& lexicon) {
  const auto toks = tokenize(text);
  return Chunker(toks, lexicon).run();
}

std::string_view to_string(Definiteness d) {
  switch (d) {
    case Definiteness::Definite: return "definite";
    case Definiteness::Indefinite: return "indefinite";
    case Definiteness::Bare: return "bare";
  }
  return "?";
}

std::string_view to_string(RefType r) { return r == RefType::Identifier ? "identifier" : "descriptive"; }

bool has_identifier(std::string_view text) {
  return std::regex_search(text.begin(), text.end(), identifier_regex());
}

ReferenceClass classify_reference(std::string_view phrase) {
  const std::string norm = normalize_phrase(phrase);
  ReferenceClass cls;
  const std::string first = norm.substr(0, norm.find(' '));
  if (first == "the" || first == "this" || first == "that") {
    cls.definiteness = Definiteness::Definite;
  } else if (first == "a" || first == "an" || first == "some") {
    cls.definiteness = Definiteness::Indefinite;
  }
  cls.ref_type = has_identifier(norm) ? RefType::Identifier : RefType::Descriptive;
  return cls;
}

std::vector<PieceReference> extract_references(const Utterance& u, const Lexicon& lexicon) {
  std::vector<PieceReference> out;
  for (auto& phrase : extract_piece_noun_phrases(u.text, lexicon)) {
    PieceReference r;
    r.cls = classify_reference(phrase);
    r.surface = std::move(phrase);
    r.actor = u.actor;
    r.trial_index = u.trial_index;
    r.seq = u.seq;
    out.push_back(std::move(r));
  }
  return out;
}

VocabularyPartition partition_vocabulary(const std::vector<PieceReference>& refs, Seat participant_seat) {
  struct Acc {
    std::set<std::string> human, ai;
    std::size_t human_chars = 0, ai_chars = 0, human_n = 0, ai_n = 0;
  };
  std::map<int, Acc> acc;
  const Actor participant = actor_of(participant_seat);
  for (const auto& r : refs) {
    if (r.actor == Actor::System) continue;
    Acc& a = acc[r.trial_index];
    if (r.actor == participant) {
      a.human.insert(r.surface);
      a.human_chars += r.surface.size();
      ++a.human_n;
    } else {
      a.ai.insert(r.surface);
      a.ai_chars += r.surface.size();
      ++a.ai_n;
    }
  }
  VocabularyPartition out;
  for (const auto& [trial, a] : acc) {
    TrialVocabulary v;
    std::set_intersection(a.human.begin(), a.human.end(), a.ai.begin(), a.ai.end(),
                          std::inserter(v.joint, v.joint.end()));
    std::set_difference(a.human.begin(), a.human.end(), v.joint.begin(), v.joint.end(),
                        std::inserter(v.human_only, v.human_only.end()));
    std::set_difference(a.ai.begin(), a.ai.end(), v.joint.begin(), v.joint.end(),
                        std::inserter(v.ai_only, v.ai_only.end()));
    v.human_refs = a.human_n;
    v.ai_refs = a.ai_n;
    v.human_mean_length = a.human_n ? static_cast<double>(a.human_chars) / static_cast<double>(a.human_n) : 0.0;
    v.ai_mean_length = a.ai_n ? static_cast<double>(a.ai_chars) / static_cast<double>(a.ai_n) : 0.0;
    out[trial] = std::move(v);
  }
  return out;
}

std::string_view to_string(DialogueAct a) {
  switch (a) {
    case DialogueAct::Presentation: return "presentation";
    case DialogueAct::Clarification: return "clarification";
    case DialogueAct::Repair: return "repair";
    case DialogueAct::Acceptance: return "acceptance";
    case DialogueAct::Other: return "other";
  }
  return "?";
}

DialogueAct dialogue_act_from_string(std::string_view s) {
  for (auto a : {DialogueAct::Presentation, DialogueAct::Clarification, DialogueAct::Repair, DialogueAct::Acceptance,
                 DialogueAct::Other}) {
    if (to_string(a) == s) return a;
  }
  throw BenchError(ErrorCode::CorruptLog, "unknown dialogue act '" + std::string(s) + "'");
}

DialogueAct rule_based_act(const Utterance& u, const std::vector<Utterance>& context, const Lexicon& lexicon) {
  std::string text = u.actor == Actor::Worker ? strip_commands(u.text) : u.text;
  text = collapse(text);
  const auto sents = sentences(text);

  bool continuation = false;
  for (const auto& s : sents) {
    if (s.back() != '?') continue;
    if (continuation_question(s)) {
      continuation = true;
    } else {
      return DialogueAct::Clarification;
    }
  }
  if (repair_cue(text)) return DialogueAct::Repair;

  std::set<std::string> seen;
  for (const auto& c : context) {
    if (c.trial_index != u.trial_index) continue;
    for (auto& p : extract_piece_noun_phrases(c.text, lexicon)) seen.insert(std::move(p));
  }
  bool new_reference = placement_cue(text);
  for (const auto& p : extract_piece_noun_phrases(text, lexicon)) {
    if (!seen.count(p)) new_reference = true;
  }
  // A message that accepts and then introduces something new counts as a
  // presentation.
  if (new_reference) return DialogueAct::Presentation;
  if (continuation || acceptance_cue(text)) return DialogueAct::Acceptance;
  return DialogueAct::Other;
}

DialogueActLabel RuleBasedAnnotator::annotate(const Utterance& u, const std::vector<Utterance>& context) {
  return DialogueActLabel{rule_based_act(u, context, lexicon_), "rule", 1.0, false};
}

ExternalAnnotator::ExternalAnnotator(EndpointConfig endpoint, Lexicon lexicon, std::shared_ptr<ChatTransport> transport)
    : endpoint_(endpoint), client_(std::move(endpoint), std::move(transport)), fallback_(std::move(lexicon)) {}

std::vector<ChatMessage> ExternalAnnotator::build_prompt(const Utterance& u,
                                                         const std::vector<Utterance>& context) const {
  std::string user = "Earlier messages:\n";
  if (context.empty()) user += "(none)\n";
  for (const auto& c : context) user += std::string(to_string(c.actor)) + ": " + c.text + "\n";
  user += "\nMessage to label:\n" + std::string(to_string(u.actor)) + ": " + u.text + "\n";
  return {{"system", detail::embedded_asset("annotator.txt")}, {"user", user}};
}

std::optional<DialogueAct> parse_act_reply(std::string_view reply) {
  const std::string text = lower(reply);
  std::optional<DialogueAct> best;
  std::size_t best_pos = std::string::npos;
  for (auto a : {DialogueAct::Presentation, DialogueAct::Clarification, DialogueAct::Repair, DialogueAct::Acceptance,
                 DialogueAct::Other}) {
    const std::size_t pos = text.find(to_string(a));
    if (pos < best_pos) {
      best_pos = pos;
      best = a;
    }
  }
  return best;
}

DialogueActLabel ExternalAnnotator::annotate(const Utterance& u, const std::vector<Utterance>& context) {
  try {
    const std::string reply = client_.complete(build_prompt(u, context));
    if (auto act = parse_act_reply(reply)) return DialogueActLabel{*act, "external:" + endpoint_.model, 1.0, false};
  } catch (const BenchError& e) {
    if (e.code() != ErrorCode::EndpointError && e.code() != ErrorCode::ContextOverflow) throw;
  }
  DialogueActLabel label = fallback_.annotate(u, context);
  label.fallback = true;
  return label;
}

}  // namespace cgbench
