#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cgbench/catalog.hpp"
#include "cgbench/events.hpp"
#include "cgbench/llm_client.hpp"
#include "cgbench/transcript.hpp"

namespace cgbench {

struct Utterance {
  std::string session_id;
  int trial_index = 0;
  Actor actor = Actor::Helper;
  std::string text;
  int word_count = 0;
  int turn_index = 0;  // position among the session's utterances
  std::int64_t seq = 0;
};

/// Number of maximal non-whitespace runs.
int word_count(std::string_view text);

/// One Utterance per non-empty Helper/Worker chat event; System chat excluded.
std::vector<Utterance> segment_turns(const SessionLog& log);

/// Color and pattern tokens of a catalog, lowercased.
struct Lexicon {
  std::set<std::string> colors;
  std::set<std::string> patterns;

  static Lexicon from_catalog(const PieceCatalog& catalog);
  bool contains(const std::string& token) const { return colors.count(token) || patterns.count(token); }
};

/// Lowercase, collapse whitespace, strip trailing punctuation.
std::string normalize_phrase(std::string_view text);

/// Piece-referencing noun phrases, left to right, normalized. Chunk grammar:
///   Det? Premod* Head (with ...)?
/// with the identifier forms "piece 3", "id 3" and "id3" as extra chunks.
std::vector<std::string> extract_piece_noun_phrases(std::string_view text, const Lexicon& lexicon);

enum class Definiteness { Definite, Indefinite, Bare };
enum class RefType { Descriptive, Identifier };

std::string_view to_string(Definiteness d);
std::string_view to_string(RefType r);

struct ReferenceClass {
  Definiteness definiteness = Definiteness::Bare;
  RefType ref_type = RefType::Descriptive;
  bool operator==(const ReferenceClass&) const = default;
};

bool has_identifier(std::string_view text);
ReferenceClass classify_reference(std::string_view phrase);

struct PieceReference {
  std::string surface;
  ReferenceClass cls;
  Actor actor = Actor::Helper;
  int trial_index = 0;
  std::int64_t seq = 0;
};

std::vector<PieceReference> extract_references(const Utterance& u, const Lexicon& lexicon);

struct TrialVocabulary {
  // "human" is the participant seat of the session, "ai" its partner.
  std::set<std::string> human_only;
  std::set<std::string> ai_only;
  std::set<std::string> joint;
  double human_mean_length = 0.0;  // characters, over all occurrences
  double ai_mean_length = 0.0;
  std::size_t human_refs = 0;
  std::size_t ai_refs = 0;
};

using VocabularyPartition = std::map<int, TrialVocabulary>;  // keyed by trial index

VocabularyPartition partition_vocabulary(const std::vector<PieceReference>& refs, Seat participant_seat);

enum class DialogueAct { Presentation, Clarification, Repair, Acceptance, Other };

std::string_view to_string(DialogueAct a);
DialogueAct dialogue_act_from_string(std::string_view s);

struct DialogueActLabel {
  DialogueAct act = DialogueAct::Other;
  std::string annotator;  // "rule" or "external:<model>"
  double confidence = 1.0;
  bool fallback = false;  // external annotator failed, rule-based label used
};

inline constexpr std::size_t kActContextWindow = 4;

/// Rule-based grounding act. context holds the preceding utterances of the
/// same trial, oldest first.
DialogueAct rule_based_act(const Utterance& u, const std::vector<Utterance>& context, const Lexicon& lexicon);

class DialogueActAnnotator {
 public:
  virtual ~DialogueActAnnotator() = default;
  virtual DialogueActLabel annotate(const Utterance& u, const std::vector<Utterance>& context) = 0;
};

class RuleBasedAnnotator : public DialogueActAnnotator {
 public:
  explicit RuleBasedAnnotator(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}
  DialogueActLabel annotate(const Utterance& u, const std::vector<Utterance>& context) override;

 private:
  Lexicon lexicon_;
};

/// Asks a chat-completion endpoint for the label; falls back to the rule
/// set when the endpoint fails.
class ExternalAnnotator : public DialogueActAnnotator {
 public:
  ExternalAnnotator(EndpointConfig endpoint, Lexicon lexicon, std::shared_ptr<ChatTransport> transport = nullptr);
  DialogueActLabel annotate(const Utterance& u, const std::vector<Utterance>& context) override;
  std::vector<ChatMessage> build_prompt(const Utterance& u, const std::vector<Utterance>& context) const;

 private:
  EndpointConfig endpoint_;
  ChatClient client_;
  RuleBasedAnnotator fallback_;
};

/// Parses a model reply into a label; nullopt when no label is recognizable.
std::optional<DialogueAct> parse_act_reply(std::string_view reply);

}  // namespace cgbench
