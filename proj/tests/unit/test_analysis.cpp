#include <doctest.h>

#include "cgbench/analysis.hpp"
#include "cgbench/error.hpp"
#include "cgbench/rng.hpp"
#include "test_support.hpp"

using namespace cgbench;

namespace {

const Lexicon& lex() {
  static const Lexicon l = Lexicon::from_catalog(testing::bench()->catalog);
  return l;
}

using Phrases = std::vector<std::string>;

Phrases nps(const std::string& text) { return extract_piece_noun_phrases(text, lex()); }

Utterance utt(const std::string& text, Actor actor = Actor::Helper, int trial = 1) {
  Utterance u;
  u.session_id = "s";
  u.trial_index = trial;
  u.actor = actor;
  u.text = text;
  u.word_count = word_count(text);
  return u;
}

DialogueAct act(const std::string& text, Actor actor = Actor::Helper, const std::vector<Utterance>& ctx = {}) {
  return rule_based_act(utt(text, actor), ctx, lex());
}

PieceReference ref(const std::string& surface, Actor actor, int trial) {
  PieceReference r;
  r.surface = surface;
  r.cls = classify_reference(surface);
  r.actor = actor;
  r.trial_index = trial;
  return r;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("word counts") {
    CHECK(word_count("place the spiral at the top left") == 7);
    CHECK(word_count("ok done") == 2);
    CHECK(word_count("") == 0);
    CHECK(word_count("   \t\n ") == 0);
    CHECK(word_count("PLACE 18 AT 0,0") == 4);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      std::string s;
      for (int k = 0; k < 8; ++k) s += std::string(rng.below(3), ' ') + std::string(1 + rng.below(4), 'w');
      const std::string padded = std::string(rng.below(4), ' ') + s + std::string(rng.below(4), '\t');
      CHECK(word_count(padded) == word_count(s));
    }
  }

  TEST_CASE("turn segmentation drops system and empty chat") {
    auto s = Session::start(testing::make_config(ViewCondition::Shared));
    s->submit_message(Seat::Helper, "place the spiral at the top left");
    s->submit_message(Seat::Worker, "ROTATE 0 45");  // adds a System notice
    s->submit_message(Seat::Helper, "");
    s->abort_trial("move on");
    s->submit_message(Seat::Worker, "ok done");
    SessionLog log;
    log.header.session_id = "s";
    log.events = s->events();
    const auto turns = segment_turns(log);
    REQUIRE(turns.size() == 3);
    CHECK(turns[0].actor == Actor::Helper);
    CHECK(turns[0].word_count == 7);
    CHECK(turns[0].trial_index == 0);
    CHECK(turns[1].actor == Actor::Worker);
    CHECK(turns[2].text == "ok done");
    CHECK(turns[2].trial_index == 1);
    for (std::size_t i = 0; i < turns.size(); ++i) CHECK(turns[i].turn_index == static_cast<int>(i));
    CHECK(turns[2].seq == log.events[turns[2].seq].seq);
  }

  TEST_CASE("noun phrase extraction") {
    CHECK(nps("Place the pink piece with a spiral pattern at the top left") ==
          Phrases{"the pink piece with a spiral pattern"});
    CHECK(nps("spiral in top left") == Phrases{"spiral"});
    CHECK(nps("ok done") == Phrases{});
    CHECK(nps("put ID0 on 0,0") == Phrases{"id0"});
    CHECK(nps("Move the yellow piece next to the red one.") == Phrases{"the yellow piece", "the red one"});
    CHECK(nps("add the cream piece with horizontal lines to the right of the spiral piece") ==
          Phrases{"the cream piece with horizontal lines", "the spiral piece"});
    CHECK(nps("I placed piece 3 there") == Phrases{"piece 3"});
    CHECK(nps("the one over there") == Phrases{});
    CHECK(nps("the top left corner") == Phrases{});
  }

  TEST_CASE("reference classification") {
    CHECK(classify_reference("the yellow piece") == ReferenceClass{Definiteness::Definite, RefType::Descriptive});
    CHECK(classify_reference("a yellow piece") == ReferenceClass{Definiteness::Indefinite, RefType::Descriptive});
    CHECK(classify_reference("piece 3 to location (1,2)").ref_type == RefType::Identifier);
    CHECK(classify_reference("piece 3 to location (1,2)").definiteness == Definiteness::Bare);
    CHECK(classify_reference("id0") == ReferenceClass{Definiteness::Bare, RefType::Identifier});
    CHECK(classify_reference("this piece").definiteness == Definiteness::Definite);
    CHECK(classify_reference("that tile").definiteness == Definiteness::Definite);
    CHECK(classify_reference("an other piece").definiteness == Definiteness::Indefinite);
    CHECK(classify_reference("some pieces").definiteness == Definiteness::Indefinite);
    CHECK(classify_reference("stripes").definiteness == Definiteness::Bare);
    CHECK(classify_reference("the piece with stripes").ref_type == RefType::Descriptive);
    CHECK(classify_reference("theme piece").definiteness == Definiteness::Bare);
    CHECK(classify_reference("the piece at 1, 2").ref_type == RefType::Identifier);

    CHECK(has_identifier("ID 10"));
    CHECK(has_identifier("(1, 0)"));
    CHECK_FALSE(has_identifier("valid 3"));
    CHECK_FALSE(has_identifier("the spiral piece"));
  }

  TEST_CASE("identifier references from chat") {
    const auto refs = extract_references(utt("put ID0 on 0,0", Actor::Worker), lex());
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].surface == "id0");
    CHECK(refs[0].cls.ref_type == RefType::Identifier);
    CHECK(refs[0].actor == Actor::Worker);
  }

  TEST_CASE("vocabulary partition examples") {
    const auto p = partition_vocabulary({ref("the checkerboard", Actor::Helper, 1), ref("the checkerboard", Actor::Worker, 1),
                                         ref("the pink one", Actor::Worker, 1), ref("stripes", Actor::Helper, 2),
                                         ref("stripes", Actor::Worker, 3)},
                                        Seat::Helper);
    CHECK(p.at(1).joint == std::set<std::string>{"the checkerboard"});
    CHECK(p.at(1).ai_only == std::set<std::string>{"the pink one"});
    CHECK(p.at(1).human_only.empty());
    CHECK(p.at(2).joint.empty());
    CHECK(p.at(2).human_only == std::set<std::string>{"stripes"});
    CHECK(p.at(3).ai_only == std::set<std::string>{"stripes"});
    CHECK(p.at(1).human_refs == 1);
    CHECK(p.at(1).ai_refs == 2);
    CHECK(p.at(1).ai_mean_length == doctest::Approx((16.0 + 12.0) / 2));

    // the participant seat decides who counts as "human"
    const auto q = partition_vocabulary({ref("the pink one", Actor::Worker, 1)}, Seat::Worker);
    CHECK(q.at(1).human_only == std::set<std::string>{"the pink one"});
  }

  TEST_CASE("vocabulary partition is a disjoint cover") {
    const std::vector<std::string> pool{"the spiral", "a red piece", "id3", "stripes", "the pink one", "piece 7"};
    Rng rng(17);
    for (int run = 0; run < 200; ++run) {
      std::vector<PieceReference> refs;
      for (int k = 0; k < 12; ++k) {
        refs.push_back(ref(pool[rng.below(pool.size())], rng.below(2) ? Actor::Helper : Actor::Worker,
                           static_cast<int>(rng.below(3))));
      }
      const auto part = partition_vocabulary(refs, Seat::Helper);
      for (const auto& [trial, v] : part) {
        std::set<std::string> human;
        std::set<std::string> ai;
        for (const auto& r : refs) {
          if (r.trial_index != trial) continue;
          (r.actor == Actor::Helper ? human : ai).insert(r.surface);
        }
        std::set<std::string> both;
        std::set_intersection(human.begin(), human.end(), ai.begin(), ai.end(), std::inserter(both, both.end()));
        CHECK(v.joint == both);
        std::set<std::string> all = human;
        all.insert(ai.begin(), ai.end());
        std::set<std::string> covered = v.joint;
        for (const auto& x : v.human_only) CHECK(covered.insert(x).second);
        for (const auto& x : v.ai_only) CHECK(covered.insert(x).second);
        CHECK(covered == all);
      }
    }
  }

  TEST_CASE("dialogue act fixtures") {
    CHECK(act("place the red piece at the top") == DialogueAct::Presentation);
    CHECK(act("which red piece?", Actor::Worker) == DialogueAct::Clarification);
    CHECK(act("the one with three stipes") == DialogueAct::Repair);
    CHECK(act("Done. What is next?", Actor::Worker) == DialogueAct::Acceptance);
  }

  TEST_CASE("dialogue act rules beyond the fixtures") {
    const std::vector<Utterance> ctx{utt("place the green piece at the top left"), utt("ok done", Actor::Worker)};
    CHECK(act("ok done", Actor::Worker) == DialogueAct::Acceptance);
    CHECK(act("PLACE 0 AT 0,0. ok done", Actor::Worker) == DialogueAct::Acceptance);
    CHECK(act("Great start! Now, place the white piece with a diamond pattern to the right", Actor::Helper, ctx) ==
          DialogueAct::Presentation);
    CHECK(act("Now place the green piece", Actor::Helper, ctx) == DialogueAct::Presentation);
    CHECK(act("Yes, the green piece", Actor::Helper, ctx) == DialogueAct::Acceptance);
    CHECK(act("No, that is the wrong cell", Actor::Helper) == DialogueAct::Repair);
    CHECK(act("Do you mean the striped one? Done.", Actor::Worker) == DialogueAct::Clarification);
    CHECK(act("What should I do next?", Actor::Worker) == DialogueAct::Acceptance);
    CHECK(act("hello there") == DialogueAct::Other);
    CHECK(act("") == DialogueAct::Other);
  }

  TEST_CASE("rule annotations are deterministic") {
    RuleBasedAnnotator a(lex());
    const auto u = utt("the one with three stipes");
    const auto first = a.annotate(u, {});
    const auto second = a.annotate(u, {});
    CHECK(first.act == second.act);
    CHECK(first.annotator == "rule");
    CHECK_FALSE(first.fallback);
    for (auto x : {DialogueAct::Presentation, DialogueAct::Clarification, DialogueAct::Repair,
                   DialogueAct::Acceptance, DialogueAct::Other}) {
      CHECK(dialogue_act_from_string(to_string(x)) == x);
    }
    CHECK_THROWS_AS(dialogue_act_from_string("greeting"), BenchError);
  }

  TEST_CASE("reply parsing") {
    CHECK(parse_act_reply("Repair.") == DialogueAct::Repair);
    CHECK(parse_act_reply("Label: ACCEPTANCE") == DialogueAct::Acceptance);
    CHECK(parse_act_reply("clarification (not a repair)") == DialogueAct::Clarification);
    CHECK_FALSE(parse_act_reply("banana").has_value());
  }

  TEST_CASE("external annotator and its fallback") {
    auto t = std::make_shared<testing::ScriptedTransport>();
    t->push(testing::completion_reply("clarification"));
    t->push(testing::completion_reply("no idea"));
    ExternalAnnotator ext(testing::fast_endpoint(), lex(), t);
    const std::vector<Utterance> ctx{utt("place the red piece at the top")};
    const auto u = utt("hello there");

    const auto prompt = ext.build_prompt(u, ctx);
    REQUIRE(prompt.size() == 2);
    for (const char* label : {"presentation", "clarification", "repair", "acceptance", "other"}) {
      CHECK(prompt[0].content.find(label) != std::string::npos);
    }
    CHECK(prompt[1].content.find("place the red piece at the top") != std::string::npos);

    auto l = ext.annotate(u, ctx);
    CHECK(l.act == DialogueAct::Clarification);
    CHECK(l.annotator == "external:mock-model");
    CHECK_FALSE(l.fallback);

    l = ext.annotate(u, ctx);  // unusable reply
    CHECK(l.act == DialogueAct::Other);
    CHECK(l.fallback);

    l = ext.annotate(utt("which red piece?"), ctx);  // script exhausted: 500s
    CHECK(l.act == DialogueAct::Clarification);
    CHECK(l.annotator == "rule");
    CHECK(l.fallback);
  }
}
