#include <gtest/gtest.h>

#include <random>

#include "asmvlm/annotation.hpp"
#include "asmvlm/skill.hpp"

using namespace asmvlm;

namespace {

std::set<int> all_markers() {
  std::set<int> s;
  for (int i = kObjectMarkerMin; i <= kObjectMarkerMax; ++i) s.insert(i);
  for (int i = kLocationMarkerMin; i <= kLocationMarkerMax; ++i) s.insert(i);
  return s;
}

const std::set<int> kKnown{1, 2, 3, 101, 102, 103};

Skill skill_of(const ParseResult& r) {
  const auto* d = std::get_if<SkillDecision>(&r);
  if (d == nullptr) {
    ADD_FAILURE() << "parse error: " << std::get<ParseError>(r).message;
    return {};
  }
  return d->skill;
}

ParseErrorKind error_of(const ParseResult& r) {
  const auto* e = std::get_if<ParseError>(&r);
  if (e == nullptr) {
    ADD_FAILURE() << "expected a parse error";
    return ParseErrorKind::NoDecisionFound;
  }
  return e->kind;
}

}  // namespace

TEST(Parser, StrictExamples) {
  const ParseResult r = parse_decision("DECISION: pick(3)", kKnown);
  EXPECT_EQ(skill_of(r), Skill::pick(3));
  EXPECT_EQ(std::get<SkillDecision>(r).extraction_mode, ExtractionMode::Strict);
  EXPECT_EQ(std::get<SkillDecision>(r).raw_text, "DECISION: pick(3)");
  EXPECT_EQ(skill_of(parse_decision("DECISION: done", kKnown)), Skill::done());
  EXPECT_EQ(skill_of(parse_decision("DECISION: init", kKnown)), Skill::init());
  EXPECT_EQ(skill_of(parse_decision("Looking at the goal image...\nDECISION: insert(101)\n", kKnown)),
            Skill::insert(101));
  EXPECT_EQ(skill_of(parse_decision("  decision:  Place( 102 ) ", kKnown)), Skill::place(102));
}

TEST(Parser, TolerantJson) {
  const ParseResult r = parse_decision(R"(I think... {"skill":"insert","target_id":101})", kKnown);
  EXPECT_EQ(skill_of(r), Skill::insert(101));
  EXPECT_EQ(std::get<SkillDecision>(r).extraction_mode, ExtractionMode::Tolerant);
  // Last candidate wins; ids may be numeric strings; braces inside strings are ignored.
  EXPECT_EQ(skill_of(parse_decision(R"({"skill":"pick","object_id":1} then {"skill":"pick","object_id":"2"})",
                                    kKnown)),
            Skill::pick(2));
  EXPECT_EQ(skill_of(parse_decision(R"({"note":"a } brace","answer":{"skill":"done"}})", kKnown)), Skill::done());
}

TEST(Parser, NamespaceErrors) {
  EXPECT_EQ(error_of(parse_decision("DECISION: pick(101)", kKnown)), ParseErrorKind::IdOutOfNamespace);
  EXPECT_EQ(error_of(parse_decision("DECISION: insert(2)", kKnown)), ParseErrorKind::IdOutOfNamespace);
  EXPECT_EQ(error_of(parse_decision("DECISION: pick(7)", kKnown)), ParseErrorKind::IdOutOfNamespace);
  EXPECT_EQ(error_of(parse_decision("DECISION: pick(12345678901234)", kKnown)), ParseErrorKind::IdOutOfNamespace);
}

TEST(Parser, OtherErrors) {
  EXPECT_EQ(error_of(parse_decision("", kKnown)), ParseErrorKind::NoDecisionFound);
  EXPECT_EQ(error_of(parse_decision("I would pick the red gear.", kKnown)), ParseErrorKind::NoDecisionFound);
  EXPECT_EQ(error_of(parse_decision("DECISION: rotate(3)", kKnown)), ParseErrorKind::UnknownSkillName);
  EXPECT_EQ(error_of(parse_decision("DECISION: pick()", kKnown)), ParseErrorKind::MissingId);
  EXPECT_EQ(error_of(parse_decision("DECISION: pick", kKnown)), ParseErrorKind::MissingId);
  EXPECT_EQ(error_of(parse_decision("DECISION: pick(1)\nDECISION: pick(2)", kKnown)),
            ParseErrorKind::AmbiguousDecision);
}

TEST(Parser, RepeatedIdenticalLinesAreNotAmbiguous) {
  EXPECT_EQ(skill_of(parse_decision("DECISION: pick(1)\nso: DECISION: pick(1)", kKnown)), Skill::pick(1));
}

TEST(Parser, ErrorSpansLieInsideText) {
  const std::string text = "blah\nDECISION: pick(101)\n";
  const ParseResult r = parse_decision(text, kKnown);
  const auto* e = std::get_if<ParseError>(&r);
  ASSERT_NE(e, nullptr);
  if (e->span) {
    EXPECT_LE(e->span->first, e->span->second);
    EXPECT_LE(e->span->second, text.size());
  }
}

TEST(Parser, FormatExamples) {
  EXPECT_EQ(format_decision(Skill::done()), "DECISION: done");
  EXPECT_EQ(format_decision(Skill::insert(101)), "DECISION: insert(101)");
  EXPECT_EQ(format_decision(Skill::pick(3)), "DECISION: pick(3)");
  EXPECT_EQ(describe_skill(Skill::pick(3)), "pick object 3");
  EXPECT_EQ(describe_skill(Skill::insert(101)), "insert at location 101");
  EXPECT_NE(canonical_grammar_text().find("DECISION: pick(<object_id>)"), std::string::npos);
}

TEST(Parser, ExhaustiveRoundTrip) {
  const std::set<int> known = all_markers();
  int checked = 0;
  for (const auto& sig : kSkillTable) {
    std::vector<int> ids;
    if (sig.param == MarkerParam::Object) {
      for (int i = kObjectMarkerMin; i <= kObjectMarkerMax; ++i) ids.push_back(i);
    } else if (sig.param == MarkerParam::Location) {
      for (int i = kLocationMarkerMin; i <= kLocationMarkerMax; ++i) ids.push_back(i);
    } else {
      ids.push_back(0);
    }
    for (int id : ids) {
      const Skill s{sig.name, id};
      ASSERT_TRUE(s.valid());
      const ParseResult r = parse_decision(format_decision(s), known);
      ASSERT_TRUE(std::holds_alternative<SkillDecision>(r)) << format_decision(s);
      EXPECT_EQ(std::get<SkillDecision>(r).skill, s);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 99 + 99 + 99 + 1 + 1);
}

TEST(Parser, FuzzRandomBytesIsTotalAndSound) {
  std::mt19937_64 rng(77);
  const std::vector<std::string> fragments{"DECISION:", "pick(", "insert(", "place(", "done", "init", ")", "{",
                                           "}", "\"skill\"", ":", "\"object_id\"", "101", "3", "\n", "\"", ","};
  for (int i = 0; i < 10000; ++i) {
    std::string text;
    const int len = std::uniform_int_distribution<int>(0, 64)(rng);
    for (int k = 0; k < len; ++k) {
      if (i % 2 == 0) {
        text += static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
      } else {
        text += fragments[std::uniform_int_distribution<std::size_t>(0, fragments.size() - 1)(rng)];
      }
    }
    const ParseResult r = parse_decision(text, kKnown);
    if (const auto* d = std::get_if<SkillDecision>(&r)) {
      EXPECT_TRUE(d->skill.valid());
      if (d->skill.marker != 0) EXPECT_TRUE(kKnown.count(d->skill.marker));
      EXPECT_EQ(d->raw_text, text);
    }
  }
}

TEST(Parser, SkillTableKeywords) {
  for (const auto& sig : kSkillTable) {
    EXPECT_EQ(skill_from_keyword(sig.keyword), sig.name);
    EXPECT_EQ(signature(sig.name).keyword, sig.keyword);
  }
  EXPECT_FALSE(skill_from_keyword("rotate").has_value());
  EXPECT_FALSE(Skill::pick(101).valid());
  EXPECT_FALSE(Skill::insert(3).valid());
  EXPECT_FALSE((Skill{SkillName::Done, 4}).valid());
}
