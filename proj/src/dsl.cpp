#include "cgbench/dsl.hpp"

#include <cctype>
#include <optional>

#include "cgbench/error.hpp"

namespace cgbench {

using nlohmann::json;

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(a[i])) != std::toupper(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

enum class Keyword { Place, Rotate, Remove, Done, Noop };

std::optional<Keyword> keyword_of(std::string_view word) {
  if (iequals(word, "PLACE")) return Keyword::Place;
  if (iequals(word, "ROTATE")) return Keyword::Rotate;
  if (iequals(word, "REMOVE")) return Keyword::Remove;
  if (word == "DONE") return Keyword::Done;
  if (word == "NOOP") return Keyword::Noop;
  return std::nullopt;
}

// Cursor over the argument list of one command. Every step either advances
// or records why the arguments are malformed.
class ArgReader {
 public:
  ArgReader(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  bool spaces(bool required) {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    return !required || pos_ > start;
  }

  std::optional<int> integer() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    const std::size_t len = pos_ - start;
    if (len == 0 || len > 9) return std::nullopt;
    // "18a" or "1x" are not integers.
    if (pos_ < text_.size() && is_alpha(text_[pos_])) return std::nullopt;
    return std::stoi(std::string(text_.substr(start, len)));
  }

  bool literal(std::string_view word) {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_alpha(text_[pos_])) ++pos_;
    if (!iequals(text_.substr(start, pos_ - start), word)) return false;
    return pos_ >= text_.size() || !is_digit(text_[pos_]);
  }

  bool symbol(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  // A command must not run straight into more numeric or word material.
  bool at_boundary() const {
    if (pos_ >= text_.size()) return true;
    const char c = text_[pos_];
    if (is_alnum(c)) return false;
    if ((c == ',' || c == '.') && pos_ + 1 < text_.size() && is_digit(text_[pos_ + 1])) return false;
    return true;
  }

 private:
  std::string_view text_;
  std::size_t pos_;
};

struct Parsed {
  std::optional<Command> command;
  std::string error;
  std::size_t end = 0;
};

Parsed parse_arguments(Keyword kw, std::string_view text, std::size_t after_keyword) {
  ArgReader r(text, after_keyword);
  Parsed out;
  auto fail = [&](std::string why) {
    out.error = std::move(why);
    out.end = after_keyword;
    return out;
  };
  switch (kw) {
    case Keyword::Place: {
      if (!r.spaces(true)) return fail("expected space after PLACE");
      auto id = r.integer();
      if (!id) return fail("expected piece id");
      if (!r.spaces(true) || !r.literal("AT")) return fail("expected AT after piece id");
      if (!r.spaces(true)) return fail("expected space after AT");
      auto row = r.integer();
      if (!row) return fail("expected row");
      r.spaces(false);
      if (!r.symbol(',')) return fail("expected ',' between row and col");
      r.spaces(false);
      auto col = r.integer();
      if (!col) return fail("expected col");
      if (!r.at_boundary()) return fail("unexpected text after coordinates");
      out.command = PlaceCmd{*id, *row, *col};
      break;
    }
    case Keyword::Rotate: {
      if (!r.spaces(true)) return fail("expected space after ROTATE");
      auto id = r.integer();
      if (!id) return fail("expected piece id");
      if (!r.spaces(true)) return fail("expected angle");
      auto deg = r.integer();
      if (!deg) return fail("expected angle");
      if (*deg != 90 && *deg != 180 && *deg != 270) return fail("angle must be 90, 180 or 270");
      if (!r.at_boundary()) return fail("unexpected text after angle");
      out.command = RotateCmd{*id, *deg};
      break;
    }
    case Keyword::Remove: {
      if (!r.spaces(true)) return fail("expected space after REMOVE");
      auto id = r.integer();
      if (!id) return fail("expected piece id");
      if (!r.at_boundary()) return fail("unexpected text after piece id");
      out.command = RemoveCmd{*id};
      break;
    }
    case Keyword::Done:
      out.command = DoneCmd{};
      break;
    case Keyword::Noop:
      out.command = NoopCmd{};
      break;
  }
  out.end = r.pos();
  return out;
}

}  // namespace

ParseResult parse_commands(std::string_view text) {
  ParseResult result;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_alpha(text[i]) || (i > 0 && is_alnum(text[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && is_alpha(text[end])) ++end;
    const std::string_view word = text.substr(i, end - i);
    const auto kw = keyword_of(word);
    if (!kw) {
      i = end;
      continue;
    }
    // DONE/NOOP glued to more letters or digits ("DONE1") is not a keyword.
    if ((*kw == Keyword::Done || *kw == Keyword::Noop) && end < text.size() && is_alnum(text[end])) {
      i = end;
      continue;
    }
    Parsed p = parse_arguments(*kw, text, end);
    if (p.command) {
      result.commands.push_back(*p.command);
      i = p.end;
    } else {
      std::string kw_text(word);
      for (auto& c : kw_text) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      result.errors.push_back(MalformedCommand{i, std::move(kw_text), std::move(p.error)});
      i = end;
    }
  }
  return result;
}

std::string format_command(const Command& cmd) {
  struct Visitor {
    std::string operator()(const PlaceCmd& c) const {
      return "PLACE " + std::to_string(c.piece) + " AT " + std::to_string(c.row) + "," + std::to_string(c.col);
    }
    std::string operator()(const RotateCmd& c) const {
      return "ROTATE " + std::to_string(c.piece) + " " + std::to_string(c.degrees);
    }
    std::string operator()(const RemoveCmd& c) const { return "REMOVE " + std::to_string(c.piece); }
    std::string operator()(const DoneCmd&) const { return "DONE"; }
    std::string operator()(const NoopCmd&) const { return "NOOP"; }
  };
  return std::visit(Visitor{}, cmd);
}

bool is_board_command(const Command& cmd) {
  return std::holds_alternative<PlaceCmd>(cmd) || std::holds_alternative<RotateCmd>(cmd) ||
         std::holds_alternative<RemoveCmd>(cmd);
}

std::string describe_error(const MalformedCommand& err) {
  return "MalformedCommand at byte " + std::to_string(err.offset) + " (" + err.keyword + "): " + err.reason;
}

json command_to_json(const Command& cmd) {
  struct Visitor {
    json operator()(const PlaceCmd& c) const {
      return json{{"op", "place"}, {"piece_id", c.piece}, {"row", c.row}, {"col", c.col}};
    }
    json operator()(const RotateCmd& c) const {
      return json{{"op", "rotate"}, {"piece_id", c.piece}, {"degrees", c.degrees}};
    }
    json operator()(const RemoveCmd& c) const { return json{{"op", "remove"}, {"piece_id", c.piece}}; }
    json operator()(const DoneCmd&) const { return json{{"op", "done"}}; }
    json operator()(const NoopCmd&) const { return json{{"op", "noop"}}; }
  };
  return std::visit(Visitor{}, cmd);
}

Command command_from_json(const json& j) {
  try {
    const std::string op = j.at("op").get<std::string>();
    if (op == "place") return PlaceCmd{j.at("piece_id").get<int>(), j.at("row").get<int>(), j.at("col").get<int>()};
    if (op == "rotate") return RotateCmd{j.at("piece_id").get<int>(), j.at("degrees").get<int>()};
    if (op == "remove") return RemoveCmd{j.at("piece_id").get<int>()};
    if (op == "done") return DoneCmd{};
    if (op == "noop") return NoopCmd{};
    throw BenchError(ErrorCode::CorruptLog, "unknown command op '" + op + "'");
  } catch (const json::exception& e) {
    throw BenchError(ErrorCode::CorruptLog, std::string("command: ") + e.what());
  }
}

}  // namespace cgbench
