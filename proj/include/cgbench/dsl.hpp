#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgbench/catalog.hpp"

namespace cgbench {

// Worker command language, version 1:
//
//   PLACE <id> AT <row>,<col>
//   ROTATE <id> <90|180|270>
//   REMOVE <id>
//   DONE
//   NOOP
//
// PLACE/ROTATE/REMOVE/AT match case-insensitively. DONE and NOOP only match
// in uppercase, since lowercase "done" is an everyday acknowledgment in chat.
inline constexpr int kDslVersion = 1;

struct PlaceCmd {
  PieceId piece = 0;
  int row = 0;
  int col = 0;
  bool operator==(const PlaceCmd&) const = default;
};

struct RotateCmd {
  PieceId piece = 0;
  int degrees = 90;
  bool operator==(const RotateCmd&) const = default;
};

struct RemoveCmd {
  PieceId piece = 0;
  bool operator==(const RemoveCmd&) const = default;
};

struct DoneCmd {
  bool operator==(const DoneCmd&) const = default;
};

struct NoopCmd {
  bool operator==(const NoopCmd&) const = default;
};

using Command = std::variant<PlaceCmd, RotateCmd, RemoveCmd, DoneCmd, NoopCmd>;

/// A keyword was found but its arguments did not match the grammar.
struct MalformedCommand {
  std::size_t offset = 0;  // byte offset of the keyword in the input
  std::string keyword;
  std::string reason;
  bool operator==(const MalformedCommand&) const = default;
};

struct ParseResult {
  std::vector<Command> commands;  // textual order
  std::vector<MalformedCommand> errors;

  bool ok() const { return errors.empty(); }
};

/// Never throws. Text without keywords yields an empty result.
ParseResult parse_commands(std::string_view text);

std::string format_command(const Command& cmd);

/// True for commands that touch the board (place/rotate/remove).
bool is_board_command(const Command& cmd);

std::string describe_error(const MalformedCommand& err);

nlohmann::json command_to_json(const Command& cmd);
Command command_from_json(const nlohmann::json& j);

}  // namespace cgbench
