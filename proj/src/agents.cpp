#include "cgbench/agents.hpp"

#include <algorithm>
#include <sstream>

#include "cgbench/error.hpp"

namespace cgbench {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Agent specs

AgentSpec parse_agent_spec(std::string_view text, Seat seat) {
  AgentSpec spec;
  const std::string s(text);
  if (s == "oracle") {
    spec.kind = seat == Seat::Helper ? AgentKind::OracleHelper : AgentKind::OracleWorker;
  } else if (s == "oracle-helper") {
    spec.kind = AgentKind::OracleHelper;
  } else if (s == "oracle-worker") {
    spec.kind = AgentKind::OracleWorker;
  } else if (s == "human") {
    spec.kind = AgentKind::HumanBridge;
  } else if (s.rfind("noisy:", 0) == 0) {
    spec.kind = AgentKind::NoisyOracle;
    try {
      std::size_t used = 0;
      spec.error_rate = std::stod(s.substr(6), &used);
      if (used != s.size() - 6) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw BenchError(ErrorCode::InvalidConfig, "bad error rate in agent spec '" + s + "'");
    }
    if (!(spec.error_rate >= 0.0 && spec.error_rate <= 1.0)) {
      throw BenchError(ErrorCode::InvalidConfig, "error rate must lie in [0,1]: '" + s + "'");
    }
  } else if (s.rfind("llm:", 0) == 0) {
    spec.kind = AgentKind::Llm;
    std::stringstream parts(s.substr(4));
    std::string part;
    bool first = true;
    while (std::getline(parts, part, ';')) {
      if (first) {
        spec.endpoint_ref = part;
        first = false;
      } else if (part.rfind("model=", 0) == 0) {
        spec.model_name = part.substr(6);
      } else if (part.rfind("profile=", 0) == 0) {
        spec.prompt_profile = part.substr(8);
      } else if (part == "vision") {
        spec.vision = true;
      } else {
        throw BenchError(ErrorCode::InvalidConfig, "unknown llm option '" + part + "'");
      }
    }
    if (spec.endpoint_ref.empty()) throw BenchError(ErrorCode::InvalidConfig, "llm spec needs an endpoint path");
  } else {
    throw BenchError(ErrorCode::InvalidConfig, "unknown agent spec '" + s + "'");
  }
  return spec;
}

std::string format_agent_spec(const AgentSpec& spec) {
  switch (spec.kind) {
    case AgentKind::OracleHelper: return "oracle-helper";
    case AgentKind::OracleWorker: return "oracle-worker";
    case AgentKind::HumanBridge: return "human";
    case AgentKind::NoisyOracle: {
      std::ostringstream os;
      os << "noisy:" << spec.error_rate;
      return os.str();
    }
    case AgentKind::Llm: {
      std::string out = "llm:" + spec.endpoint_ref;
      if (!spec.model_name.empty()) out += ";model=" + spec.model_name;
      if (!spec.prompt_profile.empty()) out += ";profile=" + spec.prompt_profile;
      if (spec.vision) out += ";vision";
      return out;
    }
  }
  return "unknown";
}

SeatView view_for(const Session& session, Seat seat) {
  SeatView v;
  v.seat = seat;
  v.view = session.config().view;
  v.events = session.observe(seat);
  v.materials = session.materials(seat);
  v.pending_proposal = session.pending_proposal();
  return v;
}

// ---------------------------------------------------------------------------
// Oracle policies

namespace {

struct TrialSlice {
  std::vector<const SessionEvent*> events;
  std::optional<std::size_t> last_helper_chat;
  std::optional<std::size_t> last_worker_chat;
  const SnapshotEvent* latest_snapshot = nullptr;
};

TrialSlice slice_trial(const SeatView& v) {
  TrialSlice t;
  for (const auto& e : v.events) {
    if (e.trial_index != v.materials.trial_index) continue;
    const std::size_t i = t.events.size();
    t.events.push_back(&e);
    if (e.as<ChatEvent>() != nullptr) {
      if (e.actor == Actor::Helper) t.last_helper_chat = i;
      if (e.actor == Actor::Worker) t.last_worker_chat = i;
    }
    if (const auto* s = e.as<SnapshotEvent>()) t.latest_snapshot = s;
  }
  return t;
}

std::vector<Placement> sorted_target(const TargetSolution& target) {
  std::vector<Placement> out = target.placements;
  std::sort(out.begin(), out.end(),
            [](const Placement& a, const Placement& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  return out;
}

std::vector<Placement> snapshot_placements(const SnapshotEvent* snapshot) {
  std::vector<Placement> out;
  if (snapshot == nullptr) return out;
  for (const auto& c : snapshot->board.at("cells")) {
    out.push_back(Placement{c.at("piece_id").get<int>(), c.at("row").get<int>(), c.at("col").get<int>(),
                            c.at("rotation").get<int>()});
  }
  std::sort(out.begin(), out.end(),
            [](const Placement& a, const Placement& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  return out;
}

std::string place_instruction(const Placement& p) {
  std::string text = format_command(PlaceCmd{p.piece_id, p.row, p.col});
  if (p.rotation != 0) text += " then " + format_command(RotateCmd{p.piece_id, p.rotation});
  return text;
}

AgentTurn completion_turn(const SeatView& v, const std::string& reason) {
  if (v.pending_proposal == other(v.seat)) return {"Agreed, " + reason, CompletionIntent::Confirm};
  if (v.pending_proposal == v.seat) return {"I still think " + reason + " Can you confirm?", CompletionIntent::None};
  return {"I think " + reason + " Shall we finish this one?", CompletionIntent::Propose};
}

}  // namespace

AgentTurn oracle_helper_policy(const SeatView& v) {
  if (!v.materials.target) throw BenchError(ErrorCode::InvalidSeat, "oracle helper needs the target");
  const auto target = sorted_target(*v.materials.target);
  const bool rot = v.materials.rotation_sensitive;
  const TrialSlice trial = slice_trial(v);

  if (v.view == ViewCondition::Shared) {
    const auto current = snapshot_placements(trial.latest_snapshot);
    auto matches = [&](const Placement& a, const Placement& b) {
      return a.piece_id == b.piece_id && a.row == b.row && a.col == b.col && (!rot || a.rotation == b.rotation);
    };
    const bool solved = current.size() == target.size() &&
                        std::equal(current.begin(), current.end(), target.begin(), matches);
    if (solved) return completion_turn(v, "the work area matches the target.");

    for (const auto& placed : current) {
      auto want = std::find_if(target.begin(), target.end(),
                               [&](const Placement& t) { return t.piece_id == placed.piece_id; });
      const std::string id = std::to_string(placed.piece_id);
      if (want == target.end()) {
        return {"Piece " + id + " is not part of the pattern: " + format_command(RemoveCmd{placed.piece_id}),
                CompletionIntent::None};
      }
      if (want->row != placed.row || want->col != placed.col) {
        return {"Piece " + id + " is in the wrong cell: " + format_command(RemoveCmd{placed.piece_id}) + " then " +
                    place_instruction(*want),
                CompletionIntent::None};
      }
      if (rot && want->rotation != placed.rotation) {
        const int delta = ((want->rotation - placed.rotation) % 360 + 360) % 360;
        return {"Piece " + id + " needs turning: " + format_command(RotateCmd{placed.piece_id, delta}),
                CompletionIntent::None};
      }
    }
    for (const auto& t : target) {
      const bool on_board = std::any_of(current.begin(), current.end(),
                                        [&](const Placement& c) { return c.piece_id == t.piece_id; });
      if (!on_board) return {"Next piece: " + place_instruction(t), CompletionIntent::None};
    }
    return {"Please check the work area again.", CompletionIntent::None};
  }

  // Without a view, track which pieces have been instructed in this trial.
  std::set<PieceId> instructed;
  for (const auto* e : trial.events) {
    if (e->actor != Actor::Helper) continue;
    if (const auto* chat = e->as<ChatEvent>()) {
      for (const auto& cmd : parse_commands(chat->text).commands) {
        if (const auto* p = std::get_if<PlaceCmd>(&cmd)) instructed.insert(p->piece);
      }
    }
  }
  for (const auto& t : target) {
    if (instructed.count(t.piece_id) == 0) return {"Next piece: " + place_instruction(t), CompletionIntent::None};
  }
  const bool acknowledged =
      trial.last_worker_chat && (!trial.last_helper_chat || *trial.last_worker_chat > *trial.last_helper_chat);
  if (acknowledged) return completion_turn(v, "all four pieces are in place.");
  return {"Let me know once that piece is placed.", CompletionIntent::None};
}

AgentTurn oracle_worker_policy(const SeatView& v, double error_rate, Rng& rng) {
  if (v.pending_proposal == Seat::Helper) return {"Agreed, looks complete.", CompletionIntent::Confirm};

  const TrialSlice trial = slice_trial(v);
  const bool fresh_instruction =
      trial.last_helper_chat && (!trial.last_worker_chat || *trial.last_helper_chat > *trial.last_worker_chat);
  if (!fresh_instruction) return {"What should I do next?", CompletionIntent::None};

  const auto* chat = trial.events[*trial.last_helper_chat]->as<ChatEvent>();
  std::vector<std::string> parts;
  const GridSize grid = v.materials.grid;
  for (const auto& cmd : parse_commands(chat->text).commands) {
    if (!is_board_command(cmd)) continue;
    Command out = cmd;
    if (auto* p = std::get_if<PlaceCmd>(&out); p && rng.bernoulli(error_rate)) {
      // Any other cell of the grid, uniformly.
      const auto cells = static_cast<std::uint64_t>(grid.rows * grid.cols);
      const auto intended = static_cast<std::uint64_t>(p->row * grid.cols + p->col);
      std::uint64_t pick = rng.below(cells - 1);
      if (pick >= intended) ++pick;
      p->row = static_cast<int>(pick / static_cast<std::uint64_t>(grid.cols));
      p->col = static_cast<int>(pick % static_cast<std::uint64_t>(grid.cols));
    }
    parts.push_back(format_command(out));
  }
  if (parts.empty()) return {"What should I do next?", CompletionIntent::None};
  std::string text;
  for (std::size_t i = 0; i < parts.size(); ++i) text += (i ? " then " : "") + parts[i];
  return {text + ". ok done", CompletionIntent::None};
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_board_text(const json& board) {
  std::ostringstream os;
  const auto& grid = board.at("grid");
  os << "Work area " << grid.at("rows").get<int>() << "x" << grid.at("cols").get<int>() << ": ";
  if (board.at("cells").empty()) {
    os << "empty";
  } else {
    bool first = true;
    for (const auto& c : board.at("cells")) {
      os << (first ? "" : "; ") << "piece " << c.at("piece_id").get<int>() << " at (" << c.at("row").get<int>()
         << "," << c.at("col").get<int>() << ") rotated " << c.at("rotation").get<int>();
      first = false;
    }
  }
  return os.str();
}

std::string render_target_text(const SeatMaterials& m) {
  std::ostringstream os;
  if (!m.target) return "";
  for (const auto& p : m.target->placements) {
    auto piece = std::find_if(m.target_pieces.begin(), m.target_pieces.end(),
                              [&](const Piece& x) { return x.id == p.piece_id; });
    os << "- (" << p.row << "," << p.col << "): ";
    if (piece != m.target_pieces.end()) os << piece->color << " piece with a " << piece->pattern << " pattern";
    os << ", rotated " << p.rotation << " degrees\n";
  }
  return os.str();
}

std::string render_palette_text(const std::vector<Piece>& palette) {
  std::ostringstream os;
  for (const auto& p : palette) os << "- ID " << p.id << ": " << p.color << " " << p.pattern << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// LLM and human seats

LlmAgent::LlmAgent(AgentSpec spec, EndpointConfig endpoint, PromptProfile profile,
                   std::shared_ptr<ChatTransport> transport)
    : spec_(std::move(spec)), endpoint_(std::move(endpoint)), profile_(std::move(profile)),
      transport_(std::move(transport)) {
  if (!spec_.model_name.empty()) endpoint_.model = spec_.model_name;
}

std::vector<ChatMessage> LlmAgent::build_prompt(const SeatView& v) const {
  const std::string key = std::string(to_string(v.seat)) + "_" + std::string(to_string(v.view));
  const auto& m = v.materials;
  std::map<std::string, std::string> values{
      {"GRAMMAR", profile_.get("grammar")},
      {"GRID", std::to_string(m.grid.rows) + "x" + std::to_string(m.grid.cols)},
      {"TARGET", render_target_text(m)},
      {"PALETTE", render_palette_text(m.palette)},
  };
  const ChatMessage system{"system", fill_template(profile_.get(key), values)};
  const char* partner = v.seat == Seat::Helper ? "Worker: " : "Helper: ";

  struct Entry {
    int trial;
    ChatMessage msg;
  };
  std::vector<Entry> entries;
  for (const auto& e : v.events) {
    std::optional<ChatMessage> msg;
    if (const auto* c = e.as<ChatEvent>()) {
      if (e.actor == actor_of(v.seat)) {
        msg = ChatMessage{"assistant", c->text};
      } else if (e.actor == Actor::System) {
        msg = ChatMessage{"user", "[system] " + c->text};
      } else {
        msg = ChatMessage{"user", partner + c->text};
      }
    } else if (const auto* s = e.as<SnapshotEvent>()) {
      msg = ChatMessage{"user", "[snapshot] " + render_board_text(s->board)};
    } else if (const auto* a = e.as<ActionEvent>()) {
      msg = ChatMessage{"user", "[action] " + format_command(a->command) + " -> " + a->result};
    } else if (const auto* t = e.as<TrialStartEvent>()) {
      msg = ChatMessage{"user", t->practice ? "[system] Practice puzzle started."
                                            : "[system] Puzzle " + std::to_string(e.trial_index) + " started."};
    } else if (e.as<TrialEndEvent>() != nullptr) {
      msg = ChatMessage{"user", "[system] Puzzle " + std::to_string(e.trial_index) + " ended. Next puzzle."};
    }
    if (msg) entries.push_back({e.trial_index, std::move(*msg)});
  }
  if (m.board) {
    entries.push_back({m.trial_index, ChatMessage{"user", "[your work area] " + render_board_text(board_to_json(*m.board))}});
  } else if (!entries.empty() && entries.back().msg.role == "assistant") {
    entries.push_back({m.trial_index, ChatMessage{"user", "[system] Your turn."}});
  }

  auto total = [&] {
    std::size_t n = system.content.size();
    for (const auto& en : entries) n += en.msg.content.size();
    return n;
  };
  // Drop whole earlier trials first, then the oldest messages of this one.
  while (total() > endpoint_.max_context_chars && !entries.empty() && entries.front().trial < m.trial_index) {
    const int oldest = entries.front().trial;
    entries.erase(std::remove_if(entries.begin(), entries.end(), [&](const Entry& en) { return en.trial == oldest; }),
                  entries.end());
  }
  while (total() > endpoint_.max_context_chars && entries.size() > 1) entries.erase(entries.begin());
  if (total() > endpoint_.max_context_chars) {
    throw BenchError(ErrorCode::ContextOverflow, "system prompt alone exceeds max_context_chars");
  }

  std::vector<ChatMessage> out{system};
  for (auto& en : entries) out.push_back(std::move(en.msg));
  return out;
}

AgentTurn LlmAgent::step(const SeatView& v) {
  ChatClient client(endpoint_, transport_, {});
  std::string text = client.complete(build_prompt(v));
  AgentTurn turn{text, CompletionIntent::None};
  if (text.find(kCompletionMarker) != std::string::npos) {
    turn.intent = v.pending_proposal == other(v.seat) ? CompletionIntent::Confirm : CompletionIntent::Propose;
  }
  return turn;
}

AgentTurn HumanBridgeAgent::step(const SeatView&) {
  throw BenchError(ErrorCode::AgentUnavailable, "human seats act through the wire protocol, not step()");
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, Seat seat, std::uint64_t seed,
                                  std::shared_ptr<ChatTransport> transport) {
  switch (spec.kind) {
    case AgentKind::OracleHelper:
      if (seat != Seat::Helper) throw BenchError(ErrorCode::AgentUnavailable, "oracle-helper in worker seat");
      return std::make_unique<OracleHelperAgent>();
    case AgentKind::OracleWorker:
      if (seat != Seat::Worker) throw BenchError(ErrorCode::AgentUnavailable, "oracle-worker in helper seat");
      return std::make_unique<OracleWorkerAgent>(0.0, seed);
    case AgentKind::NoisyOracle:
      if (seat != Seat::Worker) throw BenchError(ErrorCode::AgentUnavailable, "noisy oracle is a worker policy");
      return std::make_unique<OracleWorkerAgent>(spec.error_rate, seed);
    case AgentKind::Llm: {
      EndpointConfig endpoint = load_endpoint_config(spec.endpoint_ref);
      PromptProfile profile =
          spec.prompt_profile.empty() ? PromptProfile::bundled() : PromptProfile::load(spec.prompt_profile);
      return std::make_unique<LlmAgent>(spec, std::move(endpoint), std::move(profile), std::move(transport));
    }
    case AgentKind::HumanBridge:
      return std::make_unique<HumanBridgeAgent>();
  }
  throw BenchError(ErrorCode::AgentUnavailable, "unknown agent kind");
}

}  // namespace cgbench
