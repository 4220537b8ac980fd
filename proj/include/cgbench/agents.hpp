#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgbench/agent_spec.hpp"
#include "cgbench/events.hpp"
#include "cgbench/llm_client.hpp"
#include "cgbench/rng.hpp"
#include "cgbench/session.hpp"

namespace cgbench {

/// Everything a seat can see when it is asked to act.
struct SeatView {
  Seat seat = Seat::Helper;
  ViewCondition view = ViewCondition::Shared;
  std::vector<SessionEvent> events;  // already filtered by visibility
  SeatMaterials materials;
  std::optional<Seat> pending_proposal;
};

SeatView view_for(const Session& session, Seat seat);

enum class CompletionIntent { None, Propose, Confirm };

struct AgentTurn {
  std::string text;
  CompletionIntent intent = CompletionIntent::None;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentTurn step(const SeatView& view) = 0;
};

/// Scripted Helper: instructs one target piece per message in row-major
/// order using canonical id/coordinate phrasing, repairs mismatches it can
/// see in snapshots, and proposes completion when the puzzle is done.
AgentTurn oracle_helper_policy(const SeatView& view);

/// Scripted Worker: executes the latest unexecuted Helper instruction
/// literally. With error_rate > 0 each PLACE is sent to a wrong cell with
/// that probability.
AgentTurn oracle_worker_policy(const SeatView& view, double error_rate, Rng& rng);

class OracleHelperAgent : public Agent {
 public:
  AgentTurn step(const SeatView& view) override { return oracle_helper_policy(view); }
};

class OracleWorkerAgent : public Agent {
 public:
  OracleWorkerAgent(double error_rate, std::uint64_t seed) : error_rate_(error_rate), rng_(seed) {}
  AgentTurn step(const SeatView& view) override { return oracle_worker_policy(view, error_rate_, rng_); }

 private:
  double error_rate_;
  Rng rng_;
};

/// Seat driven by a chat-completion endpoint.
class LlmAgent : public Agent {
 public:
  LlmAgent(AgentSpec spec, EndpointConfig endpoint, PromptProfile profile,
           std::shared_ptr<ChatTransport> transport = nullptr);
  AgentTurn step(const SeatView& view) override;

  /// Prompt messages for a view, after context truncation. Exposed for tests.
  std::vector<ChatMessage> build_prompt(const SeatView& view) const;

 private:
  AgentSpec spec_;
  EndpointConfig endpoint_;
  PromptProfile profile_;
  std::shared_ptr<ChatTransport> transport_;
};

/// A seat played by a person over the wire protocol. step() is never valid.
class HumanBridgeAgent : public Agent {
 public:
  AgentTurn step(const SeatView& view) override;
};

/// Text rendering of a board snapshot for non-vision agents.
std::string render_board_text(const nlohmann::json& board);
std::string render_target_text(const SeatMaterials& helper_materials);
std::string render_palette_text(const std::vector<Piece>& palette);

/// Marker an LLM writes to propose or confirm completion.
inline constexpr const char* kCompletionMarker = "PUZZLE COMPLETE";

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, Seat seat, std::uint64_t seed,
                                  std::shared_ptr<ChatTransport> transport = nullptr);

}  // namespace cgbench
