#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgbench/analysis.hpp"
#include "cgbench/catalog.hpp"
#include "cgbench/llm_client.hpp"
#include "cgbench/stats.hpp"
#include "cgbench/transcript.hpp"

namespace cgbench {

enum class AnnotatorKind { Rule, External };

struct AnalyzeOptions {
  std::shared_ptr<const BenchConfig> bench;
  AnnotatorKind annotator = AnnotatorKind::Rule;
  std::optional<EndpointConfig> endpoint;  // required for External
  std::shared_ptr<ChatTransport> transport;
  std::uint64_t seed = 0;
  std::size_t n_perm = 10000;
  double alpha = 0.05;
  int jobs = 1;
};

struct SkippedLog {
  std::string file;
  std::string error;
};

/// Everything cmd_analyze writes. report is the structured report; summary,
/// csv and annotations are derived from the same numbers.
struct AnalysisOutput {
  nlohmann::json report;
  std::string summary;
  std::string csv;          // condition,role,trial,metric,value
  std::string annotations;  // one JSON record per utterance
  std::vector<SkippedLog> skipped;
  std::size_t analyzed = 0;
  int exit_code = 0;  // 0 ok, 2 some logs skipped, 1 nothing usable
};

AnalysisOutput analyze_corpus(const std::filesystem::path& corpus_dir, const AnalyzeOptions& options);
void write_analysis(const AnalysisOutput& out, const std::filesystem::path& out_dir);

/// Number formatting shared by the summary, the CSV and the JSON report.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Log audit

struct AuditResult {
  std::string session_id;
  ViewCondition view = ViewCondition::Shared;
  std::size_t snapshots = 0;
  std::size_t worker_messages = 0;
  std::size_t worker_messages_with_actions = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks snapshot discipline: no Snapshot in NonShared sessions; in Shared
/// sessions exactly one Snapshot, visible to the Helper only, after each
/// Worker message that carried at least one board action, and none otherwise.
AuditResult audit_log(const SessionLog& log);

}  // namespace cgbench
