#pragma once

#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "readsim/errors.hpp"
#include "readsim/textio.hpp"
#include "readsim/workflow.hpp"

namespace readsim {

inline constexpr const char* kLedgerHeader =
    "run_id,framework,patient_id,arm,visit,reader_role,reader_kind,total_score,missing,"
    "used_second_human,used_arbitration,consensus";

/// One ledger line: either a read event (total_score/missing filled) or the
/// consensus row closing a (patient, visit) unit (flags + consensus filled).
struct LedgerRow {
  int run_id = 0;
  std::string framework;
  int patient_id = 0;
  std::string arm;
  std::string visit;
  std::string reader_role;  // human1|human2|arbitrator|ai|consensus
  std::string reader_kind;  // human|ai_trained|ai_random|ai_naive, empty on consensus rows
  std::optional<double> total_score;
  bool missing = false;
  std::optional<bool> used_second_human;
  std::optional<bool> used_arbitration;
  std::optional<double> consensus;

  friend bool operator==(const LedgerRow&, const LedgerRow&) = default;
};

inline std::vector<LedgerRow> make_ledger_rows(int run_id, const WorkflowConfig& cfg,
                                               const std::vector<PatientTruth>& cohort,
                                               std::span<const WorkflowOutcome> outcomes) {
  std::vector<LedgerRow> rows;
  rows.reserve(outcomes.size() * 4);
  const std::string fw = framework_name(cfg.framework);
  const std::string ai_kind = cfg.ai ? std::string("ai_") + ai_kind_name(cfg.ai->kind) : "";
  for (const auto& o : outcomes) {
    const std::string arm = arm_name(cohort[static_cast<std::size_t>(o.patient_id)].arm);
    const std::string visit = visit_name(o.visit);
    for (const auto& read : o.reads_taken) {
      LedgerRow r;
      r.run_id = run_id;
      r.framework = fw;
      r.patient_id = o.patient_id;
      r.arm = arm;
      r.visit = visit;
      r.reader_role = role_name(read.role);
      r.reader_kind = (read.role == ReaderRole::kAi) ? ai_kind : "human";
      r.total_score = read.total;
      r.missing = !read.total.has_value();
      rows.push_back(std::move(r));
    }
    LedgerRow c;
    c.run_id = run_id;
    c.framework = fw;
    c.patient_id = o.patient_id;
    c.arm = arm;
    c.visit = visit;
    c.reader_role = "consensus";
    c.used_second_human = o.used_second_human;
    c.used_arbitration = o.used_arbitration;
    c.consensus = o.consensus;
    rows.push_back(std::move(c));
  }
  return rows;
}

inline std::string write_ledger_csv(std::span<const LedgerRow> rows) {
  std::string out = kLedgerHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.run_id);
    out += ',';
    out += r.framework;
    out += ',';
    out += std::to_string(r.patient_id);
    out += ',';
    out += r.arm;
    out += ',';
    out += r.visit;
    out += ',';
    out += r.reader_role;
    out += ',';
    out += r.reader_kind;
    out += ',';
    if (r.total_score) out += format_double(*r.total_score);
    out += ',';
    out += r.missing ? '1' : '0';
    out += ',';
    if (r.used_second_human) out += *r.used_second_human ? '1' : '0';
    out += ',';
    if (r.used_arbitration) out += *r.used_arbitration ? '1' : '0';
    out += ',';
    if (r.consensus) out += format_double(*r.consensus);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace detail

inline std::vector<LedgerRow> parse_ledger_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("ledger: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLedgerHeader) throw ParseError("ledger: unexpected header: " + line);

  std::vector<LedgerRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 12)
      throw ParseError("ledger line " + std::to_string(line_no) + ": expected 12 fields");
    LedgerRow r;
    r.run_id = static_cast<int>(parse_int(f[0]));
    r.framework = f[1];
    r.patient_id = static_cast<int>(parse_int(f[2]));
    r.arm = f[3];
    r.visit = f[4];
    r.reader_role = f[5];
    r.reader_kind = f[6];
    if (!f[7].empty()) r.total_score = parse_double(f[7]);
    r.missing = f[8] == "1";
    if (!f[9].empty()) r.used_second_human = f[9] == "1";
    if (!f[10].empty()) r.used_arbitration = f[10] == "1";
    if (!f[11].empty()) r.consensus = parse_double(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace readsim
