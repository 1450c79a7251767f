#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stacknet/io.hpp"
#include "stacknet/params.hpp"
#include "stacknet/spectral.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

enum class ReliabilityMethod { kSupervisedFewShot, kSStackingNet, kUStackingNet, kSpectral };

inline const char* to_string(ReliabilityMethod m) {
  switch (m) {
    case ReliabilityMethod::kSupervisedFewShot: return "supervised-few-shot";
    case ReliabilityMethod::kSStackingNet: return "s-stacknet";
    case ReliabilityMethod::kUStackingNet: return "u-stacknet";
    case ReliabilityMethod::kSpectral: return "spectral";
  }
  return "unknown";
}

struct ModelReliability {
  std::string model_id;
  double weight = 0.0;
  std::optional<double> estimated_bca;
  int rank = 0;  // 1 = highest weight
};

struct ReliabilityReport {
  /// Sorted by rank ascending (best first).
  std::vector<ModelReliability> per_model;
  ReliabilityMethod method = ReliabilityMethod::kUStackingNet;
  /// (model_id or "*", flag text) pairs for suspected issues.
  std::vector<std::pair<std::string, std::string>> flags;

  const ModelReliability& best() const { return per_model.front(); }
  const ModelReliability& worst() const { return per_model.back(); }
};

/// Ranks models by descending weight; exact ties are ordered by model_id so
/// the ranking is deterministic. Ranks form a permutation of 1..M.
inline ReliabilityReport rank_models(const CombinerParams& params,
                                     const std::vector<std::string>& model_ids,
                                     ReliabilityMethod method,
                                     const std::vector<double>* estimated_bca = nullptr) {
  const std::size_t m = model_ids.size();
  if (static_cast<std::size_t>(params.weights.size()) != m)
    throw std::invalid_argument("rank_models: weight length must match model_ids");
  if (estimated_bca && estimated_bca->size() != m)
    throw std::invalid_argument("rank_models: estimated_bca length must match model_ids");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double wa = params.weights(static_cast<Index>(a));
    const double wb = params.weights(static_cast<Index>(b));
    if (wa != wb) return wa > wb;
    return model_ids[a] < model_ids[b];
  });
  ReliabilityReport report;
  report.method = method;
  report.per_model.reserve(m);
  for (std::size_t r = 0; r < m; ++r) {
    ModelReliability entry;
    entry.model_id = model_ids[order[r]];
    entry.weight = params.weights(static_cast<Index>(order[r]));
    if (estimated_bca) entry.estimated_bca = (*estimated_bca)[order[r]];
    entry.rank = static_cast<int>(r) + 1;
    report.per_model.push_back(std::move(entry));
  }
  return report;
}

/// Reliability report from a sign-resolved spectral estimate. Models with a
/// negative eigenvector entry are flagged as anti-correlated; when at least
/// a third of the pool is anti-correlated the whole report carries an
/// assumption-risk flag (the majority-competence assumption may not hold and
/// the recovered sign, hence the ranking, may be inverted).
inline ReliabilityReport spectral_reliability_report(const SpectralEstimate& est,
                                                     const std::vector<std::string>& model_ids) {
  if (!est.sign_resolved)
    throw std::invalid_argument("spectral_reliability_report: resolve_sign must be applied first");
  CombinerParams raw;
  raw.weights = est.eigenvector;
  ReliabilityReport report =
      rank_models(raw, model_ids, ReliabilityMethod::kSpectral, nullptr);
  int negative = 0;
  for (const auto& entry : report.per_model) {
    if (entry.weight < 0.0) {
      ++negative;
      report.flags.emplace_back(entry.model_id, "anti-correlated");
    }
  }
  const int m = static_cast<int>(model_ids.size());
  if (3 * negative >= m)
    report.flags.emplace_back(
        "*", "assumption-risk: " + std::to_string(negative) + " of " + std::to_string(m) +
                 " models anti-correlated; majority competence may be violated");
  return report;
}

inline ReliabilityMethod reliability_method_from_string(const std::string& s) {
  if (s == "supervised-few-shot") return ReliabilityMethod::kSupervisedFewShot;
  if (s == "s-stacknet") return ReliabilityMethod::kSStackingNet;
  if (s == "u-stacknet") return ReliabilityMethod::kUStackingNet;
  if (s == "spectral") return ReliabilityMethod::kSpectral;
  throw std::invalid_argument("unknown reliability method '" + s + "'");
}

/// CSV form: `model_id,weight,estimated_bca,rank` rows in rank order, then
/// one `#flag,<model_id>,<text>` line per flag.
inline std::string reliability_to_csv(const ReliabilityReport& report) {
  std::string out = "model_id,weight,estimated_bca,rank\n";
  out.reserve(out.size() + report.per_model.size() * 32);
  for (const auto& e : report.per_model) {
    out += e.model_id;
    out += ',';
    out += format_double(e.weight);
    out += ',';
    if (e.estimated_bca) out += format_double(*e.estimated_bca);
    out += ',';
    out += std::to_string(e.rank);
    out += '\n';
  }
  out += "#method," + std::string(to_string(report.method)) + "\n";
  for (const auto& [id, text] : report.flags) out += "#flag," + id + "," + text + "\n";
  return out;
}

inline ReliabilityReport reliability_from_csv(std::istream& is) {
  ReliabilityReport report;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("reliability csv: empty file");
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ',');
    if (fields.size() >= 2 && fields[0] == "#method") {
      report.method = reliability_method_from_string(std::string(trim(fields[1])));
      continue;
    }
    if (fields.size() >= 3 && fields[0] == "#flag") {
      report.flags.emplace_back(std::string(trim(fields[1])), std::string(trim(fields[2])));
      continue;
    }
    if (fields.size() != 4)
      throw std::runtime_error("reliability csv: malformed row '" + std::string(t) + "'");
    ModelReliability e;
    e.model_id = std::string(trim(fields[0]));
    e.weight = parse_double(trim(fields[1]));
    if (!trim(fields[2]).empty()) e.estimated_bca = parse_double(trim(fields[2]));
    e.rank = static_cast<int>(parse_int(trim(fields[3])));
    report.per_model.push_back(std::move(e));
  }
  std::sort(report.per_model.begin(), report.per_model.end(),
            [](const ModelReliability& a, const ModelReliability& b) { return a.rank < b.rank; });
  return report;
}

/// The ceil(inspect_fraction * M) lowest-weight model ids, i.e. the models an
/// auditor would inspect first.
inline std::vector<std::string> detect_compromised(const ReliabilityReport& report,
                                                   double inspect_fraction) {
  if (!(inspect_fraction > 0.0 && inspect_fraction <= 1.0))
    throw std::invalid_argument("detect_compromised: inspect_fraction must lie in (0, 1]");
  const std::size_t m = report.per_model.size();
  const std::size_t count = static_cast<std::size_t>(
      std::ceil(inspect_fraction * static_cast<double>(m)));
  std::vector<std::string> suspects;
  suspects.reserve(count);
  for (std::size_t r = m - count; r < m; ++r)
    suspects.push_back(report.per_model[r].model_id);
  return suspects;
}

}  // namespace stacknet
