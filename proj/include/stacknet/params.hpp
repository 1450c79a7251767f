#pragma once

#include <Eigen/Dense>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/io.hpp"

namespace stacknet {

/// Learnable combiner state: per-model weights plus, for regression only,
/// a global bias.
struct CombinerParams {
  Eigen::VectorXd weights;
  std::optional<double> bias;  // regression combiners only

  static CombinerParams uniform(Eigen::Index m, bool with_bias) {
    CombinerParams p;
    p.weights = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    if (with_bias) p.bias = 0.0;
    return p;
  }
};

/// Key-value text format: an optional `bias <value>` line followed by one
/// `weight.<model_id> <value>` line per model, full decimal precision.
inline void save_params(const CombinerParams& params, const std::vector<std::string>& model_ids,
                        std::ostream& os) {
  if (static_cast<Eigen::Index>(model_ids.size()) != params.weights.size())
    throw std::invalid_argument("save_params: model_ids size must match weights");
  if (params.bias) os << "bias " << format_double(*params.bias) << "\n";
  for (Eigen::Index j = 0; j < params.weights.size(); ++j)
    os << "weight." << model_ids[static_cast<std::size_t>(j)] << " "
       << format_double(params.weights(j)) << "\n";
}

inline std::string params_to_string(const CombinerParams& params,
                                    const std::vector<std::string>& model_ids) {
  std::ostringstream os;
  save_params(params, model_ids, os);
  return os.str();
}

/// Loads params saved by save_params. Weights are reordered to match
/// `model_ids`; every id must be present exactly once.
inline CombinerParams load_params(std::istream& is, const std::vector<std::string>& model_ids) {
  std::map<std::string, double> weights;
  std::optional<double> bias;
  std::string line;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto sep = t.find(' ');
    if (sep == std::string_view::npos)
      throw std::invalid_argument("load_params: malformed line '" + std::string(t) + "'");
    const std::string key(trim(t.substr(0, sep)));
    const double value = parse_double(trim(t.substr(sep + 1)));
    if (key == "bias") {
      bias = value;
    } else if (key.rfind("weight.", 0) == 0) {
      const std::string id = key.substr(7);
      if (!weights.emplace(id, value).second)
        throw std::invalid_argument("load_params: duplicate weight for '" + id + "'");
    } else {
      throw std::invalid_argument("load_params: unknown key '" + key + "'");
    }
  }
  CombinerParams p;
  p.bias = bias;
  p.weights.resize(static_cast<Eigen::Index>(model_ids.size()));
  for (std::size_t j = 0; j < model_ids.size(); ++j) {
    auto it = weights.find(model_ids[j]);
    if (it == weights.end())
      throw std::invalid_argument("load_params: missing weight for model '" + model_ids[j] + "'");
    p.weights(static_cast<Eigen::Index>(j)) = it->second;
  }
  if (weights.size() != model_ids.size())
    throw std::invalid_argument("load_params: file contains weights for unknown models");
  return p;
}

}  // namespace stacknet
