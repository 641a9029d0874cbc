#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "erdkit/error.hpp"
#include "erdkit/rng.hpp"

namespace erdkit {

struct SvmConfig {
  std::optional<double> gamma;  // RBF bandwidth; unset = 1/dimension
  double c = 1.0;
  double tolerance = 1e-3;
  int max_passes = 500;  // cap on full SMO sweeps per class pair
  std::uint64_t seed = 0;
};

inline double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
  double d2 = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

/// One binary machine of the one-vs-one ensemble. positive_label is always
/// the smaller of the pair, so a zero decision value votes for it.
struct SvmPairModel {
  int positive_label = 0;
  int negative_label = 0;
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> dual_coefficients;  // alpha_i * y_i
  double bias = 0.0;
};

struct SvmModel {
  SvmConfig config;
  double gamma = 0.0;  // resolved value
  std::size_t dimension = 0;
  std::vector<int> class_labels;  // ascending
  std::vector<SvmPairModel> pairs;
};

namespace detail {

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  bool converged = false;
};

/// Simplified SMO on one binary problem (labels in {-1, +1}). Sweeps until a
/// full pass finds no KKT violation beyond tolerance, or max_passes sweeps.
inline SmoResult smo_train(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           double c, double gamma, double tolerance, int max_passes, Rng& rng) {
  const std::size_t n = x.size();
  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double k = rbf_kernel(x[i], x[j], gamma);
      kernel[i * n + j] = k;
      kernel[j * n + i] = k;
    }
  }

  SmoResult r;
  r.alpha.assign(n, 0.0);
  r.bias = 0.0;

  auto decision = [&](std::size_t i) {
    double f = r.bias;
    for (std::size_t j = 0; j < n; ++j) {
      if (r.alpha[j] != 0.0) f += r.alpha[j] * y[j] * kernel[j * n + i];
    }
    return f;
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int sweep = 0; sweep < max_passes; ++sweep) {
    rng.shuffle(order);
    bool any_violation = false;
    for (std::size_t i : order) {
      const double ei = decision(i) - y[i];
      const bool violates = (y[i] * ei < -tolerance && r.alpha[i] < c) ||
                            (y[i] * ei > tolerance && r.alpha[i] > 0.0);
      if (!violates) continue;
      any_violation = true;

      std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
      if (j >= i) ++j;
      const double ej = decision(j) - y[j];

      const double ai_old = r.alpha[i];
      const double aj_old = r.alpha[j];
      double lo, hi;
      if (y[i] != y[j]) {
        lo = std::max(0.0, aj_old - ai_old);
        hi = std::min(c, c + aj_old - ai_old);
      } else {
        lo = std::max(0.0, ai_old + aj_old - c);
        hi = std::min(c, ai_old + aj_old);
      }
      if (lo >= hi) continue;

      const double eta = 2.0 * kernel[i * n + j] - kernel[i * n + i] - kernel[j * n + j];
      if (eta >= 0.0) continue;

      double aj = aj_old - y[j] * (ei - ej) / eta;
      aj = std::clamp(aj, lo, hi);
      if (std::abs(aj - aj_old) < 1e-7) continue;
      const double ai = ai_old + y[i] * y[j] * (aj_old - aj);

      r.alpha[i] = ai;
      r.alpha[j] = aj;

      const double b1 = r.bias - ei - y[i] * (ai - ai_old) * kernel[i * n + i] -
                        y[j] * (aj - aj_old) * kernel[i * n + j];
      const double b2 = r.bias - ej - y[i] * (ai - ai_old) * kernel[i * n + j] -
                        y[j] * (aj - aj_old) * kernel[j * n + j];
      if (ai > 0.0 && ai < c) {
        r.bias = b1;
      } else if (aj > 0.0 && aj < c) {
        r.bias = b2;
      } else {
        r.bias = 0.5 * (b1 + b2);
      }
    }
    if (!any_violation) {
      r.converged = true;
      break;
    }
  }
  return r;
}

}  // namespace detail

inline void validate_svm_config(const SvmConfig& config) {
  if (config.gamma && !(*config.gamma > 0.0)) throw ValidationError("svm config: gamma must be > 0");
  if (!(config.c > 0.0)) throw ValidationError("svm config: C must be > 0");
  if (!(config.tolerance > 0.0)) throw ValidationError("svm config: tolerance must be > 0");
  if (config.max_passes < 1) throw ValidationError("svm config: max_passes must be >= 1");
}

inline SvmModel train_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                          const SvmConfig& config) {
  validate_svm_config(config);
  if (x.empty()) throw ValidationError("train_svm: empty training data");
  if (x.size() != labels.size()) {
    throw ValidationError("train_svm: " + std::to_string(x.size()) + " inputs vs " +
                          std::to_string(labels.size()) + " labels");
  }
  const std::size_t dim = x.front().size();
  if (dim == 0) throw ValidationError("train_svm: zero-dimensional inputs");
  for (const auto& row : x) {
    if (row.size() != dim) throw ValidationError("train_svm: ragged input dimensions");
  }

  const std::set<int> label_set(labels.begin(), labels.end());
  if (label_set.size() < 2) throw ValidationError("train_svm: need at least 2 distinct labels");

  SvmModel model;
  model.config = config;
  model.gamma = config.gamma ? *config.gamma : 1.0 / static_cast<double>(dim);
  model.dimension = dim;
  model.class_labels.assign(label_set.begin(), label_set.end());

  for (std::size_t a = 0; a < model.class_labels.size(); ++a) {
    for (std::size_t b = a + 1; b < model.class_labels.size(); ++b) {
      const int pos = model.class_labels[a];
      const int neg = model.class_labels[b];
      std::vector<std::vector<double>> px;
      std::vector<int> py;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (labels[i] == pos) {
          px.push_back(x[i]);
          py.push_back(+1);
        } else if (labels[i] == neg) {
          px.push_back(x[i]);
          py.push_back(-1);
        }
      }
      Rng rng(derive_seed(config.seed, "pair:" + std::to_string(pos) + ":" + std::to_string(neg)));
      const auto smo = detail::smo_train(px, py, config.c, model.gamma, config.tolerance,
                                         config.max_passes, rng);
      SvmPairModel pair;
      pair.positive_label = pos;
      pair.negative_label = neg;
      pair.bias = smo.bias;
      for (std::size_t i = 0; i < px.size(); ++i) {
        if (smo.alpha[i] > 1e-12) {
          pair.support_vectors.push_back(px[i]);
          pair.dual_coefficients.push_back(smo.alpha[i] * py[i]);
        }
      }
      model.pairs.push_back(std::move(pair));
    }
  }
  return model;
}

inline double pair_decision(const SvmPairModel& pair, double gamma, const std::vector<double>& x) {
  double f = pair.bias;
  for (std::size_t i = 0; i < pair.support_vectors.size(); ++i) {
    f += pair.dual_coefficients[i] * rbf_kernel(pair.support_vectors[i], x, gamma);
  }
  return f;
}

/// One-vs-one majority vote; vote ties resolve to the smallest class label.
inline int predict_svm(const SvmModel& model, const std::vector<double>& x) {
  if (x.size() != model.dimension) {
    throw ValidationError("predict_svm: input dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(model.dimension));
  }
  std::map<int, int> votes;
  for (int label : model.class_labels) votes[label] = 0;
  for (const auto& pair : model.pairs) {
    const double f = pair_decision(pair, model.gamma, x);
    votes[f >= 0.0 ? pair.positive_label : pair.negative_label] += 1;
  }
  int best_label = model.class_labels.front();
  int best_votes = -1;
  for (int label : model.class_labels) {  // ascending: ties keep the smallest
    if (votes[label] > best_votes) {
      best_votes = votes[label];
      best_label = label;
    }
  }
  return best_label;
}

inline nlohmann::json svm_to_json(const SvmModel& model) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : model.pairs) {
    pairs.push_back({{"pos", p.positive_label},
                     {"neg", p.negative_label},
                     {"sv", p.support_vectors},
                     {"coef", p.dual_coefficients},
                     {"bias", p.bias}});
  }
  return nlohmann::json{{"format", "erdkit.svm"},
                        {"version", 1},
                        {"config",
                         {{"gamma", model.config.gamma ? nlohmann::json(*model.config.gamma) : nlohmann::json()},
                          {"c", model.config.c},
                          {"tolerance", model.config.tolerance},
                          {"max_passes", model.config.max_passes},
                          {"seed", model.config.seed}}},
                        {"gamma", model.gamma},
                        {"dimension", model.dimension},
                        {"class_labels", model.class_labels},
                        {"pairs", std::move(pairs)}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "erdkit.svm" || j.value("version", 0) != 1) {
    throw ValidationError("svm_from_json: not a version-1 erdkit.svm container");
  }
  SvmModel model;
  const auto& c = j.at("config");
  if (!c.at("gamma").is_null()) model.config.gamma = c.at("gamma").get<double>();
  model.config.c = c.at("c").get<double>();
  model.config.tolerance = c.at("tolerance").get<double>();
  model.config.max_passes = c.at("max_passes").get<int>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  model.gamma = j.at("gamma").get<double>();
  model.dimension = j.at("dimension").get<std::size_t>();
  model.class_labels = j.at("class_labels").get<std::vector<int>>();
  for (const auto& pj : j.at("pairs")) {
    SvmPairModel pair;
    pair.positive_label = pj.at("pos").get<int>();
    pair.negative_label = pj.at("neg").get<int>();
    pair.support_vectors = pj.at("sv").get<std::vector<std::vector<double>>>();
    pair.dual_coefficients = pj.at("coef").get<std::vector<double>>();
    pair.bias = pj.at("bias").get<double>();
    model.pairs.push_back(std::move(pair));
  }
  return model;
}

}  // namespace erdkit
