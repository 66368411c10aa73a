#pragma once

// sMatch: threshold tests on feature-vector similarity.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"

namespace cqlva {

enum class Metric { Cosine, Euclidean };

enum class Polarity { SimilarityAtLeast, DistanceAtMost };

inline constexpr std::string_view to_string(Metric m) {
  return m == Metric::Cosine ? "COSINE" : "EUCLIDEAN";
}

inline constexpr std::string_view to_string(Polarity p) {
  return p == Polarity::SimilarityAtLeast ? "SIMILARITY_AT_LEAST" : "DISTANCE_AT_MOST";
}

inline std::optional<Metric> parse_metric(std::string_view s) {
  std::string u = lowercase(s);
  if (u == "cosine") return Metric::Cosine;
  if (u == "euclidean") return Metric::Euclidean;
  return std::nullopt;
}

inline std::optional<Polarity> parse_polarity(std::string_view s) {
  std::string u = lowercase(s);
  if (u == "similarity_at_least") return Polarity::SimilarityAtLeast;
  if (u == "distance_at_most") return Polarity::DistanceAtMost;
  return std::nullopt;
}

inline constexpr Polarity default_polarity(Metric m) {
  return m == Metric::Cosine ? Polarity::SimilarityAtLeast : Polarity::DistanceAtMost;
}

struct MatchCondition {
  Metric metric = Metric::Cosine;
  double th = 0.85;
  Polarity polarity = Polarity::SimilarityAtLeast;

  static MatchCondition make(Metric metric, double th, std::optional<Polarity> polarity = {}) {
    if (!(th >= 0.0 && th <= 1.0))
      throw Error(ErrorCode::ConfigError, "sMatch threshold must lie in [0,1], got " + std::to_string(th));
    return {metric, th, polarity.value_or(default_polarity(metric))};
  }

  friend bool operator==(const MatchCondition&, const MatchCondition&) = default;
};

struct MatchResult {
  bool matched = false;
  double score = 0;
};

namespace detail {

inline double checked_norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  if (s == 0.0) throw Error(ErrorCode::ZeroVector, "feature vector has zero magnitude");
  return std::sqrt(s);
}

inline void check_dims(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch, "feature vectors of dimension " +
                                                  std::to_string(a.size()) + " and " +
                                                  std::to_string(b.size()));
}

}  // namespace detail

/// max(0, cos(a, b)), so the result lies in [0,1].
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  detail::check_dims(a, b);
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  double c = dot / (detail::checked_norm(a) * detail::checked_norm(b));
  return std::clamp(c, 0.0, 1.0);
}

/// ||a/|a| - b/|b||| / 2, in [0,1].
inline double euclidean_distance_unit(std::span<const double> a, std::span<const double> b) {
  detail::check_dims(a, b);
  double na = detail::checked_norm(a), nb = detail::checked_norm(b);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] / na - b[i] / nb;
    s += d * d;
  }
  return std::min(1.0, std::sqrt(s) / 2.0);
}

inline double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  return cosine_similarity(a.view(), b.view());
}

inline double euclidean_distance_unit(const FeatureVector& a, const FeatureVector& b) {
  return euclidean_distance_unit(a.view(), b.view());
}

inline MatchResult smatch(const MatchCondition& cond, std::span<const double> a,
                          std::span<const double> b) {
  double score = cond.metric == Metric::Cosine ? cosine_similarity(a, b)
                                               : euclidean_distance_unit(a, b);
  bool matched = cond.polarity == Polarity::SimilarityAtLeast ? score >= cond.th : score <= cond.th;
  return {matched, score};
}

inline MatchResult smatch(const MatchCondition& cond, const FeatureVector& a, const FeatureVector& b) {
  return smatch(cond, a.view(), b.view());
}

}  // namespace cqlva
