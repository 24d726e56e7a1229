#pragma once

#include "replaygraph/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <map>
#include <ostream>

namespace replaygraph {

enum class EvalMode { task_aware, class_incremental };
enum class MetricKind { accuracy, micro_f1 };
/// FM divides by M-1 (final task excluded) or by M (its zero difference included).
enum class FmDenominator { m_minus_1, m };

inline std::string to_string(EvalMode m) { return m == EvalMode::task_aware ? "task-aware" : "class-incremental"; }
inline std::string to_string(MetricKind k) { return k == MetricKind::accuracy ? "accuracy" : "micro_f1"; }
inline std::string to_string(FmDenominator d) { return d == FmDenominator::m_minus_1 ? "m-1" : "m"; }

/// A[i][j]: performance on task j after training through task i (j <= i).
class AccuracyMatrix {
 public:
  void append_row(std::vector<double> row) {
    if (row.size() != rows_.size() + 1)
      throw Error("accuracy matrix: row " + std::to_string(rows_.size()) + " must have " + std::to_string(rows_.size() + 1) +
                  " entries");
    for (double v : row)
      if (!(v >= 0.0 && v <= 1.0)) throw Error("accuracy matrix: entry outside [0,1]");
    rows_.push_back(std::move(row));
  }

  [[nodiscard]] Index tasks() const { return static_cast<Index>(rows_.size()); }
  [[nodiscard]] double at(Index i, Index j) const {
    if (j > i) throw Error("accuracy matrix: upper-triangular entry requested");
    return rows_.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
  }
  double& at(Index i, Index j) {
    if (j > i) throw Error("accuracy matrix: upper-triangular entry requested");
    return rows_.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
  }
  [[nodiscard]] const std::vector<std::vector<double>>& rows() const { return rows_; }

  /// `i,j,value` per stored entry.
  void write_csv(std::ostream& out) const {
    out << "i,j,value\n";
    char buf[64];
    for (std::size_t i = 0; i < rows_.size(); ++i)
      for (std::size_t j = 0; j < rows_[i].size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", rows_[i][j]);
        out << i << ',' << j << ',' << buf << '\n';
      }
  }

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

inline double performance_mean(const AccuracyMatrix& m) {
  if (m.tasks() == 0) throw Error("performance_mean: empty matrix");
  double s = 0.0;
  for (Index j = 0; j < m.tasks(); ++j) s += m.at(j, j);
  return s / static_cast<double>(m.tasks());
}

struct Forgetting {
  double mean = 0.0;
  /// f_j = A[j][j] - A[M-1][j] for j < M-1
  std::vector<double> per_task;
};

inline Forgetting forgetting_mean(const AccuracyMatrix& m, FmDenominator denom = FmDenominator::m_minus_1) {
  const Index tasks = m.tasks();
  if (tasks < 2) throw Error("forgetting_mean: needs at least 2 tasks");
  Forgetting f;
  double sum = 0.0;
  for (Index j = 0; j + 1 < tasks; ++j) {
    f.per_task.push_back(m.at(j, j) - m.at(tasks - 1, j));
    sum += f.per_task.back();
  }
  f.mean = sum / static_cast<double>(denom == FmDenominator::m_minus_1 ? tasks - 1 : tasks);
  return f;
}

inline double accuracy(const std::vector<ClassId>& predictions, const std::vector<ClassId>& labels) {
  if (predictions.size() != labels.size()) throw Error("accuracy: length mismatch");
  if (labels.empty()) throw Error("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Micro-averaged F1 from pooled per-class TP/FP/FN counts.
inline double micro_f1(const std::vector<ClassId>& predictions, const std::vector<ClassId>& labels) {
  if (predictions.size() != labels.size()) throw Error("micro_f1: length mismatch");
  if (labels.empty()) throw Error("micro_f1: empty input");
  std::map<ClassId, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) {
      ++counts[labels[i]][0];
    } else {
      ++counts[predictions[i]][1];
      ++counts[labels[i]][2];
    }
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [c, k] : counts) {
    tp += k[0];
    fp += k[1];
    fn += k[2];
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision == recall) return precision;
  return 2.0 * precision * recall / (precision + recall);
}

inline double score_predictions(MetricKind kind, const std::vector<ClassId>& predictions, const std::vector<ClassId>& labels) {
  return kind == MetricKind::accuracy ? accuracy(predictions, labels) : micro_f1(predictions, labels);
}

struct MetricsReport {
  double pm = 0.0;
  double fm = 0.0;
  std::vector<double> per_task_forgetting;
  EvalMode eval_mode = EvalMode::task_aware;
  MetricKind metric_kind = MetricKind::accuracy;
  FmDenominator fm_denominator = FmDenominator::m_minus_1;
};

inline MetricsReport summarize(const AccuracyMatrix& m, EvalMode mode, MetricKind kind, FmDenominator denom) {
  MetricsReport r;
  r.pm = performance_mean(m);
  if (m.tasks() >= 2) {
    auto f = forgetting_mean(m, denom);
    r.fm = f.mean;
    r.per_task_forgetting = std::move(f.per_task);
  }
  r.eval_mode = mode;
  r.metric_kind = kind;
  r.fm_denominator = denom;
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"pm", r.pm},
          {"fm", r.fm},
          {"per_task_forgetting", r.per_task_forgetting},
          {"eval_mode", to_string(r.eval_mode)},
          {"metric_kind", to_string(r.metric_kind)},
          {"fm_denominator", to_string(r.fm_denominator)}};
}

}  // namespace replaygraph
