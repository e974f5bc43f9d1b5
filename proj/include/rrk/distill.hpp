#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rrk/retrieval.hpp"

namespace rrk {

/// Synthetic oracle: scale * (grade + jitter) + offset, with a deterministic
/// per-(qid, doc_id) jitter in [-0.05, 0.05].
class Teacher {
 public:
  explicit Teacher(const Qrels& qrels, double scale = 1.0, double offset = 0.0, std::uint64_t salt = 0)
      : qrels_(qrels), scale_(scale), offset_(offset), salt_(salt) {}

  double score(const std::string& qid, const std::string& doc_id) const;
  static double jitter(const std::string& qid, const std::string& doc_id, std::uint64_t salt = 0);

 private:
  const Qrels& qrels_;
  double scale_, offset_;
  std::uint64_t salt_;
};

/// Routes each query to one of several teachers by a hash of its id, the toy
/// form of training on a union of differently scored datasets.
class MixedTeacher {
 public:
  explicit MixedTeacher(std::vector<Teacher> teachers) : teachers_(std::move(teachers)) {}
  double score(const std::string& qid, const std::string& doc_id) const;
  std::size_t route(const std::string& qid) const;

 private:
  std::vector<Teacher> teachers_;
};

struct TrainingExample {
  std::string qid;
  std::vector<std::string> docs;
  std::vector<double> teacher_scores;

  bool operator==(const TrainingExample&) const = default;
};

struct TrainingSetOptions {
  std::size_t n_docs = 16;
  std::size_t pool = 50;
  std::uint64_t seed = 0;
};

/// Per query: retrieve the pool, score it with the teacher, sample n_docs
/// uniformly without replacement (kept in first-stage order). Queries with
/// fewer than n_docs candidates are skipped and reported in `skipped`.
template <typename TeacherT>
std::vector<TrainingExample> build_training_set(const std::vector<Query>& queries, const Bm25Index& retriever,
                                                const TeacherT& teacher, const TrainingSetOptions& options,
                                                std::vector<std::string>* skipped = nullptr);

std::string format_training_set(const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> parse_training_set(std::string_view text);
void write_training_set(const std::filesystem::path& path, const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> read_training_set(const std::filesystem::path& path);

}  // namespace rrk
