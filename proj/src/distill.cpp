#include "rrk/distill.hpp"

#include <algorithm>
#include <json.hpp>

#include "rrk/fileio.hpp"
#include "rrk/rng.hpp"

namespace rrk {

double Teacher::jitter(const std::string& qid, const std::string& doc_id, std::uint64_t salt) {
  const std::uint64_t h = mix64(fnv1a(qid) ^ mix64(fnv1a(doc_id) ^ salt));
  return (static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5) * 0.1;
}

double Teacher::score(const std::string& qid, const std::string& doc_id) const {
  return scale_ * (grade(qrels_, qid, doc_id) + jitter(qid, doc_id, salt_)) + offset_;
}

std::size_t MixedTeacher::route(const std::string& qid) const {
  return mix64(fnv1a(qid)) % teachers_.size();
}

double MixedTeacher::score(const std::string& qid, const std::string& doc_id) const {
  return teachers_[route(qid)].score(qid, doc_id);
}

template <typename TeacherT>
std::vector<TrainingExample> build_training_set(const std::vector<Query>& queries, const Bm25Index& retriever,
                                                const TeacherT& teacher, const TrainingSetOptions& options,
                                                std::vector<std::string>* skipped) {
  if (options.pool < options.n_docs) {
    throw ConfigError("pool " + std::to_string(options.pool) + " smaller than n_docs " +
                      std::to_string(options.n_docs));
  }
  std::vector<TrainingExample> out;
  for (const auto& q : queries) {
    const auto hits = retriever.retrieve(q.text, options.pool);
    if (hits.size() < options.n_docs) {
      if (skipped) skipped->push_back(q.id);
      continue;
    }
    Rng rng(mix64(options.seed ^ fnv1a(q.id)));
    auto picks = rng.sample_without_replacement(hits.size(), options.n_docs);
    std::sort(picks.begin(), picks.end());
    TrainingExample ex{q.id, {}, {}};
    for (auto i : picks) {
      ex.docs.push_back(hits[i].doc_id);
      ex.teacher_scores.push_back(teacher.score(q.id, hits[i].doc_id));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

template std::vector<TrainingExample> build_training_set(const std::vector<Query>&, const Bm25Index&,
                                                         const Teacher&, const TrainingSetOptions&,
                                                         std::vector<std::string>*);
template std::vector<TrainingExample> build_training_set(const std::vector<Query>&, const Bm25Index&,
                                                         const MixedTeacher&, const TrainingSetOptions&,
                                                         std::vector<std::string>*);

std::string format_training_set(const std::vector<TrainingExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::ordered_json j;
    j["qid"] = ex.qid;
    j["docs"] = ex.docs;
    j["teacher_scores"] = ex.teacher_scores;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<TrainingExample> parse_training_set(std::string_view text) {
  std::vector<TrainingExample> out;
  std::size_t start = 0, lineno = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TrainingExample ex{j.at("qid").get<std::string>(), j.at("docs").get<std::vector<std::string>>(),
                         j.at("teacher_scores").get<std::vector<double>>()};
      if (ex.docs.size() != ex.teacher_scores.size()) {
        throw FormatError("training set line " + std::to_string(lineno) + ": " +
                          std::to_string(ex.docs.size()) + " docs but " +
                          std::to_string(ex.teacher_scores.size()) + " scores");
      }
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("training set line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_training_set(const std::filesystem::path& path, const std::vector<TrainingExample>& examples) {
  write_file_atomic(path, format_training_set(examples));
}

std::vector<TrainingExample> read_training_set(const std::filesystem::path& path) {
  return parse_training_set(read_file(path));
}

}  // namespace rrk
