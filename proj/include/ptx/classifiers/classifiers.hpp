#pragma once

#include <array>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include "ptx/classifiers/classifier.hpp"
#include "ptx/classifiers/knn.hpp"
#include "ptx/classifiers/mlp.hpp"
#include "ptx/classifiers/svm.hpp"
#include "ptx/classifiers/tree.hpp"

namespace ptx {

enum class ClassifierKind { KNN, SVM, MLP, DT, RF };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::KNN;
  std::size_t k = 3;  // kNN only
  std::uint64_t seed = 0;

  /// Grid name: KNN3, KNN5, SVM, MLP, DT, RF.
  std::string name() const {
    switch (kind) {
      case ClassifierKind::KNN: return "KNN" + std::to_string(k);
      case ClassifierKind::SVM: return "SVM";
      case ClassifierKind::MLP: return "MLP";
      case ClassifierKind::DT: return "DT";
      case ClassifierKind::RF: return "RF";
    }
    return "?";
  }

  static ClassifierSpec parse(std::string_view name, std::uint64_t seed = 0) {
    const std::string s(name);
    if (s == "KNN3" || s == "KNN5") return {ClassifierKind::KNN, static_cast<std::size_t>(s[3] - '0'), seed};
    if (s == "SVM") return {ClassifierKind::SVM, 0, seed};
    if (s == "MLP") return {ClassifierKind::MLP, 0, seed};
    if (s == "DT") return {ClassifierKind::DT, 0, seed};
    if (s == "RF") return {ClassifierKind::RF, 0, seed};
    throw ParameterError("unknown classifier '" + s + "'");
  }
};

inline const std::array<std::string_view, 6> kPaperClassifiers = {"KNN3", "KNN5", "SVM", "MLP", "DT", "RF"};

inline std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const TrainingData& d) {
  switch (spec.kind) {
    case ClassifierKind::KNN: return std::make_unique<KnnClassifier>(KnnClassifier::fit(d, spec.k));
    case ClassifierKind::SVM: return std::make_unique<SvmClassifier>(SvmClassifier::fit(d));
    case ClassifierKind::MLP: {
      MlpParams p;
      p.seed = spec.seed;
      return std::make_unique<MlpClassifier>(MlpClassifier::fit(d, p));
    }
    case ClassifierKind::DT: {
      TreeParams p;
      p.seed = spec.seed;
      return std::make_unique<DecisionTree>(DecisionTree::fit(d, p));
    }
    case ClassifierKind::RF: {
      ForestParams p;
      p.seed = spec.seed;
      return std::make_unique<RandomForest>(RandomForest::fit(d, p));
    }
  }
  throw ParameterError("unknown classifier kind");
}

inline void save_model(std::ostream& out, const Classifier& m) {
  BinaryWriter w(out);
  w.magic();
  w.u8(static_cast<std::uint8_t>(m.kind()));
  m.save_payload(w);
}

inline std::unique_ptr<Classifier> load_model(std::istream& in) {
  BinaryReader r(in);
  r.magic();
  switch (static_cast<ModelKind>(r.u8())) {
    case ModelKind::KNN: return std::make_unique<KnnClassifier>(KnnClassifier::load_payload(r));
    case ModelKind::DT: return std::make_unique<DecisionTree>(DecisionTree::load_payload(r));
    case ModelKind::RF: return std::make_unique<RandomForest>(RandomForest::load_payload(r));
    case ModelKind::SVM: return std::make_unique<SvmClassifier>(SvmClassifier::load_payload(r));
    case ModelKind::MLP: return std::make_unique<MlpClassifier>(MlpClassifier::load_payload(r));
    default: throw FormatError("unknown model kind in container");
  }
}

inline std::string model_bytes(const Classifier& m) {
  std::ostringstream s(std::ios::binary);
  save_model(s, m);
  return s.str();
}

}  // namespace ptx
