#include "regconv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace regconv {

using nlohmann::json;

TrainConfig TrainConfig::paper_bert(std::uint64_t seed) { return TrainConfig{2e-5, 16, 4, seed}; }

TrainConfig TrainConfig::preset(std::string_view name, std::uint64_t seed) {
  if (name == "paper-bert") return paper_bert(seed);
  if (name == "default") return TrainConfig{0.5, 16, 100, seed};
  throw ConfigError(fmt::format("unknown training preset '{}' (expected paper-bert or default)", name));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError(fmt::format("learning rate must be positive (got {})", learning_rate));
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
}

LinearHead LinearHead::zeros(const LabelSet& labels, std::size_t dim) {
  return LinearHead{Matrix(labels.size(), dim), std::vector<double>(labels.size(), 0.0), labels};
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size())
    throw DataError(fmt::format("cross-entropy: dimension mismatch ({} vs {})", predicted.size(), target.size()));
  const double total = std::accumulate(predicted.begin(), predicted.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6)
    throw NumericError(fmt::format("cross-entropy: predicted probabilities sum to {}", total));
  double loss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(predicted[i], 1e-12));
  return loss;
}

namespace {

std::vector<double> logits(const LinearHead& head, std::span<const double> x) {
  std::vector<double> z(head.classes());
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = dot(head.weights.row(c), x) + head.bias[c];
  return z;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct LabeledRows {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> targets;
};

LabeledRows labeled_rows(const EmbeddingMatrix& x, const std::map<std::string, std::string>& labels,
                         const LabelSet& label_set) {
  std::set<std::string> known(x.provision_ids.begin(), x.provision_ids.end());
  for (const auto& [id, cls] : labels) {
    if (!known.contains(id)) throw DataError(fmt::format("label refers to unknown provision '{}'", id));
    label_set.index_of(cls);
  }
  LabeledRows out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto it = labels.find(x.provision_ids[i]);
    if (it == labels.end()) continue;
    out.rows.push_back(i);
    out.targets.push_back(label_set.index_of(it->second));
  }
  return out;
}

}  // namespace

LossAndGradient head_loss_and_gradient(const LinearHead& head, const Matrix& x, std::span<const std::size_t> rows,
                                       std::span<const std::size_t> targets) {
  LossAndGradient out;
  out.grad_weights = Matrix(head.classes(), head.dim());
  out.grad_bias.assign(head.classes(), 0.0);
  if (rows.empty()) return out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto xr = x.row(rows[r]);
    auto p = softmax(logits(head, xr));
    out.loss -= std::log(std::max(p[targets[r]], 1e-12));
    p[targets[r]] -= 1.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      auto g = out.grad_weights.row(c);
      for (std::size_t d = 0; d < xr.size(); ++d) g[d] += p[c] * xr[d];
      out.grad_bias[c] += p[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  out.loss *= inv;
  for (double& g : out.grad_weights.data()) g *= inv;
  for (double& g : out.grad_bias) g *= inv;
  return out;
}

TrainResult train_head(const EmbeddingMatrix& x, const std::map<std::string, std::string>& labels,
                       const LabelSet& label_set, const TrainConfig& cfg) {
  cfg.validate();
  if (label_set.size() < 2) throw ConfigError("training needs a label set with at least two classes");
  LabeledRows data = labeled_rows(x, labels, label_set);
  if (std::set<std::size_t>(data.targets.begin(), data.targets.end()).size() < 2)
    throw DataError("training data must contain at least two distinct classes");

  TrainResult result{LinearHead::zeros(label_set, x.dim()), {}};
  LinearHead& head = result.head;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.rows.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::size_t> batch_rows, batch_targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_rows.clear();
      batch_targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch_rows.push_back(data.rows[order[k]]);
        batch_targets.push_back(data.targets[order[k]]);
      }
      auto lg = head_loss_and_gradient(head, x.rows, batch_rows, batch_targets);
      for (std::size_t k = 0; k < head.weights.data().size(); ++k)
        head.weights.data()[k] -= cfg.learning_rate * lg.grad_weights.data()[k];
      for (std::size_t c = 0; c < head.bias.size(); ++c) head.bias[c] -= cfg.learning_rate * lg.grad_bias[c];
    }
    const double loss = head_loss_and_gradient(head, x.rows, data.rows, data.targets).loss;
    if (!std::isfinite(loss)) throw NumericError(fmt::format("training diverged at epoch {}", epoch + 1));
    result.epoch_loss.push_back(loss);
  }
  return result;
}

std::vector<Prediction> predict(const LinearHead& head, const EmbeddingMatrix& x) {
  if (x.dim() != head.dim())
    throw DataError(fmt::format("predict: head expects dim {} but embeddings have dim {}", head.dim(), x.dim()));
  std::vector<Prediction> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i].probabilities = softmax(logits(head, x.rows.row(i)));
    out[i].class_index = argmax_lowest(out[i].probabilities);
  }
  return out;
}

MetricsReport compute_metrics(const std::map<std::string, std::string>& predictions,
                              const std::map<std::string, std::string>& gold, const LabelSet& label_set) {
  if (gold.empty()) throw DataError("metrics: no samples");
  if (predictions.size() != gold.size())
    throw DataError(fmt::format("metrics: {} predictions for {} gold labels", predictions.size(), gold.size()));
  const std::size_t k = label_set.size();
  MetricsReport r;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (const auto& [id, g] : gold) {
    auto it = predictions.find(id);
    if (it == predictions.end()) throw DataError(fmt::format("metrics: no prediction for '{}'", id));
    ++r.confusion[label_set.index_of(g)][label_set.index_of(it->second)];
  }

  auto ratio = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
  std::size_t correct = 0, included = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += r.confusion[c][j];
      col += r.confusion[j][c];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    correct += r.confusion[c][c];
    ClassMetrics m;
    m.name = label_set.classes()[c];
    m.support = row;
    m.precision = ratio(tp, static_cast<double>(col));
    m.recall = ratio(tp, static_cast<double>(row));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.excluded = row == 0 && col == 0;
    if (!m.excluded) {
      ++included;
      r.macro_precision += m.precision;
      r.macro_recall += m.recall;
      r.macro_f1 += m.f1;
    }
    r.per_class.push_back(std::move(m));
  }
  if (included > 0) {
    r.macro_precision /= static_cast<double>(included);
    r.macro_recall /= static_cast<double>(included);
    r.macro_f1 /= static_cast<double>(included);
  }
  const double total = static_cast<double>(gold.size());
  r.accuracy = static_cast<double>(correct) / total;
  // Single-label multiclass: every sample adds one TP or one (FP, FN) pair.
  r.micro_precision = static_cast<double>(correct) / total;
  r.micro_recall = static_cast<double>(correct) / total;
  return r;
}

std::vector<std::vector<std::string>> stratified_folds(const std::vector<std::string>& ids,
                                                       const std::map<std::string, std::string>& labels,
                                                       const LabelSet& label_set, std::size_t folds,
                                                       std::uint64_t seed, std::vector<std::string>* warnings) {
  std::vector<std::vector<std::string>> by_class(label_set.size());
  std::size_t labeled = 0;
  for (const auto& id : ids) {
    auto it = labels.find(id);
    if (it == labels.end()) continue;
    by_class[label_set.index_of(it->second)].push_back(id);
    ++labeled;
  }
  if (folds < 2 || folds > labeled)
    throw ConfigError(fmt::format("folds={} out of range [2, {}]", folds, labeled));

  Rng rng(seed);
  std::vector<std::vector<std::string>> out(folds);
  std::size_t next = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < folds && warnings)
      warnings->push_back(fmt::format("class '{}' has {} samples for {} folds; some folds will not test it",
                                      label_set.classes()[c], members.size(), folds));
    rng.shuffle(members);
    for (const auto& id : members) {
      out[next].push_back(id);
      next = (next + 1) % folds;
    }
  }
  // Report each fold in input order.
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < ids.size(); ++i) position[ids[i]] = i;
  for (auto& f : out)
    std::sort(f.begin(), f.end(), [&](const auto& a, const auto& b) { return position[a] < position[b]; });
  return out;
}

namespace {

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

}  // namespace

CrossValidationResult cross_validate(const EmbeddingMatrix& x, const std::map<std::string, std::string>& labels,
                                     const LabelSet& label_set, std::size_t folds, const TrainConfig& cfg) {
  labeled_rows(x, labels, label_set);  // validates ids and classes
  CrossValidationResult cv;
  cv.fold_test_ids = stratified_folds(x.provision_ids, labels, label_set, folds, cfg.seed, &cv.warnings);
  cv.folds.resize(folds);

  parallel_for(folds, [&](std::size_t f) {
    std::set<std::string> test(cv.fold_test_ids[f].begin(), cv.fold_test_ids[f].end());
    std::map<std::string, std::string> train_labels;
    for (const auto& [id, cls] : labels)
      if (!test.contains(id)) train_labels.emplace(id, cls);
    TrainResult trained = train_head(x, train_labels, label_set, cfg);
    auto preds = predict(trained.head, x);
    std::map<std::string, std::string> predicted, gold;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!test.contains(x.provision_ids[i])) continue;
      predicted[x.provision_ids[i]] = label_set.classes()[preds[i].class_index];
      gold[x.provision_ids[i]] = labels.at(x.provision_ids[i]);
    }
    cv.folds[f] = compute_metrics(predicted, gold, label_set);
  });

  std::vector<double> acc, p, r, f1;
  for (const auto& m : cv.folds) {
    acc.push_back(m.accuracy);
    p.push_back(m.macro_precision);
    r.push_back(m.macro_recall);
    f1.push_back(m.macro_f1);
  }
  cv.accuracy = mean_std(acc);
  cv.macro_precision = mean_std(p);
  cv.macro_recall = mean_std(r);
  cv.macro_f1 = mean_std(f1);
  return cv;
}

std::size_t soft_vote(std::span<const std::vector<double>> probabilities) {
  if (probabilities.empty()) throw DataError("soft vote: no members");
  std::vector<double> avg(probabilities.front().size(), 0.0);
  for (const auto& p : probabilities) {
    if (p.size() != avg.size()) throw DataError("soft vote: probability vectors differ in length");
    for (std::size_t c = 0; c < avg.size(); ++c) avg[c] += p[c];
  }
  for (double& v : avg) v /= static_cast<double>(probabilities.size());
  return argmax_lowest(avg);
}

std::map<std::string, std::string> ensemble_predict(std::span<const LinearHead> heads,
                                                    std::span<const EmbeddingMatrix> views) {
  if (heads.empty()) throw ConfigError("ensemble needs at least one head");
  if (heads.size() != views.size()) throw ConfigError("ensemble: one embedding view per head is required");
  for (const auto& h : heads)
    if (!(h.label_set == heads.front().label_set)) throw DataError("ensemble: heads use different label sets");
  const auto& ids = views.front().provision_ids;
  std::set<std::string> id_set(ids.begin(), ids.end());
  for (const auto& v : views)
    if (v.size() != ids.size() || std::set<std::string>(v.provision_ids.begin(), v.provision_ids.end()) != id_set)
      throw DataError("ensemble: embedding views cover different provisions");

  std::vector<std::vector<Prediction>> member_preds;
  for (std::size_t m = 0; m < heads.size(); ++m) member_preds.push_back(predict(heads[m], views[m]));

  std::map<std::string, std::string> out;
  std::vector<std::vector<double>> probs(heads.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t m = 0; m < heads.size(); ++m)
      probs[m] = member_preds[m][m == 0 ? i : views[m].index_of(ids[i])].probabilities;
    out[ids[i]] = heads.front().label_set.classes()[soft_vote(probs)];
  }
  return out;
}

std::string format_score_cells(const ModelScore& s) {
  auto pct = [](double v) { return fmt::format("{:.1f}%", v * 100.0); };
  return fmt::format("{} | {} | {} | {}", pct(s.accuracy), pct(s.precision), pct(s.recall), pct(s.f1));
}

std::string render_metrics_table(std::span<const ModelScore> rows) {
  std::string out = "| Model | Accuracy | Precision | Recall | F1-Score |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) out += fmt::format("| {} | {} |\n", r.model, format_score_cells(r));
  return out;
}

json metrics_to_json(const MetricsReport& r) {
  json classes = json::array();
  for (const auto& c : r.per_class)
    classes.push_back({{"class", c.name}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                       {"support", c.support}, {"excluded", c.excluded}});
  return {{"accuracy", r.accuracy},
          {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
          {"micro", {{"precision", r.micro_precision}, {"recall", r.micro_recall}}},
          {"per_class", classes},
          {"confusion", r.confusion}};
}

json cross_validation_to_json(const CrossValidationResult& cv) {
  json folds = json::array();
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    json m = metrics_to_json(cv.folds[f]);
    m["test_ids"] = cv.fold_test_ids[f];
    folds.push_back(m);
  }
  auto ms = [](const MeanStd& v) { return json{{"mean", v.mean}, {"std", v.std}}; };
  return {{"folds", folds},
          {"summary",
           {{"accuracy", ms(cv.accuracy)},
            {"macro_precision", ms(cv.macro_precision)},
            {"macro_recall", ms(cv.macro_recall)},
            {"macro_f1", ms(cv.macro_f1)}}},
          {"warnings", cv.warnings}};
}

json head_to_json(const LinearHead& head) {
  json w = json::array();
  for (std::size_t c = 0; c < head.classes(); ++c) {
    auto r = head.weights.row(c);
    w.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"classes", head.label_set.classes()}, {"weights", w}, {"bias", head.bias}};
}

}  // namespace regconv
