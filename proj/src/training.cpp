#include "rdlda/training.hpp"

#include <stdexcept>

namespace rdlda {

PredictorKind parse_predictor(const std::string& name) {
  if (name == "hyperplane") return PredictorKind::kHyperplane;
  if (name == "euclidean") return PredictorKind::kEuclidean;
  if (name == "lda") return PredictorKind::kLda;
  throw std::invalid_argument("unknown predictor: " + name);
}

std::string predictor_name(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kHyperplane: return "hyperplane";
    case PredictorKind::kEuclidean: return "euclidean";
    case PredictorKind::kLda: return "lda";
  }
  throw std::logic_error("unreachable");
}

Evaluator make_evaluator(Model& model, const Dataset& train,
                         const LossConfig& loss_cfg) {
  const Matrix latents = model.forward(train.features, Mode::kEval);
  LabeledBatch batch{latents, train.labels, train.class_count};
  Evaluator ev;
  const double a = loss_cfg.effective_alpha();
  ev.ref = build_reference(batch, a, loss_cfg.lambda);
  ev.lda = lda_fit(batch, a, loss_cfg.lambda);
  return ev;
}

std::vector<int> evaluate(const Evaluator& ev, Model& model,
                          const Matrix& features, PredictorKind kind) {
  const Matrix latents = model.forward(features, Mode::kEval);
  switch (kind) {
    case PredictorKind::kHyperplane: return hyperplane_predict(latents, ev.ref);
    case PredictorKind::kEuclidean: return euclidean_predict(latents, ev.ref);
    case PredictorKind::kLda: return lda_predict(ev.lda, latents);
  }
  throw std::logic_error("unreachable");
}

namespace {

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
  return pred.empty() ? 0.0 : double(correct) / double(pred.size());
}

struct Snapshot {
  std::vector<Matrix> values;
  std::vector<Matrix> states;
  std::vector<Matrix> velocities;
};

Snapshot take_snapshot(Model& model) {
  Snapshot s;
  for (Param* p : model.params()) {
    s.values.push_back(p->value);
    s.velocities.push_back(p->velocity);
  }
  for (std::size_t i = 0; i < model.layer_count(); ++i)
    for (Matrix* m : model.layer(i).state()) s.states.push_back(*m);
  return s;
}

void restore_snapshot(Model& model, const Snapshot& s) {
  std::size_t vi = 0;
  for (Param* p : model.params()) {
    p->value = s.values[vi];
    p->velocity = s.velocities[vi];
    ++vi;
  }
  std::size_t si = 0;
  for (std::size_t i = 0; i < model.layer_count(); ++i)
    for (Matrix* m : model.layer(i).state()) *m = s.states[si++];
}

}  // namespace

TrainHistory train_model(Model& model, const Dataset& train, const Dataset& val,
                         const LossConfig& loss_cfg, const TrainConfig& tc,
                         const SeedSplitter& seeds, PredictorKind selector,
                         double hflip_probability,
                         const std::function<int(int)>& fold) {
  TrainHistory history;
  const bool cce = loss_cfg.objective == Objective::kCce;

  BatchPlan plan;
  plan.batch_size = tc.batch_size;
  plan.stratified = !cce;  // scatter estimation needs every class per batch
  plan.seed = seeds.stream("batching");
  std::mt19937_64 dropout_rng(seeds.stream("dropout"));

  Snapshot best = take_snapshot(model);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const Dataset* epoch_data = &train;
    Dataset flipped;
    if (hflip_probability > 0.0 && train.image_mode) {
      flipped = augment_hflip(train, hflip_probability,
                              seeds.stream("hflip"), epoch);
      epoch_data = &flipped;
    }

    auto batches = make_batches(*epoch_data, plan, epoch);
    double loss_sum = 0.0;
    Vector last_eigs;
    for (const auto& batch : batches) {
      const Matrix out =
          model.forward(batch.features, Mode::kTrain, &dropout_rng);
      Matrix grad_out;
      if (cce) {
        auto res = cce_loss(out, batch.labels);
        loss_sum += res.loss;
        grad_out = std::move(res.grad_logits);
      } else {
        LabeledBatch latent{out, batch.labels, batch.class_count};
        auto res = eig_loss_grad(latent, loss_cfg);
        loss_sum += -res.loss;  // the eigenvalue objective is maximized
        grad_out = -res.grad_h;
        last_eigs = std::move(res.valid_eigenvalues);
      }
      model.zero_grad();
      model.backward(grad_out);
      sgd_nesterov_step(model, tc, epoch);
    }
    history.loss_curve.push_back(loss_sum / double(batches.size()));
    if (!cce) history.eigenvalue_trace.push_back(last_eigs);

    Evaluator ev = make_evaluator(model, train, loss_cfg);
    std::vector<int> pred = evaluate(ev, model, val.features, selector);
    if (fold)
      for (int& y : pred) y = fold(y);
    const double acc = accuracy(pred, val.labels);
    history.val_accuracy.push_back(acc);
    if (history.best_epoch < 0 || acc > history.best_val_accuracy) {
      history.best_epoch = epoch;
      history.best_val_accuracy = acc;
      best = take_snapshot(model);
    }
  }
  restore_snapshot(model, best);
  return history;
}

}  // namespace rdlda
