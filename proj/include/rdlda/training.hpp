#pragma once

#include "rdlda/data.hpp"
#include "rdlda/loss.hpp"
#include "rdlda/network.hpp"
#include "rdlda/predictors.hpp"

#include <functional>

namespace rdlda {

enum class PredictorKind { kHyperplane, kEuclidean, kLda };

PredictorKind parse_predictor(const std::string& name);
std::string predictor_name(PredictorKind kind);

/// Frozen classification context over a trained model's latent space: the
/// latent reference plus a classic LDA model, both fitted on the training
/// latents in one pass.
struct Evaluator {
  LatentReference ref;
  LdaModel lda;
};

Evaluator make_evaluator(Model& model, const Dataset& train,
                         const LossConfig& loss_cfg);

/// Labels for the given raw features under one predictor.
std::vector<int> evaluate(const Evaluator& ev, Model& model,
                          const Matrix& features, PredictorKind kind);

struct TrainHistory {
  std::vector<double> loss_curve;        // minimized objective, mean per epoch
  std::vector<double> val_accuracy;      // per epoch, via the selector
  std::vector<Vector> eigenvalue_trace;  // valid eigenvalues, last batch/epoch
  int best_epoch = -1;                   // -1 when epochs == 0
  double best_val_accuracy = 0.0;
};

/// Full training loop: stratified batches (plain shuffle for cross entropy),
/// forward, loss gradient, backward, Nesterov step. The model is left holding
/// the parameters of the epoch with the best validation accuracy under the
/// selector predictor (ties keep the earliest epoch). All randomness derives
/// from the seed splitter streams "batching" and "dropout" (and "hflip" for
/// image augmentation), so runs are bit-reproducible.
/// fold, when set, maps predicted labels before comparison against the
/// validation labels (subclass ids back to classes).
TrainHistory train_model(Model& model, const Dataset& train, const Dataset& val,
                         const LossConfig& loss_cfg, const TrainConfig& tc,
                         const SeedSplitter& seeds, PredictorKind selector,
                         double hflip_probability = 0.0,
                         const std::function<int(int)>& fold = {});

}  // namespace rdlda
