#pragma once

#include "multiexit/trainkit/train.hpp"

namespace multiexit::trainkit {

// Fixed random readout M and its decoupled backward companion K, one pair
// per stage that ends in an early exit. Both are drawn once at setup and
// never updated.
struct RandomFeedbackPair {
  int attach_index = 0;
  numcore::TensorPtr forward_matrix;   // M, [embed_dim x classes]
  numcore::TensorPtr backward_matrix;  // K, same shape
};

std::vector<RandomFeedbackPair> make_feedback_pairs(const exitnet::MultiExitNetwork& net,
                                                    std::uint64_t seed);

// Stage-local training: every stage's blocks learn from an error signal
// computed through its fixed M and propagated back through its fixed K;
// no gradient crosses a stage boundary. The last stage (the backbone
// classifier) trains on its own cross-entropy. True labels are used at
// every stage.
TrainResult train_local_feedback(exitnet::MultiExitNetwork& net, const Dataset& data,
                                 const TrainingConfig& cfg,
                                 std::vector<RandomFeedbackPair>& pairs,
                                 const IterationObserver& observer = {});

// Convenience overload that draws the pairs from cfg.seed.
TrainResult train_local_feedback(exitnet::MultiExitNetwork& net, const Dataset& data,
                                 const TrainingConfig& cfg,
                                 const IterationObserver& observer = {});

}  // namespace multiexit::trainkit
