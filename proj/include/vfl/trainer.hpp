#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "vfl/checkpoint.hpp"
#include "vfl/data.hpp"
#include "vfl/matrix.hpp"

namespace vfl {

struct RoundStats {
  // Cross-entropy of the round's server-side predictions on the batch.
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  // (1/b)Σ_j ‖ŷ_j − z_j‖² after the round's z update; NaN for non-ADMM methods.
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();
};

// One federated training method bound to a dataset and a ledger. Rounds are
// strictly sequential; per-client work inside a round may fan out to worker
// threads (see options on the concrete trainers).
class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual RoundStats run_round(const BatchIndices& batch) = 0;

  // Logits for an aligned block set (validation/test features). Records the
  // required Eval* uplink traffic against `round`; evaluation traffic is
  // excluded from training totals by the ledger.
  virtual Matrix eval_logits(const std::vector<Matrix>& blocks, std::size_t round) = 0;

  // Per-client head matrices used by the importance analyses.
  virtual std::vector<Matrix> client_heads() const = 0;

  virtual CheckpointData checkpoint() const = 0;

  // ADMM diagnostics on the full training set with clean embeddings; NaN
  // where the method has no augmented-Lagrangian structure.
  virtual double full_admm_loss() { return std::numeric_limits<double>::quiet_NaN(); }
  virtual double full_constraint_residual() {
    return std::numeric_limits<double>::quiet_NaN();
  }
};

}  // namespace vfl
